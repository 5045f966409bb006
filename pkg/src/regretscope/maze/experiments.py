"""Seeded experiment drivers: generalization split, perturbation and coarsening sweeps.

All values are normalized by the per-config optimum, so the fully observed
optimum is 1 and every regret lies in ``[0, 1]`` up to Monte-Carlo noise.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable, Sequence

import numpy as np

from ..errors import InputError
from ..solver import GenRegretReport, RegretReport
from .env import MazeConfig, core_step, MazeState, N_ACTIONS, optimal_maze_value, reachable_cores, test_configs, train_configs
from .filters import WALL_COLUMN_REGION, PreFilter
from .learner import LearnerConfig, Recognition, evaluate, train_tabular

DEFAULT_SEEDS = 5
DEFAULT_P_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_LEVELS: tuple[tuple[int, ...], ...] = ((0, 1, 2), (0, 1), (0,), ())
PERTURB_MODES = ("random-actions", "masking")


@dataclass(frozen=True)
class Aggregate:
    """Per-seed reports plus a report built from the mean underlying values.

    Building the summary from means keeps its decomposition identity exact.
    """

    mean: GenRegretReport | RegretReport
    std: dict
    per_seed: tuple
    seeds: tuple[int, ...]
    extra: dict

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.to_dict(),
            "std": self.std,
            "per_seed": [r.to_dict() for r in self.per_seed],
            "seeds": list(self.seeds),
            **self.extra,
        }


def _aggregate(reports: Sequence, seeds: Sequence[int], base_fields: Sequence[str], derived: Sequence[str], **extra) -> Aggregate:
    cls = type(reports[0])
    means = {f: float(np.mean([getattr(r, f) for r in reports])) for f in base_fields}
    keep = {f.name: getattr(reports[0], f.name) for f in fields(cls) if f.init and f.name not in base_fields}
    mean_report = cls(**means, **keep)
    std = {f: float(np.std([getattr(r, f) for r in reports])) for f in (*base_fields, *derived)}
    return Aggregate(mean_report, std, tuple(reports), tuple(seeds), extra)


def _gen_fields():
    return ("v_fresh", "v_intermediary", "v_transferred", "v_train"), ("gr_rec", "gr_dec", "gr", "ge")


def _regret_fields():
    return ("v_star", "v_best_given_rho", "v_pair"), ("r_rec", "r_dec", "r_total")


def _map(fn: Callable, args: list, jobs: int) -> list:
    """Run ``fn`` over ``args``; results come back in argument order regardless of ``jobs``."""
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args))


def _seeds(n_seeds: int, seed_base: int) -> list[int]:
    if n_seeds < 1:
        raise InputError(f"need at least one seed, got {n_seeds}")
    return [seed_base + i for i in range(n_seeds)]


def _gen_one(args) -> GenRegretReport:
    train, test, rec, hyper, seed = args
    ev = hyper.eval_episodes
    fresh = train_tabular(test, recognition=Recognition(), hyper=hyper, seed=seed)
    v_fresh = evaluate(test, fresh, episodes=ev, seed=seed).mean
    inter = train_tabular(test, recognition=rec, hyper=hyper, seed=seed)
    v_int = evaluate(test, inter, episodes=ev, seed=seed).mean
    table = train_tabular(train, recognition=rec, hyper=hyper, seed=seed)
    v_train = evaluate(train, table, episodes=ev, seed=seed).mean
    v_transferred = evaluate(test, table, episodes=ev, seed=seed).mean
    return GenRegretReport(
        v_fresh=v_fresh, v_intermediary=v_int, v_transferred=v_transferred, v_train=v_train,
        start="uniform-config", intermediary_start="uniform-config", exact=False,
        tolerance=0.0,
    )


def empirical_generalization_decompose(
    train: Sequence[MazeConfig] | None = None,
    test: Sequence[MazeConfig] | None = None,
    filter: PreFilter | str = PreFilter.IDENTITY,
    hyper: LearnerConfig = LearnerConfig(),
    n_seeds: int = DEFAULT_SEEDS,
    seed_base: int = 0,
    recognition: Recognition | None = None,
    jobs: int = 1,
) -> Aggregate:
    """Generalization regret of a tabular learner, split per seed.

    Fresh: an identity-filter learner trained on the test configs.
    Intermediary: the same recognition with its decision table trained on the
    test configs.  Transferred: the train-config table evaluated on test.
    All three learners of a seed consume the same random stream.
    """
    train = list(train or train_configs())
    test = list(test or test_configs())
    rec = recognition if recognition is not None else Recognition(PreFilter.parse(filter))
    seeds = _seeds(n_seeds, seed_base)
    reports = _map(_gen_one, [(train, test, rec, hyper, s) for s in seeds], jobs)
    base, derived = _gen_fields()
    train_regret = [1.0 - r.v_train for r in reports]
    return _aggregate(
        reports, seeds, base, derived,
        recognition=rec.to_dict(),
        train_regret={"mean": float(np.mean(train_regret)), "std": float(np.std(train_regret))},
    )


def _perturb_one(args) -> RegretReport:
    mode, p, configs, filt, hyper, seed = args
    ev = hyper.eval_episodes
    base = Recognition(filt)
    if mode == "random-actions":
        # the pair is trained and run with forced random actions; recognition is
        # untouched, so the best decision table is retrained without them
        pair = train_tabular(configs, recognition=base, p_force=p, hyper=hyper, seed=seed)
        v_pair = evaluate(configs, pair, p_force=p, episodes=ev, seed=seed).mean
        best = train_tabular(configs, recognition=base, hyper=hyper, seed=seed)
        v_best = evaluate(configs, best, episodes=ev, seed=seed).mean
    else:
        # a clean table meets masked observations through its frozen vocabulary;
        # the best decision table is retrained on the same masked tokens
        masked = Recognition(filt, mask_p=p, mask_region=WALL_COLUMN_REGION)
        pair = train_tabular(configs, recognition=base, hyper=hyper, seed=seed)
        v_pair = evaluate(configs, pair, recognition=masked, vocab="nearest", episodes=ev, seed=seed).mean
        best = train_tabular(
            configs, recognition=masked, hyper=hyper, seed=seed, table=pair.frozen_copy(), vocab="nearest"
        )
        v_best = evaluate(configs, best, recognition=masked, vocab="nearest", episodes=ev, seed=seed).mean
    return RegretReport(
        v_star=1.0, v_best_given_rho=v_best, v_pair=v_pair, start="uniform-config",
        best_given_rho_kind="retrained decision table", tolerance=0.0,
    )


def perturbation_sweep(
    mode: str,
    p_values: Sequence[float] = DEFAULT_P_GRID,
    hyper: LearnerConfig = LearnerConfig(),
    n_seeds: int = DEFAULT_SEEDS,
    seed_base: int = 0,
    configs: Sequence[MazeConfig] | None = None,
    filter: PreFilter | str = PreFilter.IDENTITY,
    jobs: int = 1,
) -> list[Aggregate]:
    """One aggregated regret report per ``p``, in ascending ``p`` order."""
    if mode == "mask":
        mode = "masking"
    if mode not in PERTURB_MODES:
        raise InputError(f"unknown perturbation mode {mode!r}; choose from random-actions, masking")
    ps = sorted(float(p) for p in p_values)
    if not ps or ps[0] < 0.0 or ps[-1] > 1.0:
        raise InputError("perturbation probabilities must lie in [0, 1]")
    configs = list(configs or train_configs())
    filt = PreFilter.parse(filter)
    seeds = _seeds(n_seeds, seed_base)
    args = [(mode, p, configs, filt, hyper, s) for p in ps for s in seeds]
    flat = _map(_perturb_one, args, jobs)
    base, derived = _regret_fields()
    out = []
    for i, p in enumerate(ps):
        chunk = flat[i * len(seeds):(i + 1) * len(seeds)]
        out.append(_aggregate(chunk, seeds, base, derived, mode=mode, p=p))
    return out


def coarsening_sweep(
    filter: PreFilter | str = PreFilter.IDENTITY,
    levels: Sequence[Sequence[int]] = DEFAULT_LEVELS,
    hyper: LearnerConfig = LearnerConfig(),
    n_seeds: int = DEFAULT_SEEDS,
    seed_base: int = 0,
    jobs: int = 1,
) -> list[Aggregate]:
    """Generalization split with progressively fewer observation channels."""
    filt = PreFilter.parse(filter)
    levels = [tuple(lv) for lv in levels]
    for a, b in zip(levels, levels[1:]):
        if not set(b) <= set(a):
            raise InputError("coarsening levels must go from full to coarsest (each a subset of the previous)")
    out = []
    for lv in levels:
        rec = Recognition(filt, channels=lv)
        agg = empirical_generalization_decompose(
            filter=filt, hyper=hyper, n_seeds=n_seeds, seed_base=seed_base, recognition=rec, jobs=jobs
        )
        out.append(replace(agg, extra={**agg.extra, "channels": list(lv)}))
    return out


def open_loop_bound(configs: Sequence[MazeConfig] | None = None) -> float:
    """Best mean normalized return of a single fixed action sequence over ``configs``.

    Exhaustive dynamic programming over the joint state of all configs; a
    policy that sees one constant token can do no better.
    """
    configs = list(configs or train_configs())
    horizon = configs[0].step_limit
    gamma = configs[0].gamma
    v_star = [optimal_maze_value(c) for c in configs]
    weight = [1.0 / (len(configs) * v) for v in v_star]
    # joint state -> best accumulated value; None marks a config already solved
    frontier: dict[tuple, float] = {tuple(MazeState(c).core for c in configs): 0.0}
    best = 0.0
    for t in range(horizon):
        nxt_frontier: dict[tuple, float] = {}
        for joint, acc in frontier.items():
            for a in range(N_ACTIONS):
                gain = 0.0
                parts = []
                for i, (cfg, core) in enumerate(zip(configs, joint)):
                    if core is None:
                        parts.append(None)
                        continue
                    nxt, r, at_goal = core_step(cfg, core, a)
                    gain += weight[i] * r * gamma**t
                    parts.append(None if at_goal else nxt)
                key = tuple(parts)
                val = acc + gain
                if val > nxt_frontier.get(key, -1.0):
                    nxt_frontier[key] = val
        frontier = nxt_frontier
        best = max(best, max(frontier.values()))
    return best
