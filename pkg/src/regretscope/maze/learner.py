"""Tabular Q-learning over fingerprinted maze observations.

Every maze is compiled once into dense arrays (transition, reward and a token
per state and mask pattern) and all randomness is drawn up front, so the hot
loops in ``regretscope.kernels`` see nothing but integer and float arrays.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError
from ..mdp import DecisionPolicy
from .. import kernels
from .env import N_ACTIONS, N_CHANNELS, MazeConfig, MazeState, core_step, optimal_maze_value, reachable_cores, render
from .filters import WALL_COLUMN_REGION, PreFilter, apply_filter, coarsen, region_entries
from .tokens import DEFAULT_MAX_TOKENS, TokenTable

MAX_MASK_ENTRIES = 16
_CHUNK = 4096


@dataclass(frozen=True)
class LearnerConfig:
    episodes: int = 20_000
    alpha: float = 0.2
    eps_start: float = 1.0
    eps_end: float = 0.05
    decay_fraction: float = 0.8
    eval_episodes: int = 100  # per config
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.episodes < 1:
            raise InputError(f"episodes must be >= 1, got {self.episodes}")
        if self.eval_episodes < 1:
            raise InputError(f"eval_episodes must be >= 1, got {self.eval_episodes}")
        if not 0.0 < self.alpha <= 1.0:
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")
        for name in ("eps_start", "eps_end", "decay_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {v}")

    def epsilon_schedule(self) -> np.ndarray:
        """Linear decay over the first ``decay_fraction`` of episodes, then flat."""
        n_decay = max(1, int(round(self.decay_fraction * self.episodes)))
        frac = np.minimum(np.arange(self.episodes) / n_decay, 1.0)
        return self.eps_start + (self.eps_end - self.eps_start) * frac

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Recognition:
    """Tabular recognition: pre-filter, optional channel subset, optional mask."""

    filter: PreFilter = PreFilter.IDENTITY
    channels: tuple[int, ...] | None = None
    mask_p: float = 0.0
    mask_region: tuple[tuple[int, int], ...] = WALL_COLUMN_REGION

    def __post_init__(self):
        object.__setattr__(self, "filter", PreFilter.parse(self.filter))
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(int(k) for k in self.channels))
        if not 0.0 <= self.mask_p <= 1.0:
            raise InputError(f"mask probability must lie in [0, 1], got {self.mask_p}")
        region = tuple((int(r), int(c)) for r, c in self.mask_region)
        object.__setattr__(self, "mask_region", region)
        if self.mask_p > 0 and len(region_entries(region, N_CHANNELS)) > MAX_MASK_ENTRIES:
            raise InputError(
                f"mask region has more than {MAX_MASK_ENTRIES} channel entries; use a smaller region"
            )

    def grid(self, obs: np.ndarray) -> np.ndarray:
        return coarsen(apply_filter(obs, self.filter), self.channels)

    @property
    def n_entries(self) -> int:
        return len(region_entries(self.mask_region, N_CHANNELS)) if self.mask_p > 0 else 0

    def to_dict(self) -> dict:
        return {
            "filter": self.filter.value,
            "channels": None if self.channels is None else list(self.channels),
            "mask_p": self.mask_p,
            "mask_region": [list(c) for c in self.mask_region],
        }


@dataclass
class CompiledMazes:
    configs: list[MazeConfig]
    states: list[tuple[int, tuple]]  # (config index, core)
    next_state: np.ndarray  # int32 [n, A], -1 = goal reached
    reward: np.ndarray  # float64 [n, A]
    start: np.ndarray  # int32 [n_configs]
    tokens: np.ndarray  # int32 [n, patterns], -1 = unknown token
    v_star: np.ndarray  # float64 [n_configs]
    horizon: int
    gamma: float
    n_entries: int = 0
    meta: dict = field(default_factory=dict)


def _shared(configs: Sequence[MazeConfig], attr: str):
    vals = {getattr(c, attr) for c in configs}
    if len(vals) != 1:
        raise InputError(f"all configs must share {attr}, got {sorted(vals)}")
    return vals.pop()


def compile_mazes(
    configs: Sequence[MazeConfig],
    recognition: Recognition,
    table: TokenTable,
    vocab: str = "open",
) -> CompiledMazes:
    """Enumerate reachable states of ``configs`` and tokenize their observations.

    ``vocab`` decides how grids become tokens: ``"open"`` adds new grids to
    ``table``, ``"lookup"`` maps unknown grids to -1, ``"nearest"`` maps them
    to the closest known grid.
    """
    if not configs:
        raise InputError("need at least one maze config")
    if vocab not in ("open", "lookup", "nearest"):
        raise InputError(f"unknown vocabulary mode {vocab!r}")
    configs = list(configs)
    horizon = _shared(configs, "step_limit")
    gamma = _shared(configs, "gamma")
    index: dict[tuple[int, tuple], int] = {}
    states: list[tuple[int, tuple]] = []
    for ci, cfg in enumerate(configs):
        for core in reachable_cores(cfg):
            index[(ci, core)] = len(states)
            states.append((ci, core))
    n = len(states)
    next_state = np.empty((n, N_ACTIONS), dtype=np.int32)
    reward = np.zeros((n, N_ACTIONS))
    for i, (ci, core) in enumerate(states):
        for a in range(N_ACTIONS):
            nxt, r, at_goal = core_step(configs[ci], core, a)
            next_state[i, a] = -1 if at_goal else index[(ci, nxt)]
            reward[i, a] = r
    start = np.array([index[(ci, MazeState(cfg).core)] for ci, cfg in enumerate(configs)], dtype=np.int32)

    def tokenize(grid: np.ndarray) -> int:
        if vocab == "open":
            return table.add(grid)
        if vocab == "lookup":
            return table.lookup(grid)
        return table.nearest(grid)

    k = recognition.n_entries
    entries = region_entries(recognition.mask_region, N_CHANNELS) if k else []
    tokens = np.empty((n, 1 << k), dtype=np.int32)
    for i, (ci, core) in enumerate(states):
        agent, carrying, door_open = core
        obs = render(MazeState(configs[ci], agent, carrying, door_open))
        if not k:
            tokens[i, 0] = tokenize(recognition.grid(obs))
            continue
        # only nonzero entries can change under masking
        live = [b for b, e in enumerate(entries) if obs[e] != 0]
        live_bits = sum(1 << b for b in live)
        cache: dict[int, int] = {}
        for pat in range(1 << k):
            key = pat & live_bits
            tok = cache.get(key)
            if tok is None:
                masked = obs.copy()
                for b in live:
                    if key >> b & 1:
                        masked[entries[b]] = 0
                tok = cache[key] = tokenize(recognition.grid(masked))
            tokens[i, pat] = tok
    v_star = np.array([optimal_maze_value(c) for c in configs])
    return CompiledMazes(configs, states, next_state, reward, start, tokens, v_star, horizon, gamma, k)


def _draw_patterns(rng: np.random.Generator, n_ep: int, length: int, k: int, p: float) -> np.ndarray:
    if k == 0:
        return np.zeros((n_ep, length), dtype=np.int32)
    weights = (1 << np.arange(k)).astype(np.int32)
    out = np.empty((n_ep, length), dtype=np.int32)
    for lo in range(0, n_ep, _CHUNK):
        hi = min(n_ep, lo + _CHUNK)
        hits = rng.random((hi - lo, length, k)) < p
        out[lo:hi] = hits.astype(np.int32) @ weights
    return out


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def _kernel_pair(backend: str | None):
    if backend is None:
        return kernels.q_learn, kernels.rollout_returns
    return kernels.backend(backend)


def train_tabular(
    configs: Sequence[MazeConfig],
    filter: PreFilter | str = PreFilter.IDENTITY,
    *,
    recognition: Recognition | None = None,
    p_force: float = 0.0,
    hyper: LearnerConfig = LearnerConfig(),
    seed: int = 0,
    table: TokenTable | None = None,
    vocab: str = "open",
    backend: str | None = None,
) -> TokenTable:
    """Q-learning with configs sampled uniformly per episode.

    ``p_force`` is the probability of a forced uniform action at every step.
    Passing a ``table`` with ``vocab="nearest"`` retrains action values on a
    frozen vocabulary.
    """
    if not 0.0 <= p_force <= 1.0:
        raise InputError(f"forced-action probability must lie in [0, 1], got {p_force}")
    rec = recognition if recognition is not None else Recognition(PreFilter.parse(filter))
    if table is None:
        table = TokenTable(N_ACTIONS, hyper.max_tokens)
    comp = compile_mazes(configs, rec, table, vocab)
    table.reset_values()
    table.recognition = rec
    rng = _rng(seed, 0)
    n_ep, horizon = hyper.episodes, comp.horizon
    ep_config = rng.integers(0, len(comp.configs), size=n_ep).astype(np.int32)
    r_eps = rng.random((n_ep, horizon))
    r_act = rng.integers(0, N_ACTIONS, size=(n_ep, horizon), dtype=np.int8)
    r_force = rng.random((n_ep, horizon))
    patterns = _draw_patterns(rng, n_ep, horizon + 1, comp.n_entries, rec.mask_p)
    q_learn, _ = _kernel_pair(backend)
    q_learn(
        table.q, comp.next_state, comp.reward, comp.tokens, comp.start, ep_config,
        hyper.epsilon_schedule(), r_eps, r_act, r_force, patterns,
        float(p_force), float(hyper.alpha), float(comp.gamma), int(horizon),
    )
    return table


@dataclass(frozen=True)
class EvalResult:
    mean: float
    std: float
    per_config: tuple[float, ...]
    episodes: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    configs: Sequence[MazeConfig],
    table: TokenTable,
    *,
    recognition: Recognition | None = None,
    p_force: float = 0.0,
    episodes: int = 100,
    seed: int = 0,
    vocab: str = "lookup",
    backend: str | None = None,
) -> EvalResult:
    """Mean normalized return over ``episodes`` rollouts per config.

    Actions are greedy in the table except for forced uniform actions
    (probability ``p_force``) and unknown tokens, which act uniformly.
    """
    if episodes < 1:
        raise InputError(f"episodes must be >= 1, got {episodes}")
    rec = recognition if recognition is not None else table.recognition
    if rec is None:
        raise InputError("table carries no recognition; pass one explicitly")
    comp = compile_mazes(configs, rec, table, vocab)
    if table.q.shape[0] < table.n_tokens:
        raise InputError("evaluation vocabulary grew past the trained table")
    rng = _rng(seed, 1)
    n_cfg, horizon = len(comp.configs), comp.horizon
    ep_config = np.repeat(np.arange(n_cfg, dtype=np.int32), episodes)
    n_ep = ep_config.shape[0]
    r_act = rng.integers(0, N_ACTIONS, size=(n_ep, horizon), dtype=np.int8)
    r_force = rng.random((n_ep, horizon))
    patterns = _draw_patterns(rng, n_ep, horizon, comp.n_entries, rec.mask_p)
    out = np.zeros(n_ep)
    _, rollout = _kernel_pair(backend)
    rollout(
        np.ascontiguousarray(table.q), comp.next_state, comp.reward, comp.tokens, comp.start, ep_config,
        r_act, r_force, patterns, float(p_force), float(comp.gamma), int(horizon), out,
    )
    norm = out / comp.v_star[ep_config]
    per_config = tuple(float(norm[ep_config == i].mean()) for i in range(n_cfg))
    return EvalResult(float(norm.mean()), float(norm.std()), per_config, n_ep)


def mixture_policy(pi: DecisionPolicy, p: float) -> DecisionPolicy:
    """Take a forced uniform action with probability ``p``, otherwise follow ``pi``."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"mixture probability must lie in [0, 1], got {p}")
    k = (1.0 - p) * pi.kernel + p / pi.kernel.shape[1]
    return DecisionPolicy(k, variant="mixture", params=(("p", p), ("base", pi.variant)))


def greedy_decision(table: TokenTable) -> DecisionPolicy:
    """The table's greedy action per token as a deterministic decision policy."""
    return DecisionPolicy.deterministic(table.greedy_actions().tolist(), table.n_actions, variant="tabular")
