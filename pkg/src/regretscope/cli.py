"""Command-line front end.

Every command is a pure function from a resolved parameter dict to a set of
output files.  With ``--out`` the files are written next to a
``manifest.json`` that records the parameters, seeds and hashes, and
``regretscope replay manifest.json`` re-runs the command and checks that
every file comes out byte-identical.

Exit codes: 0 success, 2 bad input, 3 budget exceeded, 1 anything else.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import __version__
from .errors import BudgetError, InputError, RegretscopeError
from .mdp import ValuationSpec, load_decision, load_env, load_recognition
from .report import csv_text, dump_json, fmt, matrix_csv, pgm_bytes, table
from .solver import DEFAULT_ENUMERATION_BUDGET, best_deterministic_decision, regret_decompose

log = logging.getLogger("regretscope")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3
FILTERS = ("identity", "hidecolors", "hidedoor", "blind", "onehot")


@dataclass
class Outcome:
    text: str
    doc: dict
    files: dict[str, bytes] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    inputs: dict[str, dict] = field(default_factory=dict)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------- argument types

def _unit_open(s: str) -> float:
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {s}")
    return v


def _unit_closed(s: str) -> float:
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {s}")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _levels(s: str) -> list[list[int]]:
    """``"0,1,2;0,1;0;"`` -> ``[[0, 1, 2], [0, 1], [0], []]``."""
    try:
        return [[int(k) for k in part.split(",") if k.strip()] for part in s.split(";")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must look like '0,1,2;0,1;0;', got {s!r}") from None


# ---------------------------------------------------------------- commands

def run_worked_example(params: dict, jobs: int) -> Outcome:
    from .worked import reproduce_worked_tables, worked_rows

    rep = reproduce_worked_tables(params["gamma"], params["delta"], params["pi_mode"], params["test_start"])
    text = table(worked_rows(rep), ["quantity", "value"])
    doc = rep.to_dict()
    return Outcome(text, doc, {"report.json": dump_json(doc).encode(), "report.txt": text.encode()})


def _hashed_input(path: str) -> dict:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return {"path": str(p.resolve()), "sha256": _sha256(data)}


def run_solve(params: dict, jobs: int) -> Outcome:
    inputs = {k: _hashed_input(params[k]) for k in ("env", "rho", "pi")}
    env = load_env(params["env"])
    rho = load_recognition(params["rho"])
    pi = load_decision(params["pi"])
    spec = ValuationSpec(params["gamma"])
    start = params["start"]
    if start is not None and not 0 <= start < env.n_states:
        raise InputError(f"start state {start} outside 0..{env.n_states - 1}")
    pi_best, v_best = best_deterministic_decision(env, rho, spec, start, params["budget"])
    rep = regret_decompose(env, rho, pi, spec, start, v_best_given_rho=v_best)
    doc = {**rep.to_dict(), "best_given_rho_kind": "deterministic maximizer", "best_pi": list(pi_best.action_table())}
    rows = [
        ("V*", rep.v_star),
        ("max_pi V(rho, pi) [deterministic maximizer]", rep.v_best_given_rho),
        ("V(rho, pi)", rep.v_pair),
        ("R^rec", rep.r_rec),
        ("R^dec", rep.r_dec),
        ("R", rep.r_total),
        ("best pi action table", " ".join(str(a) for a in pi_best.action_table())),
        ("start", rep.start),
        ("V* is an upper bound", "yes" if rep.v_star_is_upper_bound else "no"),
    ]
    text = table(rows, ["quantity", "value"])
    return Outcome(text, doc, {"report.json": dump_json(doc).encode(), "report.txt": text.encode()}, inputs=inputs)


def _hyper(params: dict):
    from .maze.learner import LearnerConfig

    return LearnerConfig(episodes=params["episodes"], eval_episodes=params["eval_episodes"])


def _seed_list(params: dict) -> list[int]:
    return [params["seed_base"] + i for i in range(params["seeds"])]


def run_maze_run(params: dict, jobs: int) -> Outcome:
    from .maze.experiments import empirical_generalization_decompose

    hyper = _hyper(params)
    agg = empirical_generalization_decompose(
        filter=params["filter"], hyper=hyper, n_seeds=params["seeds"], seed_base=params["seed_base"], jobs=jobs
    )
    m, sd = agg.mean, agg.std
    tr = agg.extra["train_regret"]
    rows = [
        ("train regret", tr["mean"], tr["std"]),
        ("GR", m.gr, sd["gr"]),
        ("GR^rec", m.gr_rec, sd["gr_rec"]),
        ("GR^dec", m.gr_dec, sd["gr_dec"]),
        ("GE", m.ge, sd["ge"]),
        ("V fresh", m.v_fresh, sd["v_fresh"]),
        ("V intermediary", m.v_intermediary, sd["v_intermediary"]),
        ("V transferred", m.v_transferred, sd["v_transferred"]),
        ("V train", m.v_train, sd["v_train"]),
    ]
    text = f"filter {params['filter']}, {params['seeds']} seeds\n" + table(rows, ["quantity", "mean", "std"])
    doc = {"kind": "maze-generalization", "filter": params["filter"], "hyper": hyper.to_dict(), "aggregate": agg.to_dict()}
    cols = ["v_fresh", "v_intermediary", "v_transferred", "v_train", "gr", "gr_rec", "gr_dec", "ge"]
    csv_rows = [[s, *[getattr(r, c) for c in cols]] for s, r in zip(agg.seeds, agg.per_seed)]
    csv_rows.append(["mean", *[getattr(m, c) for c in cols]])
    files = {
        "report.json": dump_json(doc).encode(),
        "report.txt": text.encode(),
        "seeds.csv": csv_text(["seed", *cols], csv_rows).encode(),
    }
    return Outcome(text, doc, files, seeds=list(agg.seeds))


def run_maze_perturb(params: dict, jobs: int) -> Outcome:
    from .maze.experiments import perturbation_sweep

    hyper = _hyper(params)
    sweep = perturbation_sweep(
        params["mode"], params["p"], hyper, params["seeds"], params["seed_base"], filter=params["filter"], jobs=jobs
    )
    rows, csv_rows = [], []
    for agg in sweep:
        m, sd = agg.mean, agg.std
        rows.append((fmt(agg.extra["p"]), m.r_total, m.r_rec, m.r_dec, sd["r_total"]))
        csv_rows.append([agg.extra["p"], m.v_best_given_rho, m.v_pair, m.r_total, m.r_rec, m.r_dec, sd["r_total"]])
    text = f"perturbation {params['mode']}, filter {params['filter']}, {params['seeds']} seeds\n" + table(
        rows, ["p", "R", "R^rec", "R^dec", "std R"]
    )
    doc = {
        "kind": "perturbation-sweep",
        "mode": sweep[0].extra["mode"],
        "filter": params["filter"],
        "hyper": hyper.to_dict(),
        "reports": [a.to_dict() for a in sweep],
    }
    header = ["p", "v_best_given_rho", "v_pair", "r_total", "r_rec", "r_dec", "std_r_total"]
    files = {
        "report.json": dump_json(doc).encode(),
        "report.txt": text.encode(),
        "sweep.csv": csv_text(header, csv_rows).encode(),
    }
    return Outcome(text, doc, files, seeds=_seed_list(params))


def run_maze_similarity(params: dict, jobs: int) -> Outcome:
    from .maze.similarity import similarity_matrix

    sim = similarity_matrix(params["filter"], form=params["form"])
    cl, cm = sim.by_color()
    dl, dm = sim.by_door()
    parts = [f"similarity ({sim.form} distance), filter {params['filter']}"]
    for title, labels, mat in (("by config", sim.labels, sim.matrix), ("by color", cl, cm), ("by door", dl, dm)):
        parts.append(title)
        parts.append(table([[lab, *row] for lab, row in zip(labels, mat)], ["", *labels]).rstrip("\n"))
    text = "\n".join(parts) + "\n"
    doc = sim.to_dict()
    files = {
        "report.json": dump_json(doc).encode(),
        "report.txt": text.encode(),
        "similarity.csv": matrix_csv(sim.labels, sim.matrix).encode(),
        "by_color.csv": matrix_csv(cl, cm).encode(),
        "by_door.csv": matrix_csv(dl, dm).encode(),
        "similarity.pgm": pgm_bytes(sim.matrix),
        "by_color.pgm": pgm_bytes(cm),
        "by_door.pgm": pgm_bytes(dm),
    }
    return Outcome(text, doc, files)


def run_maze_coarsen(params: dict, jobs: int) -> Outcome:
    from .maze.experiments import coarsening_sweep

    hyper = _hyper(params)
    levels = [tuple(lv) for lv in params["levels"]]
    sweep = coarsening_sweep(params["filter"], levels, hyper, params["seeds"], params["seed_base"], jobs=jobs)
    rows, csv_rows = [], []
    for agg in sweep:
        m = agg.mean
        name = ",".join(str(k) for k in agg.extra["channels"]) or "-"
        rows.append((name, agg.extra["train_regret"]["mean"], m.gr, m.gr_rec, m.gr_dec))
        csv_rows.append([name, agg.extra["train_regret"]["mean"], m.gr, m.gr_rec, m.gr_dec, m.ge])
    text = f"coarsening, filter {params['filter']}, {params['seeds']} seeds\n" + table(
        rows, ["channels", "train regret", "GR", "GR^rec", "GR^dec"]
    )
    doc = {
        "kind": "coarsening-sweep",
        "filter": params["filter"],
        "hyper": hyper.to_dict(),
        "reports": [a.to_dict() for a in sweep],
    }
    files = {
        "report.json": dump_json(doc).encode(),
        "report.txt": text.encode(),
        "coarsen.csv": csv_text(["channels", "train_regret", "gr", "gr_rec", "gr_dec", "ge"], csv_rows).encode(),
    }
    return Outcome(text, doc, files, seeds=_seed_list(params))


COMMANDS: dict[str, Callable[[dict, int], Outcome]] = {
    "worked-example": run_worked_example,
    "solve": run_solve,
    "maze run": run_maze_run,
    "maze perturb": run_maze_perturb,
    "maze similarity": run_maze_similarity,
    "maze coarsen": run_maze_coarsen,
}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(q, suppress: bool):
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        q.add_argument("--out", default=d(None), help="directory for report files and manifest.json")
        q.add_argument("--format", choices=("text", "json"), default=d("text"), help="stdout format")
        q.add_argument("--jobs", type=_positive, default=d(1), help="worker processes for independent seeds")
        q.add_argument("--seed-base", type=int, default=d(0), help="first seed; seed i is seed-base + i")

    # subcommands repeat the global flags without defaults so that a flag
    # given before the subcommand is not reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="regretscope", description=__doc__.split("\n\n")[0])
    global_flags(p, suppress=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("worked-example", parents=[common], help="reproduce the three-state digit examples")
    w.add_argument("--gamma", type=_unit_open, default=0.9)
    w.add_argument("--delta", type=_unit_closed, default=0.1)
    w.add_argument("--pi-mode", choices=("paper", "exact"), default="paper")
    w.add_argument("--test-start", type=int, choices=(0, 1, 2), default=1)

    s = sub.add_parser("solve", parents=[common], help="regret decomposition for JSON env/rho/pi files")
    s.add_argument("env")
    s.add_argument("rho")
    s.add_argument("pi")
    s.add_argument("--gamma", type=_unit_open, default=0.9)
    s.add_argument("--start", type=int, default=None, help="fixed start state instead of sigma")
    s.add_argument("--budget", type=_positive, default=DEFAULT_ENUMERATION_BUDGET)

    m = sub.add_parser("maze", help="key-door maze experiments")
    msub = m.add_subparsers(dest="maze_command", required=True)

    def learner_flags(q, seeds=5):
        q.add_argument("--seeds", type=_positive, default=seeds)
        q.add_argument("--episodes", type=_positive, default=20_000)
        q.add_argument("--eval-episodes", type=_positive, default=100, help="evaluation episodes per config")

    r = msub.add_parser("run", parents=[common], help="empirical generalization-regret split")
    r.add_argument("--filter", choices=FILTERS, default="identity")
    learner_flags(r)

    pt = msub.add_parser("perturb", parents=[common], help="random-action or masking sweep")
    pt.add_argument("--mode", choices=("random-actions", "mask", "masking"), default="random-actions")
    pt.add_argument("--p", type=_unit_closed, nargs="+", default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    pt.add_argument("--filter", choices=FILTERS, default="identity")
    learner_flags(pt)

    sm = msub.add_parser("similarity", parents=[common], help="trajectory distance matrices")
    sm.add_argument("--filter", choices=FILTERS, default="identity")
    sm.add_argument("--form", choices=("energy", "mean"), default="energy")

    c = msub.add_parser("coarsen", parents=[common], help="channel-coarsening sweep")
    c.add_argument("--filter", choices=FILTERS, default="identity")
    c.add_argument("--levels", type=_levels, default=[[0, 1, 2], [0, 1], [0], []])
    learner_flags(c)

    rp = sub.add_parser("replay", parents=[common], help="re-run a manifest and compare outputs byte for byte")
    rp.add_argument("manifest")
    return p


_GLOBAL = ("out", "format", "jobs", "command", "maze_command")


def _params(args: argparse.Namespace) -> tuple[str, dict]:
    name = args.command if args.command != "maze" else f"maze {args.maze_command}"
    params = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
    if name == "maze perturb" and params["mode"] == "mask":
        params["mode"] = "masking"
    if name == "maze perturb":
        params["p"] = sorted(params["p"])
    if name == "solve":
        params = {**params, **{k: str(Path(params[k]).resolve()) for k in ("env", "rho", "pi")}}
    return name, params


# ---------------------------------------------------------------- output

def _manifest(name: str, params: dict, outcome: Outcome) -> dict:
    return {
        "tool": "regretscope",
        "version": __version__,
        "subcommand": name,
        "params": params,
        "seeds": outcome.seeds,
        "inputs": outcome.inputs,
        "outputs": {fn: _sha256(data) for fn, data in sorted(outcome.files.items())},
    }


def _write(out: Path, name: str, params: dict, outcome: Outcome) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    for fn, data in sorted(outcome.files.items()):
        (out / fn).write_bytes(data)
    path = out / "manifest.json"
    path.write_text(dump_json(_manifest(name, params, outcome)))
    log.info("wrote %d files and manifest to %s", len(outcome.files), out)
    return path


def _replay(manifest_path: str, out: str | None, jobs: int) -> tuple[int, str]:
    try:
        doc = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {manifest_path}: {exc}") from None
    for key in ("subcommand", "params", "outputs"):
        if key not in doc:
            raise InputError(f"manifest lacks '{key}'")
    name = doc["subcommand"]
    if name not in COMMANDS:
        raise InputError(f"manifest names unknown subcommand {name!r}")
    for label, info in doc.get("inputs", {}).items():
        if _hashed_input(info["path"])["sha256"] != info["sha256"]:
            raise InputError(f"input '{label}' at {info['path']} changed since the manifest was written")
    outcome = COMMANDS[name](doc["params"], jobs)
    got = {fn: _sha256(data) for fn, data in outcome.files.items()}
    want = doc["outputs"]
    bad = sorted(fn for fn in set(want) | set(got) if want.get(fn) != got.get(fn))
    if out is not None:
        _write(Path(out), name, doc["params"], outcome)
    if bad:
        return EXIT_INTERNAL, "replay mismatch: " + ", ".join(bad) + "\n"
    return EXIT_OK, f"replay OK: {len(want)} files byte-identical ({name})\n"


def _configure_logging() -> None:
    level = os.environ.get("REGRETSCOPE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            code, msg = _replay(args.manifest, args.out, args.jobs)
            (sys.stdout if code == EXIT_OK else sys.stderr).write(msg)
            return code
        name, params = _params(args)
        out = args.out
        if out is None and name.startswith("maze"):
            out = str(Path("runs") / name.replace(" ", "-"))
        outcome = COMMANDS[name](params, args.jobs)
        if args.format == "json":
            sys.stdout.write(dump_json(outcome.doc))
        else:
            sys.stdout.write(outcome.text)
        if out is not None:
            _write(Path(out), name, params, outcome)
        return EXIT_OK
    except InputError as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_INPUT
    except BudgetError as exc:
        sys.stderr.write(f"{parser.prog}: budget exceeded: {exc}\n")
        return EXIT_BUDGET
    except RegretscopeError as exc:
        sys.stderr.write(f"{parser.prog}: internal error: {exc}\n")
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-failure exit code
        log.debug("unhandled exception", exc_info=True)
        sys.stderr.write(f"{parser.prog}: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
