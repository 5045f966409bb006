"""Time the compiled and pure-Python kernels on the maze learner.

Both backends consume the same pre-drawn random streams, so the script also
checks that they return identical tables and returns before reporting times.

    python benchmarks/bench_kernels.py [--episodes 20000] [--repeats 3]
"""
import argparse
import time

import numpy as np

from regretscope.maze.env import test_configs as gray_configs
from regretscope.maze.env import train_configs
from regretscope.maze.learner import LearnerConfig, evaluate, train_tabular


def best_of(repeats, fn):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=20_000)
    ap.add_argument("--eval-episodes", type=int, default=2_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    hyper = LearnerConfig(episodes=args.episodes)

    rows, results = [], {}
    for name in ("python", "cython"):
        t_train, table = best_of(
            args.repeats, lambda: train_tabular(train_configs(), "identity", hyper=hyper, seed=0, backend=name)
        )
        t_eval, ev = best_of(
            args.repeats,
            lambda: evaluate(gray_configs(), table, episodes=args.eval_episodes, seed=0, p_force=0.2, backend=name),
        )
        results[name] = (table.q.copy(), ev.mean)
        rows.append((name, t_train, t_eval))

    same = np.array_equal(results["python"][0], results["cython"][0]) and results["python"][1] == results["cython"][1]
    print(f"train: {args.episodes} episodes, 3 configs; evaluate: {args.eval_episodes} episodes per config, p_force 0.2")
    print(f"{'backend':<8} {'train s':>9} {'eval s':>9}")
    for name, tt, te in rows:
        print(f"{name:<8} {tt:>9.3f} {te:>9.3f}")
    (_, pt, pe), (_, ct, ce) = rows
    print(f"speedup  {pt / ct:>8.1f}x {pe / ce:>8.1f}x")
    print("outputs identical:", "yes" if same else "NO")


if __name__ == "__main__":
    main()
