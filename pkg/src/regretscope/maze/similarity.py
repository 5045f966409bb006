"""Distances between the filtered observations met while solving each maze.

Each config contributes the filtered grids along its shortest solving
trajectory.  The default ``"energy"`` form is the energy distance between
the two grid sets (mean cross distance minus the mean within-set
distances), which is zero on the diagonal and zero for any two configs whose
filtered trajectories coincide.  ``"mean"`` is the plain mean cross distance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InputError
from .env import Color, DoorRow, MazeConfig, all_configs, bfs_trajectory, render
from .filters import PreFilter, apply_filter

FORMS = ("energy", "mean")
_COLORS = (Color.RED, Color.GREEN, Color.BLUE, Color.GRAY)


def trajectory_grids(config: MazeConfig, f: PreFilter | str) -> np.ndarray:
    """Filtered grids along the shortest solving trajectory, flattened to float rows."""
    f = PreFilter.parse(f)
    return np.stack([apply_filter(render(s), f).astype(float).ravel() for s in bfs_trajectory(config)])


def _mean_cross(x: np.ndarray, y: np.ndarray) -> float:
    d = np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))
    return float(d.mean())


@dataclass(frozen=True)
class SimilarityMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray
    filter: PreFilter
    form: str
    configs: tuple[MazeConfig, ...]

    def _blocks(self, key) -> tuple[list, np.ndarray]:
        groups: list = []
        for c in self.configs:
            if key(c) not in groups:
                groups.append(key(c))
        idx = [[i for i, c in enumerate(self.configs) if key(c) == g] for g in groups]
        out = np.array([[self.matrix[np.ix_(a, b)].mean() for b in idx] for a in idx])
        return groups, out

    def by_color(self) -> tuple[list[str], np.ndarray]:
        groups, m = self._blocks(lambda c: c.kd_color)
        return [g.name.lower() for g in groups], m

    def by_door(self) -> tuple[list[str], np.ndarray]:
        groups, m = self._blocks(lambda c: c.door_row)
        return [g.name.lower() for g in groups], m

    def to_dict(self) -> dict:
        cl, cm = self.by_color()
        dl, dm = self.by_door()
        return {
            "kind": "similarity",
            "filter": self.filter.value,
            "form": self.form,
            "labels": list(self.labels),
            "matrix": self.matrix.tolist(),
            "by_color": {"labels": cl, "matrix": cm.tolist()},
            "by_door": {"labels": dl, "matrix": dm.tolist()},
        }


def similarity_matrix(
    f: PreFilter | str,
    configs: Sequence[MazeConfig] | None = None,
    form: str = "energy",
) -> SimilarityMatrix:
    """Pairwise trajectory distance over ``configs`` (default: all twelve)."""
    if form not in FORMS:
        raise InputError(f"unknown distance form {form!r}; choose from {', '.join(FORMS)}")
    f = PreFilter.parse(f)
    configs = tuple(configs or all_configs())
    grids = [trajectory_grids(c, f) for c in configs]
    n = len(configs)
    cross = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            cross[i, j] = cross[j, i] = _mean_cross(grids[i], grids[j])
    if form == "mean":
        m = cross
    else:
        self_d = np.diag(cross).copy()
        m = cross - 0.5 * (self_d[:, None] + self_d[None, :])
        np.fill_diagonal(m, 0.0)
        m = np.maximum(m, 0.0)
    return SimilarityMatrix(tuple(c.label for c in configs), m, f, form, configs)


__all__ = ["SimilarityMatrix", "similarity_matrix", "trajectory_grids", "FORMS", "DoorRow"]
