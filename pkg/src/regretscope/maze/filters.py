"""Pre-filters, per-entry masking and channel coarsening of maze grids."""
from __future__ import annotations

from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from ..errors import InputError
from .env import COLOR, HEIGHT, INTERIOR_ROWS, N_COLORS, STATE, TYPE, WALL_COL, WIDTH, Color, DOOR_LOCKED, ObjType

WALL_COLUMN_REGION = tuple((r, WALL_COL) for r in INTERIOR_ROWS)


class PreFilter(str, Enum):
    IDENTITY = "identity"
    HIDE_COLORS = "hidecolors"
    HIDE_DOOR = "hidedoor"
    BLIND = "blind"
    ONEHOT = "onehot"

    @classmethod
    def parse(cls, name: "str | PreFilter") -> "PreFilter":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            choices = ", ".join(f.value for f in cls)
            raise InputError(f"unknown filter {name!r}; choose from {choices}") from None


def apply_filter(obs: np.ndarray, f: PreFilter | str) -> np.ndarray:
    """Deterministic per-observation transform; never modifies ``obs``."""
    f = PreFilter.parse(f)
    if f is PreFilter.IDENTITY:
        return obs.copy()
    if f is PreFilter.BLIND:
        return np.zeros_like(obs)
    if f is PreFilter.ONEHOT:
        combined = obs[..., TYPE].astype(np.uint8) * N_COLORS + obs[..., COLOR]
        return combined[..., None]
    out = obs.copy()
    if f is PreFilter.HIDE_COLORS:
        colored = np.isin(out[..., TYPE], (ObjType.KEY, ObjType.DOOR))
        out[..., COLOR][colored] = Color.GRAY
        return out
    # HIDE_DOOR: every wall candidate in the parting column becomes a locked
    # door in the color of the visible door.  If the agent stands in the
    # doorway no door is visible and the grid is left alone.
    doors = [cell for cell in WALL_COLUMN_REGION if out[cell][TYPE] == ObjType.DOOR]
    if not doors:
        return out
    color = out[doors[0]][COLOR]
    for cell in WALL_COLUMN_REGION:
        if out[cell][TYPE] == ObjType.WALL:
            out[cell] = (ObjType.DOOR, DOOR_LOCKED, color)
    return out


def region_entries(region: Iterable[tuple[int, int]], n_channels: int) -> list[tuple[int, int, int]]:
    cells = list(region)
    if not cells:
        raise InputError("mask region must be nonempty")
    for r, c in cells:
        if not (0 <= r < HEIGHT and 0 <= c < WIDTH):
            raise InputError(f"mask cell {(r, c)} outside the {HEIGHT}x{WIDTH} lattice")
    return [(r, c, k) for r, c in cells for k in range(n_channels)]


def apply_mask(
    grid: np.ndarray,
    p: float,
    region: Iterable[tuple[int, int]] = WALL_COLUMN_REGION,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Zero each channel entry of ``region`` independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"mask probability must lie in [0, 1], got {p}")
    entries = region_entries(region, grid.shape[2])
    rng = np.random.default_rng(rng)
    hit = rng.random(len(entries)) < p
    out = grid.copy()
    for (r, c, k), h in zip(entries, hit):
        if h:
            out[r, c, k] = 0
    return out


def coarsen(grid: np.ndarray, channels: Sequence[int] | None) -> np.ndarray:
    """Keep only ``channels``; ``None`` keeps everything, ``()`` yields an empty grid."""
    if channels is None:
        return grid
    channels = tuple(channels)
    for k in channels:
        if not 0 <= k < grid.shape[2]:
            raise InputError(f"channel {k} not present in a {grid.shape[2]}-channel grid")
    return np.ascontiguousarray(grid[..., list(channels)])
