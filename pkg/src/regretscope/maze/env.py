"""Key-door maze: layout, dynamics and the three-channel grid rendering.

The lattice is 5x5 with a wall border.  Column 1 is the agent side, column 2
the parting wall holding one door, column 3 the goal side::

    #####
    #A?.#      A start, K key, G goal
    #.?.#      ? door candidates (one of the three rows is the door)
    #K?G#
    #####

Moves are the four cardinal directions.  Walking onto the key picks it up;
walking into the locked door while carrying the key opens it and enters the
door cell.  Reaching the goal pays 1 and ends the episode.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from ..errors import InputError

HEIGHT = 5
WIDTH = 5
N_CHANNELS = 3
AGENT_COL, WALL_COL, GOAL_COL = 1, 2, 3
INTERIOR_ROWS = (1, 2, 3)
START_CELL = (1, 1)
KEY_CELL = (3, 1)
GOAL_CELL = (3, 3)
DEFAULT_STEP_LIMIT = 40
DEFAULT_GAMMA = 0.95


class Action(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))
N_ACTIONS = len(MOVES)


class DoorRow(IntEnum):
    NORTH = 0
    CENTER = 1
    SOUTH = 2


class Color(IntEnum):
    NONE = 0
    RED = 1
    GREEN = 2
    BLUE = 3
    GRAY = 4


N_COLORS = len(Color)


class ObjType(IntEnum):
    UNSEEN = 0
    EMPTY = 1
    WALL = 2
    DOOR = 3
    KEY = 4
    GOAL = 5
    AGENT = 6


N_TYPES = len(ObjType)
DOOR_OPEN = 1
DOOR_LOCKED = 2
AGENT_CARRYING = 1

# channel layout of a rendered grid
TYPE, STATE, COLOR = 0, 1, 2


@dataclass(frozen=True)
class MazeConfig:
    """One maze instance: where the door is and what color key and door have."""

    door_row: DoorRow
    kd_color: Color
    step_limit: int = DEFAULT_STEP_LIMIT
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        try:
            object.__setattr__(self, "door_row", DoorRow(self.door_row))
            object.__setattr__(self, "kd_color", Color(self.kd_color))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if self.kd_color == Color.NONE:
            raise InputError("kd_color must be red, green, blue or gray")
        if self.step_limit < 1:
            raise InputError(f"step_limit must be >= 1, got {self.step_limit}")
        if not 0.0 < self.gamma <= 1.0:
            raise InputError(f"gamma must lie in (0, 1], got {self.gamma}")

    @property
    def door_cell(self) -> tuple[int, int]:
        return (INTERIOR_ROWS[self.door_row], WALL_COL)

    @property
    def label(self) -> str:
        return f"{self.kd_color.name.lower()}-{self.door_row.name.lower()}"

    @property
    def coupled(self) -> bool:
        """True for the training coupling north-red, center-green, south-blue."""
        return int(self.kd_color) == int(self.door_row) + 1


def train_configs(step_limit: int = DEFAULT_STEP_LIMIT, gamma: float = DEFAULT_GAMMA) -> list[MazeConfig]:
    return [MazeConfig(d, Color(int(d) + 1), step_limit, gamma) for d in DoorRow]


def test_configs(step_limit: int = DEFAULT_STEP_LIMIT, gamma: float = DEFAULT_GAMMA) -> list[MazeConfig]:
    return [MazeConfig(d, Color.GRAY, step_limit, gamma) for d in DoorRow]


def all_configs(step_limit: int = DEFAULT_STEP_LIMIT, gamma: float = DEFAULT_GAMMA) -> list[MazeConfig]:
    """The twelve door-row x color configs, color-major (red, green, blue, gray)."""
    return [
        MazeConfig(d, c, step_limit, gamma)
        for c in (Color.RED, Color.GREEN, Color.BLUE, Color.GRAY)
        for d in DoorRow
    ]


# (agent cell, carrying, door open): everything the dynamics depend on
Core = tuple[tuple[int, int], bool, bool]


@dataclass(frozen=True)
class MazeState:
    config: MazeConfig
    agent: tuple[int, int] = START_CELL
    carrying: bool = False
    door_open: bool = False
    step: int = 0
    terminal: bool = False

    @property
    def core(self) -> Core:
        return (self.agent, self.carrying, self.door_open)


def is_wall(config: MazeConfig, cell: tuple[int, int]) -> bool:
    r, c = cell
    if r <= 0 or c <= 0 or r >= HEIGHT - 1 or c >= WIDTH - 1:
        return True
    return c == WALL_COL and cell != config.door_cell


def core_step(config: MazeConfig, core: Core, action: int) -> tuple[Core, float, bool]:
    """Deterministic move on the step-free part of the state."""
    (r, c), carrying, door_open = core
    dr, dc = MOVES[action]
    target = (r + dr, c + dc)
    if is_wall(config, target):
        target = (r, c)
    elif target == config.door_cell and not door_open:
        if not carrying:
            target = (r, c)
        else:
            door_open = True
    if target == KEY_CELL:
        carrying = True
    at_goal = target == GOAL_CELL
    return (target, carrying, door_open), (1.0 if at_goal else 0.0), at_goal


def render(state: MazeState) -> np.ndarray:
    """Full-lattice observation, shape ``(HEIGHT, WIDTH, 3)``, dtype uint8."""
    cfg = state.config
    g = np.zeros((HEIGHT, WIDTH, N_CHANNELS), dtype=np.uint8)
    g[..., TYPE] = ObjType.EMPTY
    for r in range(HEIGHT):
        for c in range(WIDTH):
            if is_wall(cfg, (r, c)):
                g[r, c, TYPE] = ObjType.WALL
    dr, dc = cfg.door_cell
    g[dr, dc] = (ObjType.DOOR, DOOR_OPEN if state.door_open else DOOR_LOCKED, cfg.kd_color)
    if not state.carrying:
        g[KEY_CELL] = (ObjType.KEY, 0, cfg.kd_color)
    g[GOAL_CELL] = (ObjType.GOAL, 0, Color.NONE)
    g[state.agent] = (ObjType.AGENT, AGENT_CARRYING if state.carrying else 0, Color.NONE)
    return g


def check_observation(obs: np.ndarray) -> None:
    """Raise ``InputError`` unless ``obs`` is a valid rendered grid."""
    if obs.shape != (HEIGHT, WIDTH, N_CHANNELS):
        raise InputError(f"observation shape {obs.shape} != {(HEIGHT, WIDTH, N_CHANNELS)}")
    if int((obs[..., TYPE] == ObjType.AGENT).sum()) != 1:
        raise InputError("observation must contain exactly one agent cell")
    if obs[..., TYPE].max() >= N_TYPES or obs[..., STATE].max() > DOOR_LOCKED or obs[..., COLOR].max() >= N_COLORS:
        raise InputError("observation channel value out of range")


def maze_reset(config: MazeConfig) -> tuple[MazeState, np.ndarray]:
    state = MazeState(config)
    return state, render(state)


def maze_step(state: MazeState, action: int) -> tuple[MazeState, float, bool]:
    if state.terminal:
        raise InputError("cannot step a terminal maze state")
    try:
        action = Action(action)
    except ValueError:
        raise InputError(f"unknown action {action!r}") from None
    (agent, carrying, door_open), reward, at_goal = core_step(state.config, state.core, action)
    step = state.step + 1
    done = at_goal or step >= state.config.step_limit
    nxt = replace(state, agent=agent, carrying=carrying, door_open=door_open, step=step, terminal=done)
    return nxt, reward, done


def reachable_cores(config: MazeConfig) -> list[Core]:
    """Non-goal core states reachable from reset, in BFS order (actions N, E, S, W)."""
    start = MazeState(config).core
    seen = {start: 0}
    order = [start]
    queue = deque([start])
    while queue:
        core = queue.popleft()
        for a in Action:
            nxt, _, at_goal = core_step(config, core, a)
            if not at_goal and nxt not in seen:
                seen[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
    return order


def shortest_solution(config: MazeConfig) -> list[Action]:
    """Shortest action sequence to the goal; ties follow action order N, E, S, W."""
    start = MazeState(config).core
    parent: dict[Core, tuple[Core, Action] | None] = {start: None}
    queue = deque([start])
    while queue:
        core = queue.popleft()
        for a in Action:
            nxt, _, at_goal = core_step(config, core, a)
            if at_goal:
                path = [a]
                while parent[core] is not None:
                    core, a_prev = parent[core]
                    path.append(a_prev)
                path.reverse()
                if len(path) > config.step_limit:
                    raise InputError(f"{config.label} needs {len(path)} steps, step limit is {config.step_limit}")
                return path
            if nxt not in parent:
                parent[nxt] = (core, a)
                queue.append(nxt)
    raise InputError(f"maze {config.label} is unsolvable")


def optimal_maze_value(config: MazeConfig, gamma: float | None = None) -> float:
    """``gamma ** (L - 1)`` for the shortest solve length ``L``."""
    g = config.gamma if gamma is None else gamma
    return float(g ** (len(shortest_solution(config)) - 1))


def bfs_trajectory(config: MazeConfig) -> list[MazeState]:
    """States the optimal policy acts in, from reset up to (not including) the goal."""
    state, _ = maze_reset(config)
    states = [state]
    actions = shortest_solution(config)
    for a in actions[:-1]:
        state, _, _ = maze_step(state, a)
        states.append(state)
    return states


__all__ = [
    "Action", "Color", "DoorRow", "ObjType", "MazeConfig", "MazeState",
    "maze_reset", "maze_step", "render", "check_observation", "reachable_cores", "core_step",
    "shortest_solution", "optimal_maze_value", "bfs_trajectory",
    "train_configs", "test_configs", "all_configs", "is_wall",
]
