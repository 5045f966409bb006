"""Finite partially-observable environments and the recognition/decision split.

An agent is a pair of memoryless kernels: a recognition policy mapping
observation classes to representation tokens, and a decision policy mapping
tokens to actions.  Everything here is immutable after construction.

Conventions
-----------
* The reward of the state occupied at step ``t`` (``t = 1, 2, ...``) is
  discounted by ``gamma ** (t - 1)``.
* Terminal states are absorbing; their reward is collected on the first visit
  and nothing afterwards.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DimensionMismatchError, InputError, ValidationError

ROW_TOL = 1e-12

ENV_FIELDS = ("n_states", "n_actions", "n_obs", "sigma", "tau", "omega", "reward", "terminal")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def check_distribution(row: Any, path: str, tol: float = ROW_TOL) -> None:
    """Raise ValidationError naming ``path`` unless ``row`` is a probability vector."""
    arr = np.asarray(row, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(path, "expected a 1-D probability vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(path, "entries must be finite")
    if np.any(arr < 0):
        raise ValidationError(path, f"negative entry {arr.min():.6g}")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError(path, f"row sums to {total:.12g}, expected 1")


def _check_stochastic(mat: np.ndarray, name: str) -> None:
    for idx in np.ndindex(*mat.shape[:-1]):
        check_distribution(mat[idx], name + "".join(f"[{i}]" for i in idx))


@dataclass(frozen=True)
class FiniteEnv:
    """Finite environment ``(sigma, tau, omega, reward)`` with observation classes.

    ``tau`` has shape ``(S, A, S)``, ``omega`` shape ``(S, X)``.  ``reward`` is
    the expected immediate reward of each state.
    """

    sigma: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray = None  # type: ignore[assignment]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        sigma = _frozen(self.sigma)
        tau = _frozen(self.tau)
        omega = _frozen(self.omega)
        reward = _frozen(self.reward)
        n = sigma.shape[0] if sigma.ndim == 1 else -1
        if sigma.ndim != 1:
            raise ValidationError("sigma", "expected a 1-D array")
        if tau.ndim != 3 or tau.shape[0] != n or tau.shape[2] != n:
            raise ValidationError("tau", f"expected shape ({n}, n_actions, {n}), got {tau.shape}")
        if omega.ndim != 2 or omega.shape[0] != n:
            raise ValidationError("omega", f"expected shape ({n}, n_obs), got {omega.shape}")
        if reward.shape != (n,):
            raise ValidationError("reward", f"expected shape ({n},), got {reward.shape}")
        if not np.all(np.isfinite(reward)):
            raise ValidationError("reward", "entries must be finite")
        terminal = np.zeros(n, dtype=bool) if self.terminal is None else np.array(self.terminal, dtype=bool)
        if terminal.shape != (n,):
            raise ValidationError("terminal", f"expected shape ({n},), got {terminal.shape}")
        terminal.setflags(write=False)
        check_distribution(sigma, "sigma")
        _check_stochastic(tau, "tau")
        _check_stochastic(omega, "omega")
        for s in np.flatnonzero(terminal):
            for a in range(tau.shape[1]):
                if abs(tau[s, a, s] - 1.0) > ROW_TOL:
                    raise ValidationError(f"tau[{s}][{a}]", "terminal state must self-loop")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "terminal", terminal)

    @property
    def n_states(self) -> int:
        return self.tau.shape[0]

    @property
    def n_actions(self) -> int:
        return self.tau.shape[1]

    @property
    def n_obs(self) -> int:
        return self.omega.shape[1]

    def state_identifying(self) -> bool:
        """True when every observation class can be emitted by at most one state."""
        support = self.omega > 0
        return bool(np.all(support.sum(axis=0) <= 1))

    def start_distribution(self, start: int | None = None) -> np.ndarray:
        """``sigma`` itself, or a one-hot override at state ``start``."""
        if start is None:
            return self.sigma
        if not 0 <= start < self.n_states:
            raise InputError(f"start state {start} outside 0..{self.n_states - 1}")
        d = np.zeros(self.n_states)
        d[start] = 1.0
        return d

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "n_obs": self.n_obs,
            "sigma": self.sigma.tolist(),
            "tau": self.tau.tolist(),
            "omega": self.omega.tolist(),
            "reward": self.reward.tolist(),
            "terminal": [bool(t) for t in self.terminal],
        }

    @classmethod
    def from_dict(cls, doc: dict, name: str = "") -> "FiniteEnv":
        return cls(**_parse_env_doc(doc), name=name)


def start_label(start: int | None) -> str:
    return "sigma" if start is None else f"state:{start}"


def _require_int(doc: dict, key: str) -> int:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValidationError(key, "expected a positive integer")
    return v


def _require_list(v: Any, path: str, length: int) -> list:
    if not isinstance(v, list):
        raise ValidationError(path, "expected an array")
    if len(v) != length:
        raise ValidationError(path, f"expected {length} entries, got {len(v)}")
    return v


def _require_prob_row(v: Any, path: str, length: int) -> list:
    row = _require_list(v, path, length)
    for i, x in enumerate(row):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ValidationError(f"{path}[{i}]", "expected a number")
    check_distribution(row, path)
    return row


def _parse_env_doc(doc: Any) -> dict:
    if not isinstance(doc, dict):
        raise ValidationError("$", "expected a JSON object")
    unknown = sorted(set(doc) - set(ENV_FIELDS))
    if unknown:
        raise ValidationError(unknown[0], "unknown field")
    missing = [k for k in ENV_FIELDS if k not in doc]
    if missing:
        raise ValidationError(missing[0], "missing required field")
    n_s = _require_int(doc, "n_states")
    n_a = _require_int(doc, "n_actions")
    n_x = _require_int(doc, "n_obs")
    sigma = _require_prob_row(doc["sigma"], "sigma", n_s)
    tau_rows = _require_list(doc["tau"], "tau", n_s)
    tau = []
    for s, per_a in enumerate(tau_rows):
        per_a = _require_list(per_a, f"tau[{s}]", n_a)
        tau.append([_require_prob_row(row, f"tau[{s}][{a}]", n_s) for a, row in enumerate(per_a)])
    omega_rows = _require_list(doc["omega"], "omega", n_s)
    omega = [_require_prob_row(row, f"omega[{s}]", n_x) for s, row in enumerate(omega_rows)]
    reward = _require_list(doc["reward"], "reward", n_s)
    for i, x in enumerate(reward):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ValidationError(f"reward[{i}]", "expected a finite number")
    terminal = _require_list(doc["terminal"], "terminal", n_s)
    for i, x in enumerate(terminal):
        if not isinstance(x, bool):
            raise ValidationError(f"terminal[{i}]", "expected a boolean")
    return dict(sigma=sigma, tau=tau, omega=omega, reward=reward, terminal=terminal)


def load_env(path: str | Path) -> FiniteEnv:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("$", f"invalid JSON: {exc}") from None
    return FiniteEnv.from_dict(doc, name=Path(path).stem)


def save_env(env: FiniteEnv, path: str | Path) -> None:
    Path(path).write_text(json.dumps(env.to_dict(), indent=1) + "\n")


@dataclass(frozen=True)
class ValuationSpec:
    """Discount factor and an optional truncation horizon (simulation only)."""

    gamma: float
    horizon: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InputError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.horizon is not None and self.horizon < 0:
            raise InputError(f"horizon must be >= 0, got {self.horizon}")

    def truncated(self, tol: float = 1e-10, reward_bound: float = 1.0) -> "ValuationSpec":
        """Copy with the smallest horizon whose discarded tail is below ``tol``."""
        tail = tol * (1 - self.gamma) / max(reward_bound, 1e-300)
        h = max(1, math.ceil(math.log(tail) / math.log(self.gamma)))
        return ValuationSpec(self.gamma, h)


def _kernel_array(kernel: Any, name: str) -> np.ndarray:
    k = _frozen(kernel)
    if k.ndim != 2:
        raise ValidationError(name, f"expected a 2-D kernel, got shape {k.shape}")
    _check_stochastic(k, name)
    return k


@dataclass(frozen=True)
class RecognitionPolicy:
    """Memoryless recognition kernel: row ``x`` is a distribution over tokens.

    ``variant`` tags structured constructions (``tabular``, ``noisy-identity``,
    ``timestamp-parity``, ``color-keyed``, ``filter-composed``); ``params``
    records their parameters for reports.
    """

    kernel: np.ndarray
    variant: str = "tabular"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kernel", _kernel_array(self.kernel, "rho"))

    @property
    def n_obs(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.kernel.shape[1]

    def to_dict(self) -> dict:
        return {"n_obs": self.n_obs, "n_tokens": self.n_tokens, "kernel": self.kernel.tolist()}


@dataclass(frozen=True)
class DecisionPolicy:
    """Decision kernel: row ``z`` is a distribution over actions."""

    kernel: np.ndarray
    variant: str = "tabular"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kernel", _kernel_array(self.kernel, "pi"))

    @property
    def n_tokens(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int, **kw) -> "DecisionPolicy":
        k = np.zeros((len(actions), n_actions))
        k[np.arange(len(actions)), list(actions)] = 1.0
        return cls(k, **kw)

    def action_table(self) -> tuple[int, ...] | None:
        """The action per token if the policy is deterministic, else None."""
        if not np.all((self.kernel == 0) | (self.kernel == 1)):
            return None
        return tuple(int(a) for a in self.kernel.argmax(axis=1))

    def to_dict(self) -> dict:
        return {"n_tokens": self.n_tokens, "n_actions": self.n_actions, "kernel": self.kernel.tolist()}


def _load_kernel_doc(path: str | Path, fields: tuple[str, ...]) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("$", "expected a JSON object")
    unknown = sorted(set(doc) - set(fields) - {"kernel"})
    if unknown:
        raise ValidationError(unknown[0], "unknown field")
    if "kernel" not in doc:
        raise ValidationError("kernel", "missing required field")
    rows = doc["kernel"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValidationError("kernel", "expected a non-empty array of arrays")
    width = len(rows[0])
    for i, r in enumerate(rows):
        _require_prob_row(r, f"kernel[{i}]", width)
    k = np.array(rows, dtype=float)
    for key, axis in zip(fields, (0, 1)):
        if key in doc and doc[key] != k.shape[axis]:
            raise ValidationError(key, f"declares {doc[key]} but kernel has {k.shape[axis]}")
    return k


def load_recognition(path: str | Path) -> RecognitionPolicy:
    return RecognitionPolicy(_load_kernel_doc(path, ("n_obs", "n_tokens")))


def load_decision(path: str | Path) -> DecisionPolicy:
    return DecisionPolicy(_load_kernel_doc(path, ("n_tokens", "n_actions")))


def state_token_kernel(env: FiniteEnv, rho: RecognitionPolicy) -> np.ndarray:
    """P(z | s) = sum_x omega(x | s) rho(z | x)."""
    if rho.n_obs != env.n_obs:
        raise DimensionMismatchError("observation classes (env.n_obs vs rho rows)", env.n_obs, rho.n_obs)
    return env.omega @ rho.kernel


def induced_action_kernel(env: FiniteEnv, rho: RecognitionPolicy, pi: DecisionPolicy) -> np.ndarray:
    """Exact per-state action distribution of the composed agent."""
    m = state_token_kernel(env, rho)
    if pi.n_tokens != rho.n_tokens:
        raise DimensionMismatchError("tokens (rho.n_tokens vs pi rows)", rho.n_tokens, pi.n_tokens)
    if pi.n_actions != env.n_actions:
        raise DimensionMismatchError("actions (env.n_actions vs pi columns)", env.n_actions, pi.n_actions)
    return m @ pi.kernel


def chain_matrix(env: FiniteEnv, action_kernel: np.ndarray) -> np.ndarray:
    """State-to-state transition matrix under ``action_kernel``; terminal rows are zero."""
    k = np.asarray(action_kernel, dtype=float)
    if k.shape != (env.n_states, env.n_actions):
        raise DimensionMismatchError("action kernel shape", env.n_states * env.n_actions, k.size)
    p = np.einsum("sa,sat->st", k, env.tau)
    p[env.terminal] = 0.0
    return p


@dataclass(frozen=True)
class Step:
    state: int
    obs: int
    token: int
    action: int
    reward: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    discounted_return: float


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> int:
    u = rng.random()
    c = np.cumsum(probs)
    return int(min(np.searchsorted(c, u * c[-1], side="right"), len(probs) - 1))


def rollout(
    env: FiniteEnv,
    rho: RecognitionPolicy,
    pi: DecisionPolicy,
    spec: ValuationSpec,
    rng: np.random.Generator,
    start: int | None = None,
) -> Trajectory:
    """Sample one episode, recording every step."""
    induced_action_kernel(env, rho, pi)  # dimension checks
    if spec.horizon is None:
        raise InputError("rollout needs a finite horizon; use ValuationSpec.truncated()")
    steps = []
    s = _categorical(rng, env.start_distribution(start))
    g, disc = 0.0, 1.0
    for _ in range(spec.horizon):
        x = _categorical(rng, env.omega[s])
        z = _categorical(rng, rho.kernel[x])
        a = _categorical(rng, pi.kernel[z])
        r = float(env.reward[s])
        steps.append(Step(s, x, z, a, r))
        g += disc * r
        disc *= spec.gamma
        if env.terminal[s]:
            break
        s = _categorical(rng, env.tau[s, a])
    return Trajectory(tuple(steps), g)


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    episodes: int


def _sample_rows(rng: np.random.Generator, cum: np.ndarray, rows: np.ndarray) -> np.ndarray:
    u = rng.random(rows.shape[0])
    c = cum[rows]
    idx = (c < (u * c[:, -1])[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def simulate(
    env: FiniteEnv,
    rho: RecognitionPolicy,
    pi: DecisionPolicy,
    spec: ValuationSpec,
    seed: int,
    episodes: int,
    start: int | None = None,
) -> SimulationResult:
    """Monte-Carlo estimate of the discounted value, vectorized over episodes.

    Bit-reproducible for a given seed.
    """
    induced_action_kernel(env, rho, pi)
    if episodes < 1:
        raise InputError("episodes must be >= 1")
    if spec.horizon is None:
        raise InputError("simulate needs a finite horizon; use ValuationSpec.truncated()")
    rng = np.random.default_rng(seed)
    returns = np.zeros(episodes)
    if spec.horizon == 0:
        return SimulationResult(0.0, 0.0, episodes)
    cum_sigma = np.cumsum(env.start_distribution(start))[None, :]
    cum_omega = np.cumsum(env.omega, axis=1)
    cum_rho = np.cumsum(rho.kernel, axis=1)
    cum_pi = np.cumsum(pi.kernel, axis=1)
    cum_tau = np.cumsum(env.tau.reshape(-1, env.n_states), axis=1)
    s = _sample_rows(rng, cum_sigma, np.zeros(episodes, dtype=np.intp))
    alive = np.ones(episodes, dtype=bool)
    disc = 1.0
    for _ in range(spec.horizon):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        st = s[idx]
        x = _sample_rows(rng, cum_omega, st)
        z = _sample_rows(rng, cum_rho, x)
        a = _sample_rows(rng, cum_pi, z)
        returns[idx] += disc * env.reward[st]
        disc *= spec.gamma
        alive[idx[env.terminal[st]]] = False
        s[idx] = _sample_rows(rng, cum_tau, st * env.n_actions + a)
    mean = float(returns.mean())
    stderr = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return SimulationResult(mean, stderr, episodes)
