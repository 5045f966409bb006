"""Exact evaluation, optimal values and the regret decompositions.

Every quantity here is computed by linear algebra or exhaustive enumeration;
nothing is sampled.  Reports store the three underlying values and derive the
regrets from them, so ``r_total == r_rec + r_dec`` holds bitwise.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EnumerationBudgetError, InputError, SolverError
from .mdp import (
    DecisionPolicy,
    FiniteEnv,
    RecognitionPolicy,
    ValuationSpec,
    chain_matrix,
    induced_action_kernel,
    start_label,
    state_token_kernel,
)

RESIDUAL_TOL = 1e-10
VI_TOL = 1e-12
DIRECT_SOLVE_MAX_STATES = 512
DEFAULT_ENUMERATION_BUDGET = 10**6


def _check_residual(v: np.ndarray, r: np.ndarray, p: np.ndarray, gamma: float) -> None:
    res = float(np.max(np.abs(v - (r + gamma * p @ v)), initial=0.0))
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise SolverError(f"policy evaluation residual {res:.3g} exceeds {RESIDUAL_TOL}")


def chain_value(env: FiniteEnv, action_kernel: np.ndarray, spec: ValuationSpec) -> np.ndarray:
    """Solve ``v = r + gamma P v`` for the chain induced by a per-state action kernel."""
    k = np.asarray(action_kernel, dtype=float)
    if not np.allclose(k.sum(axis=1), 1.0, atol=1e-12, rtol=0) or np.any(k < 0):
        raise InputError("action kernel rows must be probability distributions")
    p = chain_matrix(env, k)
    r = env.reward
    if env.n_states <= DIRECT_SOLVE_MAX_STATES:
        v = np.linalg.solve(np.eye(env.n_states) - spec.gamma * p, r)
    else:
        v = np.zeros(env.n_states)
        while True:
            nv = r + spec.gamma * (p @ v)
            delta = float(np.max(np.abs(nv - v)))
            v = nv
            if delta < VI_TOL:
                break
    _check_residual(v, r, p, spec.gamma)
    return v


def value_at(env: FiniteEnv, values: np.ndarray, start: int | None = None) -> float:
    """Expected value under ``sigma`` (or from a fixed start state)."""
    return float(env.start_distribution(start) @ values)


def optimal_value(env: FiniteEnv, spec: ValuationSpec) -> tuple[np.ndarray, np.ndarray]:
    """Fully-observed optimum by value iteration; returns ``(values, greedy_actions)``.

    Greedy ties go to the lowest action index.  The returned values are the
    exact values of the greedy policy whenever they agree with the iterate
    to 1e-9.
    """
    live = ~env.terminal
    v = np.zeros(env.n_states)
    while True:
        q = env.reward[:, None] + spec.gamma * np.einsum("sat,t->sa", env.tau, v)
        nv = np.where(live, q.max(axis=1), env.reward)
        delta = float(np.max(np.abs(nv - v)))
        v = nv
        if delta < VI_TOL:
            break
    q = env.reward[:, None] + spec.gamma * np.einsum("sat,t->sa", env.tau, v)
    greedy = np.argmax(q, axis=1)
    # polish: the exact value of the greedy policy removes the stopping error
    polished = chain_value(env, greedy_kernel(env, greedy), spec)
    if np.max(np.abs(polished - v)) <= 1e-9:
        v = polished
    return v, greedy


def greedy_kernel(env: FiniteEnv, actions: np.ndarray) -> np.ndarray:
    k = np.zeros((env.n_states, env.n_actions))
    k[np.arange(env.n_states), actions] = 1.0
    return k


def _candidate_block(lo: int, hi: int, n_tokens: int, n_actions: int) -> np.ndarray:
    """Action tables ``lo..hi-1`` in lexicographic order (token 0 most significant)."""
    idx = np.arange(lo, hi, dtype=np.int64)
    out = np.empty((hi - lo, n_tokens), dtype=np.int64)
    for z in range(n_tokens - 1, -1, -1):
        out[:, z] = idx % n_actions
        idx //= n_actions
    return out


def _batch_values(
    env: FiniteEnv, m: np.ndarray, tables: np.ndarray, gamma: float, dist: np.ndarray
) -> np.ndarray:
    n_s = env.n_states
    p = np.zeros((tables.shape[0], n_s, n_s))
    for z in range(tables.shape[1]):
        # tau[s, table[b, z], :] for every candidate b
        p += m[None, :, z, None] * np.transpose(env.tau[:, tables[:, z], :], (1, 0, 2))
    p[:, env.terminal, :] = 0.0
    a = np.eye(n_s)[None] - gamma * p
    rhs = np.broadcast_to(env.reward[None, :, None], (tables.shape[0], n_s, 1))
    v = np.linalg.solve(a, rhs)[..., 0]
    return v @ dist


def best_deterministic_decision(
    env: FiniteEnv,
    rho: RecognitionPolicy,
    spec: ValuationSpec,
    start: int | None = None,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> tuple[DecisionPolicy, float]:
    """Exact maximum of ``V(rho, pi)`` over all deterministic memoryless ``pi``.

    Enumerates ``|A| ** |Z|`` action tables.  Ties (within 1e-12 relative) go to
    the lexicographically smallest table.
    """
    m = state_token_kernel(env, rho)
    n_z, n_a = rho.n_tokens, env.n_actions
    total = n_a**n_z
    if total > budget:
        raise EnumerationBudgetError(total, budget)
    dist = env.start_distribution(start)
    chunk = max(1, min(8192, 4_000_000 // max(1, env.n_states**2)))
    values = np.empty(total)
    if env.n_states <= DIRECT_SOLVE_MAX_STATES:
        for lo in range(0, total, chunk):
            hi = min(total, lo + chunk)
            values[lo:hi] = _batch_values(env, m, _candidate_block(lo, hi, n_z, n_a), spec.gamma, dist)
    else:
        for i, table in enumerate(itertools.product(range(n_a), repeat=n_z)):
            k = m @ DecisionPolicy.deterministic(table, n_a).kernel
            values[i] = dist @ chain_value(env, k, spec)
    best = float(values.max())
    i = int(np.flatnonzero(values >= best - 1e-12 * max(1.0, abs(best)))[0])
    table = _candidate_block(i, i + 1, n_z, n_a)[0]
    pi = DecisionPolicy.deterministic(table.tolist(), n_a, variant="tabular", params=("deterministic-maximizer",))
    # re-evaluate the winner through the generic path so callers see one code path's number
    value = float(dist @ chain_value(env, m @ pi.kernel, spec))
    return pi, value


@dataclass(frozen=True)
class RegretReport:
    """Optimal, best-given-recognition and achieved values with the regret split."""

    v_star: float
    v_best_given_rho: float
    v_pair: float
    start: str = "sigma"
    v_star_is_upper_bound: bool = False
    best_given_rho_kind: str = "deterministic maximizer"
    tolerance: float = RESIDUAL_TOL
    r_rec: float = field(init=False)
    r_dec: float = field(init=False)
    r_total: float = field(init=False)

    def __post_init__(self):
        r_rec = self.v_star - self.v_best_given_rho
        r_dec = self.v_best_given_rho - self.v_pair
        object.__setattr__(self, "r_rec", r_rec)
        object.__setattr__(self, "r_dec", r_dec)
        object.__setattr__(self, "r_total", r_rec + r_dec)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "regret"
        return d


@dataclass(frozen=True)
class GenRegretReport:
    """Generalization regret split around the intermediary test value.

    ``v_fresh`` is the test value of policies trained on the test environment,
    ``v_intermediary`` keeps the train-time recognition and retrains only the
    decision policy on test, ``v_transferred`` is the train-time pair on test.
    """

    v_fresh: float
    v_intermediary: float
    v_transferred: float
    v_train: float
    start: str = "sigma"
    intermediary_start: str = "sigma"
    exact: bool = True
    tolerance: float = RESIDUAL_TOL
    gr_rec: float = field(init=False)
    gr_dec: float = field(init=False)
    gr: float = field(init=False)
    ge: float = field(init=False)

    def __post_init__(self):
        gr_rec = self.v_fresh - self.v_intermediary
        gr_dec = self.v_intermediary - self.v_transferred
        object.__setattr__(self, "gr_rec", gr_rec)
        object.__setattr__(self, "gr_dec", gr_dec)
        object.__setattr__(self, "gr", gr_rec + gr_dec)
        object.__setattr__(self, "ge", self.v_train - self.v_transferred)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "generalization"
        return d


def regret_decompose(
    env: FiniteEnv,
    rho: RecognitionPolicy,
    pi: DecisionPolicy,
    spec: ValuationSpec,
    start: int | None = None,
    v_best_given_rho: float | None = None,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> RegretReport:
    v_opt, _ = optimal_value(env, spec)
    v_star = value_at(env, v_opt, start)
    kind = "deterministic maximizer"
    if v_best_given_rho is None:
        _, v_best_given_rho = best_deterministic_decision(env, rho, spec, start, budget)
    else:
        kind = "caller-supplied"
    v_pair = value_at(env, chain_value(env, induced_action_kernel(env, rho, pi), spec), start)
    return RegretReport(
        v_star=v_star,
        v_best_given_rho=float(v_best_given_rho),
        v_pair=v_pair,
        start=start_label(start),
        v_star_is_upper_bound=not env.state_identifying(),
        best_given_rho_kind=kind,
    )


def _check_pair(train_env: FiniteEnv, test_env: FiniteEnv) -> None:
    for axis in ("n_states", "n_actions", "n_obs"):
        a, b = getattr(train_env, axis), getattr(test_env, axis)
        if a != b:
            raise DimensionMismatchError(f"{axis} (train vs test)", a, b)


def generalization_error(
    train_env: FiniteEnv,
    test_env: FiniteEnv,
    rho0: RecognitionPolicy,
    pi_trained: DecisionPolicy,
    spec: ValuationSpec,
    train_start: int | None = None,
    test_start: int | None = None,
) -> float:
    """Train value minus test value of the same trained pair."""
    _check_pair(train_env, test_env)
    v_tr = value_at(train_env, chain_value(train_env, induced_action_kernel(train_env, rho0, pi_trained), spec), train_start)
    v_te = value_at(test_env, chain_value(test_env, induced_action_kernel(test_env, rho0, pi_trained), spec), test_start)
    return v_tr - v_te


def generalization_decompose_exact(
    train_env: FiniteEnv,
    test_env: FiniteEnv,
    rho0: RecognitionPolicy,
    spec: ValuationSpec,
    train_start: int | None = None,
    test_start: int | None = None,
    intermediary_start: int | None = None,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> GenRegretReport:
    """Generalization regret with an exact learner.

    The learner returns the deterministic maximizer given ``rho0`` on the train
    environment; the fresh test value is the test optimum.  By default the
    intermediary is evaluated from the same start as the other test values;
    ``intermediary_start`` overrides it.
    """
    _check_pair(train_env, test_env)
    pi_train, v_train = best_deterministic_decision(train_env, rho0, spec, train_start, budget)
    v_opt, _ = optimal_value(test_env, spec)
    v_fresh = value_at(test_env, v_opt, test_start)
    i_start = test_start if intermediary_start is None else intermediary_start
    _, v_int = best_deterministic_decision(test_env, rho0, spec, i_start, budget)
    kernel = induced_action_kernel(test_env, rho0, pi_train)
    v_transferred = value_at(test_env, chain_value(test_env, kernel, spec), test_start)
    return GenRegretReport(
        v_fresh=v_fresh,
        v_intermediary=v_int,
        v_transferred=v_transferred,
        v_train=v_train,
        start=start_label(test_start),
        intermediary_start=start_label(i_start),
    )
