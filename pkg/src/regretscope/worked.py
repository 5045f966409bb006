"""The three-state digit environment and its grayscale test variant.

States ``0, 1, 2`` show the digit of the state.  Action 1 advances
``0 -> 1 -> 2 -> 0``; action 0 maps ``0 -> 0``, ``1 -> 0``, ``2 -> 1``.  Only
state 2 pays reward 1.

The plain training environment has three observation classes (red 0, green 1,
blue 2).  The generalization pair is phase-augmented so that a recognition
policy can read the timestamp: state ``phase * 3 + digit`` with phase 0 at
``t = 0``, phase 1 at odd ``t`` and phase 2 at even ``t > 0``.  Its eighteen
observation classes are ``palette * 9 + phase * 3 + digit`` with palette 0 for
colored images and 1 for grayscale.  States ``0, 1, 2`` of a phased
environment are therefore digits ``0, 1, 2`` at ``t = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .mdp import DecisionPolicy, FiniteEnv, RecognitionPolicy, ValuationSpec, induced_action_kernel
from .solver import (
    best_deterministic_decision,
    chain_value,
    generalization_decompose_exact,
    generalization_error,
    optimal_value,
    regret_decompose,
    value_at,
)

N_DIGITS = 3
N_PHASES = 3
N_PALETTES = 2
COLORED, GRAY = 0, 1
NEXT_DIGIT = np.array([[0, 1], [0, 2], [1, 0]])  # [digit, action]
NEXT_PHASE = (1, 2, 1)
OPTIMAL_ACTION = (1, 1, 0)


def obs_class(palette: int, phase: int, digit: int) -> int:
    return palette * 9 + phase * 3 + digit


def _digit_env(start: int) -> FiniteEnv:
    tau = np.zeros((N_DIGITS, 2, N_DIGITS))
    for d in range(N_DIGITS):
        for a in range(2):
            tau[d, a, NEXT_DIGIT[d, a]] = 1.0
    sigma = np.eye(N_DIGITS)[start]
    return FiniteEnv(sigma, tau, np.eye(N_DIGITS), np.array([0.0, 0.0, 1.0]), name="digits")


def _phased_env(start_digit: int, palette: int, name: str) -> FiniteEnv:
    n = N_DIGITS * N_PHASES
    tau = np.zeros((n, 2, n))
    omega = np.zeros((n, N_PALETTES * n))
    reward = np.zeros(n)
    for ph in range(N_PHASES):
        for d in range(N_DIGITS):
            s = ph * N_DIGITS + d
            for a in range(2):
                tau[s, a, NEXT_PHASE[ph] * N_DIGITS + NEXT_DIGIT[d, a]] = 1.0
            omega[s, obs_class(palette, ph, d)] = 1.0
            reward[s] = 1.0 if d == 2 else 0.0
    sigma = np.zeros(n)
    sigma[start_digit] = 1.0
    return FiniteEnv(sigma, tau, omega, reward, name=name)


@dataclass(frozen=True)
class WorkedExampleBundle:
    train_env: FiniteEnv
    train_env_phased: FiniteEnv
    test_env: FiniteEnv


def build_worked_envs(test_start: int = 1, train_start: int = 0) -> WorkedExampleBundle:
    """Construct the environments.

    The default test start (state 1) is the one every printed generalization
    value is consistent with; pass ``test_start=0`` for the alternative.
    """
    for name, v in (("test_start", test_start), ("train_start", train_start)):
        if v not in (0, 1, 2):
            raise InputError(f"{name} must be a digit state 0..2, got {v}")
    return WorkedExampleBundle(
        train_env=_digit_env(train_start),
        train_env_phased=_phased_env(train_start, COLORED, "digits-colored"),
        test_env=_phased_env(test_start, GRAY, "digits-gray"),
    )


def noisy_recognition(delta: float, n_classes: int = N_DIGITS) -> RecognitionPolicy:
    """Correct token with probability ``1 - delta``, otherwise a uniform token."""
    if not 0.0 <= delta <= 1.0:
        raise InputError(f"delta must lie in [0, 1], got {delta}")
    k = (1.0 - delta) * np.eye(n_classes) + delta / n_classes
    return RecognitionPolicy(k, variant="noisy-identity", params=(("delta", delta),))


def delta_optimal_decision(delta: float, mode: str = "paper") -> DecisionPolicy:
    """Decision policy that is optimal with probability ``1 - delta``.

    ``mode="exact"`` mixes the optimal action table with a uniform action:
    ``pi(a | z) = (1 - delta) [a = a*(z)] + delta / 2``.

    ``mode="paper"`` returns the decision policy whose composition with
    ``noisy_recognition(delta)`` takes the wrong action with probability
    ``delta/3 + delta/2`` in states 0 and 1 and ``2 delta/3 + delta/2`` in
    state 2, i.e. the first-order combination without the ``delta**2`` overlap
    term.  It exists for ``delta`` up to about 0.62.
    """
    if not 0.0 <= delta <= 1.0:
        raise InputError(f"delta must lie in [0, 1], got {delta}")
    params = (("delta", delta), ("mode", mode), ("base", OPTIMAL_ACTION))
    if mode == "exact":
        k = np.full((N_DIGITS, 2), delta / 2)
        k[np.arange(N_DIGITS), OPTIMAL_ACTION] += 1.0 - delta
        return DecisionPolicy(k, variant="delta-optimal", params=params)
    if mode != "paper":
        raise InputError(f"unknown delta-optimal mode {mode!r}")
    wrong = np.array([delta / 3 + delta / 2, delta / 3 + delta / 2, 2 * delta / 3 + delta / 2])
    # target P(a = 0 | s): wrong action is 0 in states 0, 1 and 1 in state 2
    target = np.where(np.array(OPTIMAL_ACTION) == 1, wrong, 1.0 - wrong)
    rho = noisy_recognition(delta).kernel
    if np.linalg.cond(rho) > 1e12:
        raise InputError(f"printed-probability delta-optimal policy is undefined at delta={delta}")
    p0 = np.linalg.solve(rho, target)
    if np.any(p0 < -1e-12) or np.any(p0 > 1 + 1e-12):
        raise InputError(
            f"printed-probability delta-optimal probabilities are not realizable by a decision policy at delta={delta}"
        )
    p0 = np.clip(p0, 0.0, 1.0)
    return DecisionPolicy(np.column_stack([p0, 1.0 - p0]), variant="delta-optimal", params=params)


def appendix_recognitions() -> tuple[RecognitionPolicy, RecognitionPolicy]:
    """Color-keyed (under-specific) and timestamp-keyed (over-specific) recognition.

    Both act on the eighteen phased observation classes with tokens ``{0, 1, 2}``.
    """
    n_x = N_PALETTES * N_PHASES * N_DIGITS
    under = np.zeros((n_x, N_DIGITS))
    over = np.zeros((n_x, N_DIGITS))
    for pal in range(N_PALETTES):
        for ph in range(N_PHASES):
            for d in range(N_DIGITS):
                x = obs_class(pal, ph, d)
                if pal == COLORED:
                    under[x, d] = 1.0
                else:
                    under[x, :] = 1.0 / N_DIGITS
                over[x, ph] = 1.0
    return (
        RecognitionPolicy(under, variant="color-keyed"),
        RecognitionPolicy(over, variant="timestamp-parity"),
    )


@dataclass(frozen=True)
class WorkedReport:
    """Every quantity of the two worked examples, keyed by name."""

    gamma: float
    delta: float
    pi_mode: str
    test_start: int
    values: dict

    def to_dict(self) -> dict:
        return {
            "kind": "worked-example",
            "gamma": self.gamma,
            "delta": self.delta,
            "pi_mode": self.pi_mode,
            "test_start": self.test_start,
            "values": self.values,
        }


def _digit_values(env: FiniteEnv, kernel: np.ndarray, spec: ValuationSpec) -> list[float]:
    return [float(v) for v in chain_value(env, kernel, spec)[:N_DIGITS]]


def reproduce_worked_tables(
    gamma: float = 0.9,
    delta: float = 0.1,
    pi_mode: str = "paper",
    test_start: int = 1,
) -> WorkedReport:
    """Recompute the single-environment and the generalization example.

    The under-specific intermediary is reported twice: from the test start
    (consistent with every other test value) and from state 0, which is the
    start the printed decomposition of that example uses.
    """
    spec = ValuationSpec(gamma)
    b = build_worked_envs(test_start=test_start)
    env = b.train_env
    rho0 = noisy_recognition(delta)
    pi0 = delta_optimal_decision(delta, pi_mode)
    out: dict = {}

    v_opt, _ = optimal_value(env, spec)
    out["v_star_train"] = value_at(env, v_opt)
    pi_best, _ = best_deterministic_decision(env, rho0, spec)
    out["best_pi_given_rho0"] = list(pi_best.action_table())
    out["rho0_values"] = _digit_values(env, induced_action_kernel(env, rho0, pi_best), spec)
    out["pi0_values"] = _digit_values(env, induced_action_kernel(env, rho0, pi0), spec)
    rep = regret_decompose(env, rho0, pi0, spec)
    out["regret"] = rep.to_dict()
    out["r_rec"] = rep.r_rec
    out["r_dec"] = rep.r_dec
    out["r_total"] = rep.r_total
    other = "exact" if pi_mode == "paper" else "paper"
    try:
        pi_other = delta_optimal_decision(delta, other)
    except InputError:
        pi_other = None
    if pi_other is not None:
        out[f"pi0_values_{other}"] = _digit_values(env, induced_action_kernel(env, rho0, pi_other), spec)
        out[f"r_dec_{other}"] = regret_decompose(env, rho0, pi_other, spec).r_dec

    train, test = b.train_env_phased, b.test_env
    under, over = appendix_recognitions()
    v_opt_test, _ = optimal_value(test, spec)
    out["v_star_test"] = value_at(test, v_opt_test)

    for label, rho in (("under", under), ("over", over)):
        pi_tr, _ = best_deterministic_decision(train, rho, spec)
        kernel = induced_action_kernel(test, rho, pi_tr)
        sec = {
            "train_pi": list(pi_tr.action_table()),
            "transferred_values": _digit_values(test, kernel, spec),
            "v_transferred": value_at(test, chain_value(test, kernel, spec)),
            "ge": generalization_error(train, test, rho, pi_tr, spec),
        }
        rep = generalization_decompose_exact(train, test, rho, spec)
        sec["gen"] = rep.to_dict()
        pi_int, v_int = best_deterministic_decision(test, rho, spec)
        sec["intermediary_pi"] = list(pi_int.action_table())
        sec["v_intermediary"] = v_int
        out[label] = sec

    # the printed decomposition of the color-keyed example evaluates the
    # intermediary from state 0 while its other test values start at state 1
    rep0 = generalization_decompose_exact(train, test, under, spec, intermediary_start=0)
    pi_int0, v_int0 = best_deterministic_decision(test, under, spec, start=0)
    out["under"]["gen_intermediary_from_0"] = rep0.to_dict()
    out["under"]["intermediary_pi_from_0"] = list(pi_int0.action_table())
    out["under"]["v_intermediary_from_0"] = v_int0
    return WorkedReport(gamma, delta, pi_mode, test_start, out)


def worked_rows(report: WorkedReport) -> list[tuple[str, str]]:
    """Flatten a report into ``(label, formatted value)`` rows at 3 decimals."""
    v = report.values

    def f(x: float) -> str:
        return f"{round(x, 3) + 0.0:.3f}"

    def tri(xs) -> str:
        return "(" + ", ".join(f(x) for x in xs) + ")"

    rows = [
        ("V*_train", f(v["v_star_train"])),
        ("V(rho0, best pi) per state", tri(v["rho0_values"])),
        ("R^rec", f(v["r_rec"])),
        (f"V(rho0, pi0) per state [{report.pi_mode}]", tri(v["pi0_values"])),
        ("R^dec", f(v["r_dec"])),
        ("R", f(v["r_total"])),
    ]
    for key in ("pi0_values_exact", "pi0_values_paper"):
        if key in v:
            mode = key.rsplit("_", 1)[1]
            rows.append((f"V(rho0, pi0) per state [{mode}]", tri(v[key])))
            rows.append((f"R^dec [{mode}]", f(v[f"r_dec_{mode}"])))
    rows.append(("V*_test", f(v["v_star_test"])))
    u, o = v["under"], v["over"]
    ug, ug0, og = u["gen"], u["gen_intermediary_from_0"], o["gen"]
    rows += [
        ("color-keyed: transferred values per state", tri(u["transferred_values"])),
        ("color-keyed: V_test transferred", f(u["v_transferred"])),
        ("color-keyed: max_pi V_test from state 0", f(u["v_intermediary_from_0"])),
        ("color-keyed: (GR, GR^rec, GR^dec) intermediary from state 0", tri((ug0["gr"], ug0["gr_rec"], ug0["gr_dec"]))),
        ("color-keyed: max_pi V_test from test start", f(u["v_intermediary"])),
        ("color-keyed: (GR, GR^rec, GR^dec) from test start", tri((ug["gr"], ug["gr_rec"], ug["gr_dec"]))),
        ("color-keyed: GE", f(u["ge"])),
        ("timestamp: V_test transferred", f(o["v_transferred"])),
        ("timestamp: max_pi V_test", f(o["v_intermediary"])),
        ("timestamp: (GR, GR^rec, GR^dec)", tri((og["gr"], og["gr_rec"], og["gr_dec"]))),
        ("timestamp: GE", f(o["ge"])),
    ]
    return rows
