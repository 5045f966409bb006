import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regretscope.errors import EnumerationBudgetError, InputError
from regretscope.mdp import DecisionPolicy, RecognitionPolicy, ValuationSpec, induced_action_kernel
from regretscope.solver import (
    GenRegretReport,
    RegretReport,
    best_deterministic_decision,
    chain_value,
    generalization_decompose_exact,
    generalization_error,
    greedy_kernel,
    optimal_value,
    regret_decompose,
    value_at,
)
from regretscope.worked import appendix_recognitions, build_worked_envs, noisy_recognition

from conftest import random_env, random_pi, random_rho


def series_value(env, kernel, gamma, n=4000):
    """Independent oracle: truncated Neumann series sum_t gamma^t P^t r."""
    p = np.einsum("sa,sat->st", kernel, env.tau)
    p[env.terminal] = 0.0
    v = np.zeros(env.n_states)
    term = env.reward.copy()
    for _ in range(n):
        v += term
        term = gamma * (p @ term)
    return v


def test_chain_value_matches_series(rng):
    for _ in range(10):
        env = random_env(rng, 5, 3, 4, terminals=True)
        k = induced_action_kernel(env, random_rho(rng, 4, 3), random_pi(rng, 3, 3))
        assert np.allclose(chain_value(env, k, ValuationSpec(0.8)), series_value(env, k, 0.8), atol=1e-10)


def test_chain_value_constant_reward(rng):
    env = random_env(rng, 4, 2)
    env = type(env)(env.sigma, env.tau, env.omega, np.ones(4))
    k = induced_action_kernel(env, random_rho(rng, 4, 2), random_pi(rng, 2, 2))
    assert np.allclose(chain_value(env, k, ValuationSpec(0.9)), 10.0, atol=1e-12)


def test_chain_value_iterative_path_agrees(rng):
    # above the direct-solve threshold the solver iterates
    env = random_env(rng, 600, 2, 1, identity_obs=False)
    k = np.full((600, 2), 0.5)
    v = chain_value(env, k, ValuationSpec(0.7))
    direct = np.linalg.solve(np.eye(600) - 0.7 * np.einsum("sa,sat->st", k, env.tau), env.reward)
    assert np.allclose(v, direct, atol=1e-10)


def test_chain_value_rejects_bad_kernel(rng):
    env = random_env(rng, 3, 2)
    with pytest.raises(InputError):
        chain_value(env, np.full((3, 2), 0.6), ValuationSpec(0.9))


def test_optimal_value_worked_examples():
    b = build_worked_envs()
    spec = ValuationSpec(0.9)
    v, greedy = optimal_value(b.train_env, spec)
    assert value_at(b.train_env, v) == pytest.approx(4.263, abs=5e-4)
    assert tuple(greedy) == (1, 1, 0)
    vt, _ = optimal_value(b.test_env, spec)
    assert value_at(b.test_env, vt) == pytest.approx(4.737, abs=5e-4)


def test_greedy_attains_optimal(rng):
    for _ in range(20):
        env = random_env(rng, 4, 3, terminals=True)
        spec = ValuationSpec(0.85)
        v, greedy = optimal_value(env, spec)
        assert np.allclose(chain_value(env, greedy_kernel(env, greedy), spec), v, atol=1e-9)


def test_optimal_value_greedy_ties_to_lowest_action():
    b = build_worked_envs()
    env = type(b.train_env)(b.train_env.sigma, b.train_env.tau, b.train_env.omega, np.zeros(3))
    _, greedy = optimal_value(env, ValuationSpec(0.9))
    assert np.all(greedy == 0)


def test_best_decision_color_and_timestamp_examples():
    b = build_worked_envs()
    spec = ValuationSpec(0.9)
    under, over = appendix_recognitions()
    pi, v = best_deterministic_decision(b.test_env, under, spec, start=0)
    assert pi.action_table() == (1, 1, 1)
    assert v == pytest.approx(2.989, abs=5e-4)
    _, v = best_deterministic_decision(b.test_env, over, spec)
    assert v == pytest.approx(4.737, abs=5e-4)


def test_best_decision_identity_matches_optimum_every_start():
    env = build_worked_envs().train_env
    spec = ValuationSpec(0.9)
    v_opt, _ = optimal_value(env, spec)
    for s in range(3):
        _, v = best_deterministic_decision(env, RecognitionPolicy(np.eye(3)), spec, start=s)
        assert v == pytest.approx(v_opt[s], abs=1e-9)


def test_best_decision_lexicographic_tie_break():
    env = build_worked_envs().train_env
    env = type(env)(env.sigma, env.tau, env.omega, np.zeros(3))
    pi, v = best_deterministic_decision(env, RecognitionPolicy(np.eye(3)), ValuationSpec(0.9))
    assert v == 0.0 and pi.action_table() == (0, 0, 0)


def test_best_decision_brute_force_oracle(rng):
    spec = ValuationSpec(0.9)
    for _ in range(10):
        env = random_env(rng, 4, 3, 3)
        rho = random_rho(rng, 3, 3)
        best = max(
            value_at(env, chain_value(env, induced_action_kernel(env, rho, DecisionPolicy.deterministic(t, 3)), spec))
            for t in itertools.product(range(3), repeat=3)
        )
        _, v = best_deterministic_decision(env, rho, spec)
        assert v == pytest.approx(best, abs=1e-12)


def test_enumeration_budget(rng):
    env = random_env(rng, 3, 4)
    with pytest.raises(EnumerationBudgetError, match="train_tabular"):
        best_deterministic_decision(env, random_rho(rng, 3, 12), ValuationSpec(0.9))


def test_regret_worked_example():
    from regretscope.worked import delta_optimal_decision

    env = build_worked_envs().train_env
    rep = regret_decompose(env, noisy_recognition(0.1), delta_optimal_decision(0.1), ValuationSpec(0.9))
    assert rep.r_rec == pytest.approx(0.271, abs=1e-3)
    assert rep.r_dec == pytest.approx(0.312, abs=1e-3)
    assert rep.r_total == rep.r_rec + rep.r_dec
    assert not rep.v_star_is_upper_bound


def test_regret_trivial_cases():
    env = build_worked_envs().train_env
    spec = ValuationSpec(0.9)
    opt = DecisionPolicy.deterministic([1, 1, 0], 2)
    rep = regret_decompose(env, RecognitionPolicy(np.eye(3)), opt, spec)
    assert abs(rep.r_total) < 1e-12 and abs(rep.r_rec) < 1e-12 and abs(rep.r_dec) < 1e-12
    rho = noisy_recognition(0.1)
    best, _ = best_deterministic_decision(env, rho, spec)
    rep = regret_decompose(env, rho, best, spec)
    assert abs(rep.r_dec) < 1e-12
    assert rep.r_rec == pytest.approx(rep.r_total, abs=1e-12)


def test_regret_upper_bound_flag(rng):
    env = random_env(rng, 3, 2, 2)
    rep = regret_decompose(env, random_rho(rng, 2, 2), random_pi(rng, 2, 2), ValuationSpec(0.9))
    assert rep.v_star_is_upper_bound
    assert rep.to_dict()["kind"] == "regret"


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nonnegativity_random_envs(seed):
    """r_rec >= 0 always; r_dec >= 0 for deterministic pi, and for stochastic pi
    under identity observation and recognition (stochastic memoryless policies
    can otherwise beat every deterministic one)."""
    rng = np.random.default_rng(seed)
    n_s, n_a, n_z = (int(x) for x in rng.integers(1, 5, size=3))
    spec = ValuationSpec(float(rng.uniform(0.5, 0.95)))
    env = random_env(rng, n_s, n_a, int(rng.integers(1, 5)), terminals=bool(rng.integers(2)))
    rho = random_rho(rng, env.n_obs, n_z)
    rep = regret_decompose(env, rho, random_pi(rng, n_z, n_a, deterministic=True), spec)
    assert rep.r_rec >= -1e-9 and rep.r_dec >= -1e-9
    assert rep.r_total == rep.r_rec + rep.r_dec
    env_id = random_env(rng, n_s, n_a, identity_obs=True)
    rep = regret_decompose(env_id, RecognitionPolicy(np.eye(n_s)), random_pi(rng, n_s, n_a), spec)
    assert rep.r_rec >= -1e-9 and rep.r_dec >= -1e-9


def test_identity_enumeration_equals_optimum_on_50_envs(rng):
    for _ in range(50):
        n_s, n_a = (int(x) for x in rng.integers(1, 5, size=2))
        env = random_env(rng, n_s, n_a, identity_obs=True, terminals=bool(rng.integers(2)))
        spec = ValuationSpec(float(rng.uniform(0.5, 0.95)))
        v_opt, _ = optimal_value(env, spec)
        _, v = best_deterministic_decision(env, RecognitionPolicy(np.eye(n_s)), spec)
        assert v == pytest.approx(value_at(env, v_opt), abs=1e-9)


def test_generalization_examples():
    b = build_worked_envs()
    spec = ValuationSpec(0.9)
    under, over = appendix_recognitions()
    rep = generalization_decompose_exact(b.train_env_phased, b.test_env, under, spec, intermediary_start=0)
    assert (rep.gr, rep.gr_rec, rep.gr_dec) == pytest.approx((2.377, 1.748, 0.629), abs=2e-3)
    assert rep.gr == rep.gr_rec + rep.gr_dec
    rep = generalization_decompose_exact(b.train_env_phased, b.test_env, over, spec)
    assert (rep.gr, rep.gr_rec, rep.gr_dec) == pytest.approx((3.837, 0.0, 3.837), abs=2e-3)
    pi_u, _ = best_deterministic_decision(b.train_env_phased, under, spec)
    pi_o, _ = best_deterministic_decision(b.train_env_phased, over, spec)
    assert generalization_error(b.train_env_phased, b.test_env, under, pi_u, spec) == pytest.approx(1.903, abs=2e-3)
    assert generalization_error(b.train_env_phased, b.test_env, over, pi_o, spec) == pytest.approx(3.363, abs=2e-3)


def test_generalization_same_env_is_zero():
    b = build_worked_envs()
    spec = ValuationSpec(0.9)
    env = b.train_env
    rep = generalization_decompose_exact(env, env, RecognitionPolicy(np.eye(3)), spec)
    assert abs(rep.gr) < 1e-12 and abs(rep.gr_rec) < 1e-12 and abs(rep.gr_dec) < 1e-12
    pi = DecisionPolicy.deterministic([1, 0, 1], 2)
    assert generalization_error(env, env, noisy_recognition(0.2), pi, spec) == 0.0


def test_reports_are_frozen_and_exact():
    r = RegretReport(1.0, 0.7, 0.3)
    assert r.r_total == r.r_rec + r.r_dec
    g = GenRegretReport(1.0, 0.4, 0.1, 0.9)
    assert g.gr == g.gr_rec + g.gr_dec and g.ge == pytest.approx(0.8)
    with pytest.raises(Exception):
        r.v_star = 2.0
