import numpy as np
import pytest

from regretscope.mdp import DecisionPolicy, FiniteEnv, RecognitionPolicy


def random_rows(rng, n_rows, width, sparse=True):
    """Random stochastic rows; with ``sparse`` some entries are exactly zero."""
    rows = rng.dirichlet(np.ones(width), size=n_rows)
    if sparse and width > 1:
        mask = rng.random((n_rows, width)) < 0.3
        mask[np.arange(n_rows), rng.integers(width, size=n_rows)] = False
        rows = np.where(mask, 0.0, rows)
        rows /= rows.sum(axis=1, keepdims=True)
    return rows


def random_env(rng, n_s, n_a, n_x=None, identity_obs=False, terminals=False):
    n_x = n_s if identity_obs else (n_x or n_s)
    tau = random_rows(rng, n_s * n_a, n_s).reshape(n_s, n_a, n_s)
    omega = np.eye(n_s) if identity_obs else random_rows(rng, n_s, n_x)
    reward = rng.uniform(-1.0, 1.0, size=n_s)
    terminal = np.zeros(n_s, dtype=bool)
    if terminals and n_s > 1:
        t = int(rng.integers(n_s))
        terminal[t] = True
        tau[t] = 0.0
        tau[t, :, t] = 1.0
    sigma = rng.dirichlet(np.ones(n_s))
    return FiniteEnv(sigma, tau, omega, reward, terminal)


def random_rho(rng, n_x, n_z):
    return RecognitionPolicy(random_rows(rng, n_x, n_z))


def random_pi(rng, n_z, n_a, deterministic=False):
    if deterministic:
        return DecisionPolicy.deterministic(rng.integers(n_a, size=n_z).tolist(), n_a)
    return DecisionPolicy(random_rows(rng, n_z, n_a))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
