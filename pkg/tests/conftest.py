import numpy as np
import pytest

import riskshare as rs
from riskshare.sharing import RiskSharingProblem


@pytest.fixture(scope="session")
def trinomial():
    """Symmetric three-state market with one asset of increments (+1, 0, -1)."""
    return rs.FiniteMarket(np.array([1 / 3, 1 / 3, 1 / 3]),
                           np.array([[1.0, 0.0, -1.0]]))


@pytest.fixture(scope="session")
def mid_claim():
    """Pays 1 in the flat state, 0 elsewhere; not replicable."""
    return rs.Claim(np.array([0.0, 1.0, 0.0]))


@pytest.fixture(scope="session")
def exp_agents():
    u = rs.exponential(1.0)
    return rs.Agent(u, 0.0, "seller"), rs.Agent(u, 0.0, "buyer")


@pytest.fixture(scope="session")
def canonical_problem(trinomial, mid_claim, exp_agents):
    seller, buyer = exp_agents
    return RiskSharingProblem(trinomial, seller, buyer, mid_claim, 0.5)


@pytest.fixture(scope="session")
def quadrinomial():
    return rs.FiniteMarket(np.array([0.25] * 4),
                           np.array([[1.5, 0.5, -0.5, -1.5]]))


@pytest.fixture(scope="session")
def quad_claim():
    return rs.Claim(np.array([1.2, 0.4, 0.1, 0.0]))


@pytest.fixture(scope="session")
def log_problem(quadrinomial, quad_claim):
    seller = rs.Agent(rs.log(), 2.0, "seller")
    buyer = rs.Agent(rs.log(), 2.0, "buyer")
    return RiskSharingProblem(quadrinomial, seller, buyer, quad_claim, 0.5)


def random_incomplete_market(rng, n_states, d=1):
    """Sample a validated incomplete market with one asset."""
    for _ in range(100):
        probs = rng.dirichlet(np.ones(n_states) * 3.0)
        if probs.min() < 0.02:
            continue
        incr = np.sort(rng.uniform(-2.0, 2.0, size=n_states))[::-1]
        if not (incr.max() > 0.1 and incr.min() < -0.1):
            continue
        try:
            return rs.FiniteMarket(probs, incr.reshape(1, -1))
        except Exception:
            continue
    raise RuntimeError("failed to sample a market")
