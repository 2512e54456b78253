import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import riskshare as rs
from riskshare.errors import ArbitrageDetected, CompleteMarket
from riskshare.market import upper_hedging_value, validate_market
from riskshare.oracles import arbitrage_bounds_by_vertices

from conftest import random_incomplete_market


def test_trinomial_valid_and_one_dimensional(trinomial):
    assert trinomial.polytope_dim == 1
    assert validate_market(trinomial) == 1


def test_two_state_single_asset_is_complete():
    with pytest.raises(CompleteMarket):
        rs.FiniteMarket(np.array([0.5, 0.5]), np.array([[1.0, -1.0]]))


def test_all_positive_increments_is_arbitrage():
    with pytest.raises(ArbitrageDetected):
        rs.FiniteMarket(np.array([1 / 3, 1 / 3, 1 / 3]),
                        np.array([[1.0, 2.0, 3.0]]))


def test_probability_validation():
    with pytest.raises(ValueError):
        rs.FiniteMarket(np.array([0.5, 0.5, 0.1]), np.array([[1.0, 0.0, -1.0]]))
    with pytest.raises(ValueError):
        rs.FiniteMarket(np.array([0.5, 0.5, 0.0]), np.array([[1.0, 0.0, -1.0]]))


def test_arbitrage_bounds_midstate_claim(trinomial, mid_claim):
    bounds = rs.arbitrage_bounds(trinomial, mid_claim)
    assert bounds.lower == pytest.approx(0.0, abs=1e-10)
    assert bounds.upper == pytest.approx(1.0, abs=1e-10)
    assert not bounds.attained_lower and not bounds.attained_upper


def test_arbitrage_bounds_replicable_and_constant(trinomial):
    bounds = rs.arbitrage_bounds(trinomial, [1.0, 0.0, -1.0])
    assert bounds.lower == pytest.approx(0.0, abs=1e-10)
    assert bounds.upper == pytest.approx(0.0, abs=1e-10)
    assert bounds.attained_lower and bounds.attained_upper

    c = 0.7
    bounds = rs.arbitrage_bounds(trinomial, [c, c, c])
    assert bounds.lower == pytest.approx(c, abs=1e-10)
    assert bounds.upper == pytest.approx(c, abs=1e-10)


def test_is_replicable(trinomial, mid_claim):
    ok, cash, theta = rs.is_replicable(trinomial, [1.0, 0.0, -1.0])
    assert ok and cash == pytest.approx(0.0, abs=1e-12)
    assert theta[0] == pytest.approx(1.0, abs=1e-12)

    assert not rs.is_replicable(trinomial, mid_claim)[0]

    ok, cash, theta = rs.is_replicable(trinomial, [5.0, 5.0, 5.0])
    assert ok and cash == pytest.approx(5.0) and theta[0] == pytest.approx(0.0, abs=1e-12)


def test_upper_hedging_value(trinomial, mid_claim):
    assert upper_hedging_value(trinomial, mid_claim) == pytest.approx(1.0, abs=1e-10)
    assert upper_hedging_value(trinomial, [0.3, 0.3, 0.3]) == pytest.approx(0.3)
    assert upper_hedging_value(trinomial, [1.0, 0.0, -1.0]) == pytest.approx(0.0, abs=1e-10)


def test_upper_hedging_matches_interval_endpoints(trinomial, mid_claim):
    bounds = rs.arbitrage_bounds(trinomial, mid_claim)
    assert upper_hedging_value(trinomial, mid_claim) == pytest.approx(bounds.upper)
    assert upper_hedging_value(trinomial, -mid_claim.payoffs) == pytest.approx(-bounds.lower)


def test_bounds_equal_iff_replicable(trinomial):
    rng = np.random.default_rng(5)
    for _ in range(20):
        payoffs = rng.normal(size=3)
        bounds = rs.arbitrage_bounds(trinomial, payoffs)
        replicable = rs.is_replicable(trinomial, payoffs)[0]
        assert (bounds.width <= 1e-9) == replicable


@settings(max_examples=30, deadline=None)
@given(cash=st.floats(-5.0, 5.0), seed=st.integers(0, 10_000))
def test_translation_by_cash(cash, seed):
    rng = np.random.default_rng(seed)
    market = random_incomplete_market(rng, 4)
    payoffs = rng.normal(size=4)
    base = rs.arbitrage_bounds(market, payoffs)
    shifted = rs.arbitrage_bounds(market, payoffs + cash)
    assert shifted.lower == pytest.approx(base.lower + cash, abs=1e-8)
    assert shifted.upper == pytest.approx(base.upper + cash, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_statewise_dominance_orders_intervals(seed):
    rng = np.random.default_rng(seed)
    market = random_incomplete_market(rng, 5)
    low = rng.normal(size=5)
    high = low + rng.uniform(0.0, 2.0, size=5)
    b_low = rs.arbitrage_bounds(market, low)
    b_high = rs.arbitrage_bounds(market, high)
    assert b_low.lower <= b_high.lower + 1e-9
    assert b_low.upper <= b_high.upper + 1e-9


def test_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(11)
    for n_states in (3, 4, 5, 6, 8):
        market = random_incomplete_market(rng, n_states)
        for _ in range(3):
            payoffs = rng.normal(size=n_states)
            bounds = rs.arbitrage_bounds(market, payoffs)
            v_lo, v_hi = arbitrage_bounds_by_vertices(market, payoffs)
            assert bounds.lower == pytest.approx(v_lo, abs=1e-10)
            assert bounds.upper == pytest.approx(v_hi, abs=1e-10)


def test_claim_arithmetic(mid_claim):
    neg = -mid_claim
    assert np.allclose(neg.payoffs, [0.0, -1.0, 0.0])
    shifted = mid_claim + 2.0
    assert np.allclose(shifted.payoffs, [2.0, 3.0, 2.0])
    with pytest.raises(ValueError):
        rs.Claim(np.array([np.inf, 0.0]))
