import math

import numpy as np
import pytest

import riskshare as rs
from riskshare.curves import ReservationCurve, indifference_price
from riskshare.errors import DomainError
from riskshare.maximization import value_function


@pytest.fixture(scope="module")
def exp_curves(trinomial, mid_claim):
    seller = rs.Agent(rs.exponential(1.0), 0.0, "seller")
    buyer = rs.Agent(rs.exponential(1.0), 0.0, "buyer")
    return (ReservationCurve(trinomial, seller, mid_claim, "seller"),
            ReservationCurve(trinomial, buyer, mid_claim, "buyer"))


@pytest.fixture(scope="module")
def log_curves(quadrinomial, quad_claim):
    seller = rs.Agent(rs.log(), 2.0, "seller")
    buyer = rs.Agent(rs.log(), 2.0, "buyer")
    return (ReservationCurve(quadrinomial, seller, quad_claim, "seller"),
            ReservationCurve(quadrinomial, buyer, quad_claim, "buyer"))


def test_indifference_prices_trinomial(trinomial, mid_claim):
    seller = rs.Agent(rs.exponential(1.0), 0.0, "seller")
    buyer = rs.Agent(rs.exponential(1.0), 0.0, "buyer")
    v_s = indifference_price(trinomial, seller, mid_claim, "seller")
    v_b = indifference_price(trinomial, buyer, mid_claim, "buyer")
    assert v_s == pytest.approx(math.log((2.0 + math.e) / 3.0), abs=1e-9)
    assert v_b == pytest.approx(-math.log((2.0 + math.exp(-1.0)) / 3.0), abs=1e-9)
    # indifference prices are no-arbitrage prices
    bounds = rs.arbitrage_bounds(trinomial, mid_claim)
    assert bounds.lower < v_b < v_s < bounds.upper


def test_replicable_claim_prices_at_unique_value(trinomial):
    claim = [1.0, 0.0, -1.0]
    for utility, x in ((rs.exponential(2.0), 0.0), (rs.log(), 3.0)):
        agent = rs.Agent(utility, x)
        assert indifference_price(trinomial, agent, claim, "seller") == \
            pytest.approx(0.0, abs=1e-9)
        assert indifference_price(trinomial, agent, claim, "buyer") == \
            pytest.approx(0.0, abs=1e-9)


def test_zero_risk_reproduces_indifference(exp_curves):
    s_curve, b_curve = exp_curves
    assert s_curve.price(0.0) == pytest.approx(math.log((2.0 + math.e) / 3.0), abs=1e-10)
    assert b_curve.price(0.0) == pytest.approx(-math.log((2.0 + math.exp(-1)) / 3.0),
                                               abs=1e-10)


def test_below_domain_branches(exp_curves):
    s_curve, b_curve = exp_curves
    assert s_curve.a_lower == pytest.approx(-1.0)
    assert s_curve.price(-1.0) == math.inf
    assert s_curve.price(-1.5) == math.inf
    assert b_curve.price(-1.0) == -math.inf
    with pytest.raises(DomainError):
        s_curve.slope(-1.2)


def test_exponential_closed_forms(exp_curves, trinomial, mid_claim):
    s_curve, b_curve = exp_curves
    u_x = -1.0
    v_s = s_curve.price(0.0)
    v_b = b_curve.price(0.0)
    for eps in np.linspace(-0.9, 3.0, 40):
        expected_s = v_s - math.log(1.0 - eps / u_x)
        expected_b = v_b + math.log(1.0 - eps / u_x)
        assert s_curve.price(eps) == pytest.approx(expected_s, abs=1e-10)
        assert b_curve.price(eps) == pytest.approx(expected_b, abs=1e-10)
        # derivative closed forms
        assert s_curve.slope(eps) == pytest.approx(1.0 / (u_x - eps), rel=1e-9)
        assert b_curve.slope(eps) == pytest.approx(-1.0 / (u_x - eps), rel=1e-9)


def test_buyer_slope_at_zero_is_inverse_gamma(trinomial, mid_claim):
    for gamma in (0.5, 1.0, 2.0):
        buyer = rs.Agent(rs.exponential(gamma), 0.0, "buyer")
        curve = ReservationCurve(trinomial, buyer, mid_claim, "buyer")
        # u(x) = -1 at x = 0, so the zero-risk slope is 1/gamma
        assert curve.slope(0.0) == pytest.approx(1.0 / gamma, rel=1e-9)


def test_round_trip_loss(exp_curves, log_curves):
    for curve in (*exp_curves, *log_curves):
        lo = curve.a_lower + 0.05 if np.isfinite(curve.a_lower) else -2.0
        grid = np.linspace(lo + 1e-6, lo + 3.0, 100)
        for eps in grid:
            assert curve.loss_at_price(curve.price(eps)) == pytest.approx(
                float(eps), abs=1e-8)


def test_monotonicity_and_curvature(exp_curves, log_curves):
    for s_curve, b_curve in (exp_curves, log_curves):
        lo = max(s_curve.a_lower, b_curve.a_lower)
        lo = lo + 0.05 if np.isfinite(lo) else -1.5
        eps = np.linspace(lo + 1e-6, lo + 2.5, 100)
        p_s = s_curve.price_batch(eps)
        p_b = b_curve.price_batch(eps)
        h = eps[1] - eps[0]
        assert np.all(np.diff(p_s) < -1e-10 * h)
        assert np.all(np.diff(p_b) > 1e-10 * h)
        assert np.all(np.diff(p_s, 2) > 1e-10 * h * h)
        assert np.all(np.diff(p_b, 2) < -1e-10 * h * h)


def test_slope_matches_finite_difference(exp_curves, log_curves):
    h = 1e-6
    for curve in (*exp_curves, *log_curves):
        for eps in (0.02, 0.4, 1.1):
            fd = (curve.price(eps + h) - curve.price(eps - h)) / (2 * h)
            assert curve.slope(eps) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_nonarbitrage_loss_interval_trinomial(exp_curves, trinomial, mid_claim):
    s_curve, _ = exp_curves
    lo, hi = s_curve.nonarbitrage_loss_interval()
    assert lo == pytest.approx(-1.0 + math.exp(-1.0) * (2.0 + math.e) / 3.0, rel=1e-9)
    assert hi == pytest.approx(-1.0 + (2.0 + math.e) / 3.0, rel=1e-9)
    assert lo < 0.0 < hi  # zero risk (the indifference price) is always admissible


def test_nonarbitrage_interval_replicable_degenerates(trinomial):
    agent = rs.Agent(rs.exponential(1.0), 0.0)
    curve = ReservationCurve(trinomial, agent, [1.0, 0.0, -1.0], "seller")
    lo, hi = curve.nonarbitrage_loss_interval()
    assert hi - lo <= 1e-9


def test_curve_prices_inside_bounds_iff_loss_inside_interval(exp_curves, trinomial,
                                                             mid_claim):
    s_curve, b_curve = exp_curves
    bounds = rs.arbitrage_bounds(trinomial, mid_claim)
    for curve in (s_curve, b_curve):
        lo, hi = curve.nonarbitrage_loss_interval()
        for eps in np.linspace(lo - 0.4, hi + 0.4, 41):
            if eps <= curve.a_lower:
                continue
            inside = lo < eps < hi
            price = curve.price(eps)
            assert inside == (bounds.lower < price < bounds.upper)


def test_type1_curve_sweeps_all_prices(exp_curves):
    s_curve, b_curve = exp_curves
    assert s_curve.price_range() == (-math.inf, math.inf)
    assert s_curve.price(40.0) < -3.0
    assert s_curve.price(-1.0 + 1e-9) > 15.0
    assert b_curve.price(40.0) > 3.0


def test_type2_price_range_endpoints(log_curves, quadrinomial, quad_claim):
    s_curve, b_curve = log_curves
    floor = rs.market.upper_hedging_value(quadrinomial, quad_claim) - 2.0
    cap = 2.0 - rs.market.upper_hedging_value(quadrinomial, -quad_claim.payoffs)
    assert s_curve.price_range()[0] == pytest.approx(floor)
    assert b_curve.price_range()[1] == pytest.approx(cap)
    # large-loss limits approach the super-replication bounds
    assert s_curve.price(12.0) == pytest.approx(floor, abs=1e-6)
    assert b_curve.price(12.0) == pytest.approx(cap, abs=1e-6)
    assert abs(s_curve.price(15.0) - floor) < abs(s_curve.price(9.0) - floor)


def test_wealth_sensitivity_exponential(trinomial, mid_claim):
    h = 1e-6
    for eps in (-0.5, 0.3, 1.0):
        vals = []
        for x in (0.2 - h, 0.2 + h):
            agent = rs.Agent(rs.exponential(1.0), x, "seller")
            vals.append(ReservationCurve(trinomial, agent, mid_claim, "seller").price(eps))
        fd = (vals[1] - vals[0]) / (2 * h)
        u_x = value_function(trinomial, rs.exponential(1.0), 0.2).value
        assert fd == pytest.approx(eps / (u_x - eps), rel=1e-4, abs=1e-6)


def test_price_batch_matches_scalar(log_curves):
    s_curve, _ = log_curves
    eps = np.linspace(-0.4, 1.4, 17)
    batch = s_curve.price_batch(eps)
    for e, p in zip(eps[::4], batch[::4]):
        assert p == pytest.approx(s_curve.price(float(e)), abs=1e-9)


def test_memoization_returns_identical_values(exp_curves):
    s_curve, _ = exp_curves
    first = s_curve.price(0.123456)
    second = s_curve.price(0.123456)
    assert first == second


def test_bounded_loss_power_curve_raises_beyond_range(quadrinomial, quad_claim):
    from riskshare.errors import OutOfRange, RiskShareError

    # R < 1 keeps U(0) finite, so the seller's loss is capped; far beyond the
    # cap no price reproduces the requested loss
    agent = rs.Agent(rs.power(0.5), 3.0, "seller")
    curve = ReservationCurve(quadrinomial, agent, quad_claim, "seller")
    assert np.isfinite(curve.price(0.5))
    with pytest.raises(RiskShareError):
        curve.price(500.0)
