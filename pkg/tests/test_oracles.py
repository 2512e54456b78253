import numpy as np
import pytest

import riskshare as rs
from riskshare.errors import EmptyFeasibleGrid
from riskshare.oracles import (
    GridSpec,
    brute_force_risk_sharing,
    brute_force_value,
    default_grid_spec,
    martingale_vertices,
    price_sweep,
)
from riskshare.sharing import solve


def test_brute_force_value_symmetric(trinomial, mid_claim):
    val, theta = brute_force_value(trinomial, rs.exponential(1.0), 0.0, None,
                                   (-2.0, 2.0), 1e-3)
    assert val == pytest.approx(-1.0, abs=1e-6)
    assert theta[0] == pytest.approx(0.0, abs=1e-3)

    val, theta = brute_force_value(trinomial, rs.exponential(1.0), 0.0, -mid_claim,
                                   (-2.0, 2.0), 1e-3)
    assert val == pytest.approx(-(2 + np.e) / 3, abs=1e-6)


def test_brute_force_value_replicable_shift(trinomial):
    # adding a replicable claim shifts the optimal holding by the hedge
    base_val, base_theta = brute_force_value(trinomial, rs.exponential(1.0), 0.0,
                                             None, (-3.0, 3.0), 1e-3)
    claim = np.array([-1.0, 0.0, 1.0])  # equals -1 * increments
    val, theta = brute_force_value(trinomial, rs.exponential(1.0), 0.0, claim,
                                   (-3.0, 3.0), 1e-3)
    assert theta[0] - base_theta[0] == pytest.approx(1.0, abs=2e-3)
    assert val == pytest.approx(base_val, abs=1e-6)


def test_refining_grid_never_worsens(trinomial, mid_claim):
    coarse, _ = brute_force_value(trinomial, rs.exponential(1.3), 0.1, mid_claim,
                                  (-2.0, 2.0), 1e-2)
    fine, _ = brute_force_value(trinomial, rs.exponential(1.3), 0.1, mid_claim,
                                (-2.0, 2.0), 1e-3)
    assert fine >= coarse - 1e-15


def test_risk_sharing_oracle_certifies_solver(canonical_problem, log_problem):
    for problem in (canonical_problem, log_problem):
        sol = solve(problem)
        bf = brute_force_risk_sharing(problem, default_grid_spec(problem, 1e-3))
        assert not bf.on_boundary
        assert abs(bf.objective - sol.objective) <= 2e-3
        assert abs(bf.price - sol.price) <= 5e-3
        # grid optimum cannot beat the exact optimum
        assert bf.objective >= sol.objective - 1e-9


def test_oracle_prices_track_weight_ordering(trinomial, mid_claim):
    from riskshare.sharing import RiskSharingProblem

    agent = rs.Agent(rs.exponential(1.0), 0.0)
    prices = {}
    for lam in (0.5, 0.9):
        problem = RiskSharingProblem(trinomial, agent, agent, mid_claim, lam)
        bf = brute_force_risk_sharing(problem, default_grid_spec(problem, 1e-3))
        prices[lam] = bf.price
        assert abs(bf.price - solve(problem).price) <= 5e-3
    # the independent oracle fixes the direction: heavier seller weight,
    # higher price
    assert prices[0.9] > prices[0.5]


def test_empty_grid_detected(canonical_problem):
    # buyer losses always exceed u(x) - U(inf) = -1, so this window is empty
    spec = GridSpec(eps_s_range=(5.0, 6.0), eps_b_range=(-10.0, -5.0),
                    eps_resolution=1e-3)
    with pytest.raises(EmptyFeasibleGrid):
        brute_force_risk_sharing(canonical_problem, spec)
    # a seller window below the loss domain is empty as well
    spec = GridSpec(eps_s_range=(-3.0, -2.0), eps_b_range=(-0.5, 0.5),
                    eps_resolution=1e-3)
    with pytest.raises(EmptyFeasibleGrid):
        brute_force_risk_sharing(canonical_problem, spec)


def test_price_sweep_matches_solver(canonical_problem):
    sol = solve(canonical_problem)
    argmax, _ = price_sweep(canonical_problem, (-1.0, 2.0), 5e-4)
    assert abs(argmax - sol.price) <= 5e-4


def test_price_sweep_ordering_across_weights(trinomial, mid_claim):
    from riskshare.sharing import RiskSharingProblem

    agent = rs.Agent(rs.exponential(1.0), 0.0)
    p_half, _ = price_sweep(RiskSharingProblem(trinomial, agent, agent, mid_claim, 0.5),
                            (-2.0, 3.0), 1e-3)
    p_skew, _ = price_sweep(RiskSharingProblem(trinomial, agent, agent, mid_claim, 0.8),
                            (-2.0, 3.0), 1e-3)
    assert p_skew > p_half


def test_vertices_of_trinomial(trinomial):
    verts = martingale_vertices(trinomial)
    assert verts.shape[0] == 2
    expected = {(0.0, 1.0, 0.0), (0.5, 0.0, 0.5)}
    got = {tuple(np.round(v, 9)) for v in verts}
    assert got == expected
