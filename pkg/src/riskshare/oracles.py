"""Independent brute-force computations for certifying the solvers.

Everything here avoids the production solution paths: holdings are found by
grid search instead of Newton, the loss split by filtering a 2-d grid
instead of multiplier bisection, and martingale-polytope bounds by vertex
enumeration instead of the LP.  Shipped (not test-only) so users can certify
their own instances.
"""

import itertools
import math
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyFeasibleGrid
from .market import FiniteMarket, as_claim
from .sharing import LossTransform, RiskSharingProblem, identity_transform
from .utilities import Agent, Utility

__all__ = [
    "GridSpec",
    "default_grid_spec",
    "grid_spec_for_price_window",
    "certified_risk_sharing",
    "brute_force_value",
    "brute_force_risk_sharing",
    "BruteForceSolution",
    "price_sweep",
    "martingale_vertices",
    "arbitrage_bounds_by_vertices",
]


@dataclass(frozen=True)
class GridSpec:
    """Search windows and resolutions for the brute-force computations."""

    eps_s_range: tuple
    eps_b_range: tuple
    eps_resolution: float = 1e-3
    price_range: tuple = (-5.0, 5.0)
    price_resolution: float = 1e-3
    theta_range: tuple = (-10.0, 10.0)
    theta_resolution: float = 1e-3

    def __post_init__(self):
        for res in (self.eps_resolution, self.price_resolution, self.theta_resolution):
            if res <= 0.0:
                raise ValueError("grid resolutions must be positive")
        for rng in (self.eps_s_range, self.eps_b_range, self.price_range,
                    self.theta_range):
            if not (np.isfinite(rng[0]) and np.isfinite(rng[1]) and rng[0] < rng[1]):
                raise ValueError("grid ranges must be finite nonempty intervals")


def grid_spec_for_price_window(problem: RiskSharingProblem, p_lo: float,
                               p_hi: float,
                               eps_resolution: float = 1e-3) -> GridSpec:
    """Loss windows covering a given price window through the loss maps.

    Positive-domain price floors/caps clip the window before mapping.
    """
    s_curve = problem.seller_curve()
    b_curve = problem.buyer_curve()
    s_floor, b_cap = s_curve.price_range()[0], b_curve.price_range()[1]
    p_lo_s = p_lo
    if np.isfinite(s_floor):
        p_lo_s = max(p_lo, s_floor + 1e-6 * max(1.0, abs(s_floor)))
    p_hi_b = p_hi
    if np.isfinite(b_cap):
        p_hi_b = min(p_hi, b_cap - 1e-6 * max(1.0, abs(b_cap)))
    # seller loss decreases in price; buyer loss increases
    eps_s_range = (s_curve.loss_at_price(p_hi), s_curve.loss_at_price(p_lo_s))
    eps_b_range = (b_curve.loss_at_price(p_lo), b_curve.loss_at_price(p_hi_b))
    return GridSpec(eps_s_range, eps_b_range, eps_resolution,
                    (p_lo, p_hi), eps_resolution)


def default_grid_spec(problem: RiskSharingProblem, eps_resolution: float = 1e-3,
                      pad: float = 0.35) -> GridSpec:
    """Windows derived from the arbitrage interval, independent of the solver.

    Skewed weights push the optimal price away from the no-arbitrage band
    roughly like log(lam/(1-lam)), so the padding grows accordingly.
    """
    from .market import arbitrage_bounds

    bounds = arbitrage_bounds(problem.market, problem.claim)
    width = max(bounds.width, 0.5)
    lam = problem.lam
    skew = abs(math.log(lam / (1.0 - lam))) * max(0.5, width)
    p_lo = bounds.lower - pad * width - skew
    p_hi = bounds.upper + pad * width + skew
    return grid_spec_for_price_window(problem, p_lo, p_hi, eps_resolution)


def brute_force_value(market: FiniteMarket, utility: Utility, x: float, claim,
                      theta_range: tuple = (-10.0, 10.0),
                      resolution: float = 1e-3):
    """Grid maximum of the expected utility over holdings (1 or 2 assets)."""
    claim = as_claim(claim, market.n_states)
    d = market.n_assets
    if d > 2:
        raise ValueError("brute-force holding search supports at most 2 assets")
    axis = np.arange(theta_range[0], theta_range[1] + resolution, resolution)
    p, S = market.probs, market.increments
    if d == 1:
        wealth = x + claim.payoffs + axis[:, None] * S[0]
        vals = utility.evaluate(wealth) @ p
        i = int(np.argmax(vals))
        return float(vals[i]), np.array([axis[i]])
    best = (-np.inf, None)
    for t0 in axis:
        wealth = x + claim.payoffs + t0 * S[0] + axis[:, None] * S[1]
        vals = utility.evaluate(wealth) @ p
        i = int(np.argmax(vals))
        if vals[i] > best[0]:
            best = (float(vals[i]), np.array([t0, axis[i]]))
    return best


@dataclass(frozen=True)
class BruteForceSolution:
    eps_s: float
    eps_b: float
    objective: float
    price: float
    on_boundary: bool


def brute_force_risk_sharing(problem: RiskSharingProblem, grid: GridSpec,
                             psi_s: Optional[LossTransform] = None,
                             psi_b: Optional[LossTransform] = None) -> BruteForceSolution:
    """Grid minimizer of the weighted losses under the feasibility filter.

    For each seller loss on the grid, the cheapest buyer loss satisfying
    seller price <= buyer price is the buyer's loss AT the seller's price
    (the transforms are increasing), which is a direct value-function
    evaluation; the search then exhausts the seller grid.  Pairs whose buyer
    loss falls outside the buyer window are rejected, so a grid that misses
    the crossing region raises EmptyFeasibleGrid.
    """
    psi_s = psi_s or identity_transform
    psi_b = psi_b or identity_transform
    s_curve = problem.seller_curve()
    b_curve = problem.buyer_curve()

    eps_s = np.arange(grid.eps_s_range[0], grid.eps_s_range[1], grid.eps_resolution)
    eps_s = eps_s[eps_s > s_curve.a_lower + 1e-12]
    if eps_s.size == 0:
        raise EmptyFeasibleGrid("seller loss grid falls outside the curve domain")

    p_s = s_curve.price_batch(eps_s)
    eps_b = b_curve.loss_at_price_batch(p_s)
    feasible = (np.isfinite(eps_b)
                & (eps_b >= grid.eps_b_range[0]) & (eps_b <= grid.eps_b_range[1]))
    if not np.any(feasible):
        raise EmptyFeasibleGrid("no grid pair satisfies seller price <= buyer price "
                                "inside the buyer loss window")

    lam = problem.lam
    psi_s_vals = np.array([float(psi_s.fn(v)) for v in eps_s])
    psi_b_vals = np.array([float(psi_b.fn(v)) if np.isfinite(v) else np.inf
                           for v in eps_b])
    objective = np.where(feasible, lam * psi_s_vals + (1.0 - lam) * psi_b_vals,
                         np.inf)
    i = int(np.argmin(objective))
    margin = grid.eps_resolution
    on_boundary = (i in (0, eps_s.size - 1)
                   or eps_b[i] <= grid.eps_b_range[0] + margin
                   or eps_b[i] >= grid.eps_b_range[1] - margin)
    return BruteForceSolution(float(eps_s[i]), float(eps_b[i]), float(objective[i]),
                              float(p_s[i]), on_boundary)


def certified_risk_sharing(problem: RiskSharingProblem,
                           eps_resolution: float = 1e-3,
                           psi_s: Optional[LossTransform] = None,
                           psi_b: Optional[LossTransform] = None,
                           max_expansions: int = 8) -> BruteForceSolution:
    """Brute-force optimum with the price window widened until interior.

    Agent asymmetry can push the optimum outside the default window; the
    only feedback used to widen it is the grid argmin's own position, so the
    certification stays independent of the production solver.
    """
    spec = default_grid_spec(problem, eps_resolution)
    p_lo, p_hi = spec.price_range
    for _ in range(max_expansions):
        result = brute_force_risk_sharing(problem, spec, psi_s, psi_b)
        if not result.on_boundary:
            return result
        mid = 0.5 * (p_lo + p_hi)
        half = p_hi - p_lo
        p_lo, p_hi = mid - half, mid + half
        spec = grid_spec_for_price_window(problem, p_lo, p_hi, eps_resolution)
    raise EmptyFeasibleGrid("grid optimum stayed on the window boundary after "
                            "repeated expansion")


def price_sweep(problem: RiskSharingProblem, price_range: tuple,
                resolution: float = 5e-4):
    """Argmax of the residual-utility objective over a price grid.

    Ties resolve to the lowest price (first occurrence).
    """
    from .sharing import residual_risk_objective

    prices = np.arange(price_range[0], price_range[1] + resolution, resolution)
    vals = residual_risk_objective(problem, prices)
    i = int(np.argmax(vals))
    return float(prices[i]), float(vals[i])


def martingale_vertices(market: FiniteMarket, tol: float = 1e-10) -> np.ndarray:
    """All vertices of the closed martingale polytope by basis enumeration."""
    n = market.n_states
    if n > 12:
        raise ValueError("vertex enumeration limited to 12 states")
    M = np.vstack([market.increments, np.ones(n)])
    rhs = np.zeros(M.shape[0])
    rhs[-1] = 1.0
    r = np.linalg.matrix_rank(M)
    vertices = []
    for cols in itertools.combinations(range(n), r):
        sub = M[:, cols]
        if np.linalg.matrix_rank(sub) < r:
            continue
        q_sub, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.abs(sub @ q_sub - rhs).max() > tol:
            continue
        if q_sub.min() < -tol:
            continue
        q = np.zeros(n)
        q[list(cols)] = np.clip(q_sub, 0.0, None)
        if not any(np.abs(q - v).max() < 1e-9 for v in vertices):
            vertices.append(q)
    return np.array(vertices)


def arbitrage_bounds_by_vertices(market: FiniteMarket, claim) -> tuple:
    """(inf, sup) of the claim expectation via vertex enumeration."""
    claim = as_claim(claim, market.n_states)
    verts = martingale_vertices(market)
    vals = verts @ claim.payoffs
    return float(vals.min()), float(vals.max())
