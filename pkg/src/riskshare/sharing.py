"""Risk-sharing prices: minimize a weighted sum of the two agents' utility
losses subject to the transaction being feasible.

The optimum is characterized by a positive multiplier m with

    u_s'(x_s + p_s; -B) = m / lam        (seller)
    u_b'(x_b - p_b;  B) = m / (1 - lam)  (buyer)
    p_s = p_b                            (the constraint binds)

where p_s(m) is strictly decreasing and p_b(m) strictly increasing in m, so
a bisection in log m pins the unique crossing.  Exponential agents admit a
closed form used as an independent cross-check.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .curves import ReservationCurve, indifference_price
from .errors import (
    InfeasibleWealth,
    NoOverlap,
    NonConvergence,
    NonMonotonePsi,
    WrongUtilityKind,
)
from .market import Claim, FiniteMarket, arbitrage_bounds, as_claim, upper_hedging_value
from .maximization import inverse_marginal, value_function, value_function_batch
from .utilities import Agent, ExponentialUtility

__all__ = [
    "RiskSharingProblem",
    "RiskSharingSolution",
    "LossTransform",
    "identity_transform",
    "solve",
    "exponential_closed_form",
    "lambda_sweep",
    "SweepRow",
    "lambda_bounds",
    "exponential_lambda_for_price",
    "solve_generalized",
    "residual_risk_objective",
]

PRICE_TOL = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class RiskSharingProblem:
    """One claim, one seller, one buyer, and the loss weight on the seller."""

    market: FiniteMarket
    seller: Agent
    buyer: Agent
    claim: Claim
    lam: float

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("the sharing weight must lie strictly in (0, 1)")
        object.__setattr__(self, "claim", as_claim(self.claim, self.market.n_states))
        self._check_wealth_floors()

    def _check_wealth_floors(self):
        """Positive-domain agents need wealth above the super-replication floors."""
        bounds = None
        if not self.seller.utility.whole_line:
            bounds = arbitrage_bounds(self.market, self.claim)
            floor_s = upper_hedging_value(self.market, self.claim.payoffs)
            need = max(floor_s, floor_s - bounds.upper)
            if self.seller.initial_wealth <= need:
                raise InfeasibleWealth(
                    f"seller wealth {self.seller.initial_wealth:g} must exceed "
                    f"{need:g} (super-replication floor of the sold claim)"
                )
        if not self.buyer.utility.whole_line:
            if bounds is None:
                bounds = arbitrage_bounds(self.market, self.claim)
            floor_b = upper_hedging_value(self.market, -self.claim.payoffs)
            need = max(floor_b, floor_b + bounds.lower)
            if self.buyer.initial_wealth <= need:
                raise InfeasibleWealth(
                    f"buyer wealth {self.buyer.initial_wealth:g} must exceed "
                    f"{need:g} (super-replication floor of the bought claim)"
                )

    def seller_curve(self) -> ReservationCurve:
        return ReservationCurve(self.market, self.seller, self.claim, "seller")

    def buyer_curve(self) -> ReservationCurve:
        return ReservationCurve(self.market, self.buyer, self.claim, "buyer")


@dataclass(frozen=True)
class RiskSharingSolution:
    """Optimal loss split, multiplier, and the resulting transaction price."""

    eps_s: float
    eps_b: float
    multiplier: float
    price: float
    objective: float
    iterations: int = 0
    price_gap: float = 0.0
    converged: bool = True


def _price_ranges(problem: RiskSharingProblem):
    """Seller price floor and buyer price cap (finite for positive-domain agents)."""
    s_floor = -math.inf
    b_cap = math.inf
    if not problem.seller.utility.whole_line:
        s_floor = (upper_hedging_value(problem.market, problem.claim.payoffs)
                   - problem.seller.initial_wealth)
    if not problem.buyer.utility.whole_line:
        b_cap = (problem.buyer.initial_wealth
                 - upper_hedging_value(problem.market, -problem.claim.payoffs))
    return s_floor, b_cap


def _prices_at_multiplier(problem: RiskSharingProblem, m: float):
    """Candidate prices (p_s, p_b) solving the per-agent marginal equations."""
    w_s = inverse_marginal(problem.market, problem.seller.utility,
                           m / problem.lam, -problem.claim)
    w_b = inverse_marginal(problem.market, problem.buyer.utility,
                           m / (1.0 - problem.lam), problem.claim)
    return w_s - problem.seller.initial_wealth, problem.buyer.initial_wealth - w_b


def solve(problem: RiskSharingProblem, tol: float = PRICE_TOL,
          max_iter: int = MAX_ITER,
          bracket: tuple = (1e-12, 1e12)) -> RiskSharingSolution:
    """Unique minimizer of lam*eps_s + (1-lam)*eps_b over feasible trades.

    Bisects the multiplier in log scale; the seller candidate price is
    strictly decreasing and the buyer's strictly increasing in the
    multiplier, and their crossing is the risk-sharing price.
    """
    s_floor, b_cap = _price_ranges(problem)
    if b_cap <= s_floor + 1e-12 * max(1.0, abs(b_cap), abs(s_floor)):
        raise NoOverlap(
            f"seller price floor {s_floor:g} meets or exceeds buyer price cap "
            f"{b_cap:g}; the agents' attainable price ranges do not overlap"
        )

    lo, hi = math.log(bracket[0]), math.log(bracket[1])

    def gap(lm: float):
        try:
            p_s, p_b = _prices_at_multiplier(problem, math.exp(lm))
        except NonConvergence:
            # marginal target beyond double precision near a wealth floor:
            # prices sit at the range endpoints, so the gap sign is fixed
            return s_floor - b_cap, s_floor, b_cap
        return p_s - p_b, p_s, p_b

    g_lo, _, _ = gap(lo)
    expansions = 0
    while g_lo <= 0.0:
        lo -= 60.0
        expansions += 1
        if expansions > 10:
            raise NonConvergence("multiplier bracket expansion failed (low side)")
        g_lo, _, _ = gap(lo)
    g_hi, _, _ = gap(hi)
    expansions = 0
    while g_hi >= 0.0:
        hi += 60.0
        expansions += 1
        if expansions > 10:
            raise NonConvergence("multiplier bracket expansion failed (high side)")
        g_hi, _, _ = gap(hi)

    p_s = p_b = math.nan
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        g, p_s, p_b = gap(mid)
        if abs(p_s - p_b) <= tol * max(1.0, abs(p_s)):
            lo = hi = mid
            converged = True
            break
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            converged = abs(p_s - p_b) <= 1e3 * tol * max(1.0, abs(p_s))
            break
    if not converged:
        raise NonConvergence(
            f"multiplier bisection stalled: price gap {p_s - p_b:.3e} "
            f"after {iterations} iterations"
        )

    m_star = math.exp(0.5 * (lo + hi))
    p_s, p_b = _prices_at_multiplier(problem, m_star)
    price = 0.5 * (p_s + p_b)

    eps_s = _loss_at_price(problem, "seller", p_s)
    eps_b = _loss_at_price(problem, "buyer", p_b)
    objective = problem.lam * eps_s + (1.0 - problem.lam) * eps_b
    return RiskSharingSolution(eps_s, eps_b, m_star, price, objective,
                               iterations, p_s - p_b, True)


def _loss_at_price(problem: RiskSharingProblem, side: str, price: float) -> float:
    agent = problem.seller if side == "seller" else problem.buyer
    signed = -problem.claim if side == "seller" else problem.claim
    w = (agent.initial_wealth + price if side == "seller"
         else agent.initial_wealth - price)
    u_x = value_function(problem.market, agent.utility, agent.initial_wealth).value
    return u_x - value_function(problem.market, agent.utility, w, signed).value


def exponential_closed_form(problem: RiskSharingProblem) -> RiskSharingSolution:
    """Closed-form solution when both agents have exponential utility."""
    us, ub = problem.seller.utility, problem.buyer.utility
    if not (isinstance(us, ExponentialUtility) and isinstance(ub, ExponentialUtility)):
        raise WrongUtilityKind("closed form requires exponential utilities on both sides")
    gs, gb = us.gamma, ub.gamma
    lam = problem.lam
    market, claim = problem.market, problem.claim

    v_s = indifference_price(market, problem.seller, claim, "seller")
    v_b = indifference_price(market, problem.buyer, claim, "buyer")
    u_s_x = value_function(market, us, problem.seller.initial_wealth).value
    u_b_x = value_function(market, ub, problem.buyer.initial_wealth).value

    total = gs + gb
    price = ((gs * v_s + gb * v_b) / total
             + math.log((u_s_x * gs * lam) / (u_b_x * gb * (1.0 - lam))) / total)
    m_star = ((-u_s_x * lam * gs) ** (gb / total)
              * (-u_b_x * (1.0 - lam) * gb) ** (gs / total)
              * math.exp(gs * gb / total * (v_s - v_b)))
    eps_s = u_s_x + m_star / (lam * gs)
    eps_b = u_b_x + m_star / ((1.0 - lam) * gb)
    objective = lam * eps_s + (1.0 - lam) * eps_b
    return RiskSharingSolution(eps_s, eps_b, m_star, price, objective)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    price: float
    eps_s: float
    eps_b: float
    multiplier: float


def lambda_sweep(problem: RiskSharingProblem, lambdas: Sequence[float],
                 method: str = "generic") -> list:
    """Solve for each weight; rows come back sorted by the weight."""
    solver = exponential_closed_form if method == "closed" else solve
    rows = []
    for lam in sorted(float(v) for v in lambdas):
        sol = solver(replace(problem, lam=lam))
        rows.append(SweepRow(lam, sol.price, sol.eps_s, sol.eps_b, sol.multiplier))
    return rows


def _solve_price_for_lambda(problem: RiskSharingProblem, target: float,
                            tol: float = 1e-12) -> float:
    """Weight making the risk-sharing price hit ``target`` (price is strictly
    increasing and continuous in the weight).  Returns 0.0/1.0 when the
    target is not reachable inside (0, 1)."""
    edge = 1e-9

    def price_at(lam):
        return solve(replace(problem, lam=lam)).price

    if price_at(edge) >= target:
        return 0.0
    if price_at(1.0 - edge) <= target:
        return 1.0
    lo, hi = edge, 1.0 - edge
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if price_at(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def exponential_lambda_for_price(problem: RiskSharingProblem, target: float) -> float:
    """Closed-form weight with risk-sharing price ``target`` (exponential agents).

    lam = K/(K+1) with K = exp(target*(g_s+g_b)) * M, where M collects the
    indifference prices, wealths and claim-free utilities of the two agents.
    """
    us, ub = problem.seller.utility, problem.buyer.utility
    if not (isinstance(us, ExponentialUtility) and isinstance(ub, ExponentialUtility)):
        raise WrongUtilityKind("closed-form weight needs exponential utilities")
    gs, gb = us.gamma, ub.gamma
    market, claim = problem.market, problem.claim
    v_s = indifference_price(market, problem.seller, claim, "seller")
    v_b = indifference_price(market, problem.buyer, claim, "buyer")
    u_s0 = value_function(market, us, 0.0).value
    u_b0 = value_function(market, ub, 0.0).value
    x_s, x_b = problem.seller.initial_wealth, problem.buyer.initial_wealth
    m_factor = (math.exp(-gs * (v_s - x_s) - gb * (v_b + x_b))
                * (gb * u_b0) / (gs * u_s0))
    k = math.exp(target * (gs + gb)) * m_factor
    return k / (k + 1.0)


def lambda_bounds(problem: RiskSharingProblem, interval,
                  method: str = "numeric") -> tuple:
    """Weights delimiting { lam : risk-sharing price inside ``interval`` }.

    ``interval`` is a PriceInterval or (lower, upper) pair.  The returned
    (lam_low, lam_high) satisfies: price(lam) in (lower, upper) iff
    lam in (lam_low, lam_high).  A degenerate target interval yields an
    empty admissible set, reported as lam_low >= lam_high.
    """
    lower = getattr(interval, "lower", None)
    if lower is None:
        lower, upper = float(interval[0]), float(interval[1])
    else:
        upper = interval.upper

    if method == "closed":
        lam_low = exponential_lambda_for_price(problem, lower)
        lam_high = exponential_lambda_for_price(problem, upper)
    else:
        lam_low = _solve_price_for_lambda(problem, lower)
        lam_high = _solve_price_for_lambda(problem, upper)
    return lam_low, lam_high


@dataclass(frozen=True)
class LossTransform:
    """Convex increasing reweighting of a loss, with its derivative."""

    fn: Callable[[float], float]
    derivative: Callable[[float], float]

    def probe(self, lo: float = -5.0, hi: float = 5.0):
        grid = np.linspace(lo, hi, 41)
        d = np.array([float(self.derivative(v)) for v in grid])
        if np.any(d <= 0.0) or np.any(np.diff(d) < -1e-12):
            raise NonMonotonePsi(
                "loss transform derivative must be positive and nondecreasing"
            )


identity_transform = LossTransform(lambda e: e, lambda e: 1.0)


def _generalized_inner(curve: ReservationCurve, weight: float,
                       transform: LossTransform, m: float) -> float:
    """Loss level solving weight * psi'(eps) * u'(post-trade wealth) = m.

    The left side is strictly increasing in eps on the curve's loss domain,
    so expansion plus bisection is exact.
    """

    def lhs(eps):
        return weight * float(transform.derivative(eps)) * curve.marginal_at_loss(eps)

    lo_domain = curve.a_lower
    eps0 = 0.0 if lo_domain < 0.0 else lo_domain + 1.0
    lo = hi = eps0
    if lhs(eps0) < m:
        step = 1.0
        for _ in range(200):
            hi = lo + step
            if lhs(hi) >= m:
                break
            lo = hi
            step *= 2.0
        else:
            raise NonConvergence("generalized inner bracket failed (high side)")
    else:
        if math.isfinite(lo_domain):
            frac = 0.5
            for _ in range(400):
                lo = lo_domain + frac * (eps0 - lo_domain)
                if lhs(lo) <= m:
                    break
                hi = lo
                frac *= 0.5
            else:
                raise NonConvergence("generalized inner bracket failed (low side)")
        else:
            step = 1.0
            for _ in range(200):
                lo = hi - step
                if lhs(lo) <= m:
                    break
                hi = lo
                step *= 2.0
            else:
                raise NonConvergence("generalized inner bracket failed (low side)")

    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if lhs(mid) < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_generalized(problem: RiskSharingProblem,
                      psi_s: Optional[LossTransform] = None,
                      psi_b: Optional[LossTransform] = None,
                      tol: float = 1e-9, max_iter: int = MAX_ITER) -> RiskSharingSolution:
    """Minimize lam*psi_s(eps_s) + (1-lam)*psi_b(eps_b) over feasible trades.

    With identity transforms this coincides with ``solve``.  The stationarity
    system generalizes the marginal equations by the transform derivatives;
    the same nested monotone bisection applies.
    """
    psi_s = psi_s or identity_transform
    psi_b = psi_b or identity_transform
    psi_s.probe()
    psi_b.probe()

    s_floor, b_cap = _price_ranges(problem)
    if b_cap <= s_floor + 1e-12 * max(1.0, abs(b_cap), abs(s_floor)):
        raise NoOverlap("agents' attainable price ranges do not overlap")

    s_curve = problem.seller_curve()
    b_curve = problem.buyer_curve()
    lam = problem.lam

    def prices(lm):
        m = math.exp(lm)
        e_s = _generalized_inner(s_curve, lam, psi_s, m)
        e_b = _generalized_inner(b_curve, 1.0 - lam, psi_b, m)
        return s_curve.price(e_s), b_curve.price(e_b), e_s, e_b

    lo, hi = math.log(1e-10), math.log(1e10)
    p = prices(lo)
    expansions = 0
    while p[0] - p[1] <= 0.0:
        lo -= 40.0
        expansions += 1
        if expansions > 10:
            raise NonConvergence("generalized multiplier bracket failed (low side)")
        p = prices(lo)
    p = prices(hi)
    expansions = 0
    while p[0] - p[1] >= 0.0:
        hi += 40.0
        expansions += 1
        if expansions > 10:
            raise NonConvergence("generalized multiplier bracket failed (high side)")
        p = prices(hi)

    result = None
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        p_s, p_b, e_s, e_b = prices(mid)
        result = (mid, p_s, p_b, e_s, e_b, it)
        if abs(p_s - p_b) <= tol * max(1.0, abs(p_s)):
            break
        if p_s - p_b > 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise NonConvergence("generalized multiplier bisection hit iteration cap")

    lm, p_s, p_b, e_s, e_b, it = result
    objective = lam * float(psi_s.fn(e_s)) + (1.0 - lam) * float(psi_b.fn(e_b))
    return RiskSharingSolution(e_s, e_b, math.exp(lm), 0.5 * (p_s + p_b),
                               objective, it, p_s - p_b, True)


def residual_risk_objective(problem: RiskSharingProblem, price) -> float:
    """Weighted total utility of the optimally invested residual positions.

    Equals lam*u_s(x_s + price; -B) + (1-lam)*u_b(x_b - price; B); the
    risk-sharing price is its maximizer over the transaction price.
    """
    prices = np.asarray(price, dtype=float)
    scalar = prices.ndim == 0
    p = np.atleast_1d(prices)
    vs, _ = value_function_batch(problem.market, problem.seller.utility,
                                 problem.seller.initial_wealth + p, -problem.claim)
    vb, _ = value_function_batch(problem.market, problem.buyer.utility,
                                 problem.buyer.initial_wealth - p, problem.claim)
    out = problem.lam * vs + (1.0 - problem.lam) * vb
    return float(out[0]) if scalar else out
