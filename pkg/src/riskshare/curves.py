"""Indifference prices and risk-parametrized reservation-price curves.

For a seller of claim B with indirect utilities u(.) (no position) and
u(.; -B), the reservation price at utility loss eps solves

    eps = u(x) - u(x + P(eps); -B),

i.e. P(eps) = u^{-1}(u(x) - eps; -B) - x on the loss domain
(u(x) - U(+inf), +inf) and +inf below it.  The buyer analogue mirrors the
construction with +B and x - P.  Seller curves are strictly decreasing and
convex, buyer curves strictly increasing and concave.
"""

import math
from typing import Optional

import numpy as np

from .errors import DomainError
from .market import FiniteMarket, arbitrage_bounds, as_claim, upper_hedging_value
from .maximization import (
    inverse_value,
    inverse_value_batch,
    value_function,
    value_function_batch,
)
from .utilities import Agent

__all__ = ["ReservationCurve", "indifference_price"]


class ReservationCurve:
    """Lazy evaluator of one agent's reservation-price curve.

    Evaluations are memoized on the quantized risk level: downstream solvers
    query the same curve thousands of times during bisections.  The cache is
    append-only, so concurrent readers see consistent values.
    """

    def __init__(self, market: FiniteMarket, agent: Agent, claim, side: str):
        if side not in ("seller", "buyer"):
            raise ValueError("side must be 'seller' or 'buyer'")
        self.market = market
        self.agent = agent
        self.side = side
        self.claim = as_claim(claim, market.n_states)
        # the claim position carried inside the agent's value function
        self.signed_claim = -self.claim if side == "seller" else self.claim
        self.utility = agent.utility
        self.x = float(agent.initial_wealth)
        self.u_x = value_function(market, self.utility, self.x).value
        self.a_lower = self.u_x - self.utility.u_infinity
        if self.utility.whole_line:
            self._floor = -math.inf
        else:
            self._floor = upper_hedging_value(market, -self.signed_claim.payoffs)
        self._cache: dict = {}

    # -- price range -------------------------------------------------------

    def price_range(self):
        """Open interval swept by the curve over its loss domain.

        Whole-line utilities sweep all of R; positive-wealth utilities are
        floored (seller) or capped (buyer) by the super-replication value of
        the claim net of initial wealth.
        """
        if self.utility.whole_line:
            return (-math.inf, math.inf)
        if self.side == "seller":
            return (self._floor - self.x, math.inf)
        return (-math.inf, self.x - self._floor)

    # -- evaluation --------------------------------------------------------

    def price(self, eps: float) -> float:
        key = round(float(eps), 12)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = self._price_uncached(float(eps))
        self._cache[key] = value
        return value

    def _price_uncached(self, eps: float) -> float:
        if eps <= self.a_lower:
            return math.inf if self.side == "seller" else -math.inf
        y = self.u_x - eps
        w = inverse_value(self.market, self.utility, y, self.signed_claim,
                          floor=self._floor)
        return w - self.x if self.side == "seller" else self.x - w

    def price_batch(self, eps) -> np.ndarray:
        """Vectorized curve evaluation; off-domain entries map to +/-inf."""
        eps = np.asarray(eps, dtype=float)
        out = np.full(eps.shape, math.inf if self.side == "seller" else -math.inf)
        inside = eps > self.a_lower
        if np.any(inside):
            ys = self.u_x - eps[inside]
            ws = inverse_value_batch(self.market, self.utility, ys,
                                     self.signed_claim, floor=self._floor)
            out[inside] = ws - self.x if self.side == "seller" else self.x - ws
        return out

    def slope(self, eps: float) -> float:
        """Derivative of the curve: -1/u'(x+P; -B) (seller), 1/u'(x-P; B) (buyer)."""
        if eps <= self.a_lower:
            raise DomainError("risk level below the curve's loss domain")
        p = self.price(eps)
        w = self.x + p if self.side == "seller" else self.x - p
        marginal = value_function(self.market, self.utility, w,
                                  self.signed_claim).marginal
        return -1.0 / marginal if self.side == "seller" else 1.0 / marginal

    def loss_at_price(self, price: float) -> float:
        """Inverse direction: the utility loss caused by trading at ``price``."""
        w = self.x + price if self.side == "seller" else self.x - price
        return self.u_x - value_function(self.market, self.utility, w,
                                         self.signed_claim).value

    def loss_at_price_batch(self, prices) -> np.ndarray:
        """Vectorized loss map; infeasible prices map to +inf."""
        prices = np.asarray(prices, dtype=float)
        w = self.x + prices if self.side == "seller" else self.x - prices
        vals, _ = value_function_batch(self.market, self.utility, w,
                                       self.signed_claim)
        return self.u_x - vals

    def marginal_at_loss(self, eps: float) -> float:
        """u'(wealth after trading; position) at the price matching loss eps."""
        p = self.price(eps)
        w = self.x + p if self.side == "seller" else self.x - p
        return value_function(self.market, self.utility, w, self.signed_claim).marginal

    # -- derived intervals ---------------------------------------------------

    def nonarbitrage_loss_interval(self):
        """Open loss interval mapping into the claim's no-arbitrage prices."""
        bounds = arbitrage_bounds(self.market, self.claim)
        if self.side == "seller":
            hi_price, lo_price = bounds.upper, bounds.lower
            lo = self.u_x - value_function(self.market, self.utility,
                                           self.x + hi_price, self.signed_claim).value
            hi = self.u_x - value_function(self.market, self.utility,
                                           self.x + lo_price, self.signed_claim).value
        else:
            lo = self.u_x - value_function(self.market, self.utility,
                                           self.x - bounds.lower, self.signed_claim).value
            hi = self.u_x - value_function(self.market, self.utility,
                                           self.x - bounds.upper, self.signed_claim).value
        return (lo, hi)


def indifference_price(market: FiniteMarket, agent: Agent, claim,
                       side: Optional[str] = None) -> float:
    """Zero-loss reservation price: the agent's utility indifference price."""
    if side is None:
        side = agent.role
    if side not in ("seller", "buyer"):
        raise ValueError("specify side='seller' or 'buyer' (or set agent.role)")
    curve = ReservationCurve(market, agent, claim, side)
    return curve.price(0.0)
