"""Finite-state one-period market model.

A market is a probability vector over terminal states together with the
matrix of discounted risky-asset gains per state (the numeraire is worth 1
throughout).  All pricing objects downstream only need the set of
martingale measures, i.e. the polytope

    M = { q : q >= 0, sum(q) = 1, increments @ q = 0 },

whose strictly positive points are the measures equivalent to the physical
one.  Absence of arbitrage is the existence of such a strictly positive
point; incompleteness is the polytope not being a singleton.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ArbitrageDetected, CompleteMarket

__all__ = [
    "FiniteMarket",
    "Claim",
    "PriceInterval",
    "as_claim",
    "validate_market",
    "arbitrage_bounds",
    "is_replicable",
    "upper_hedging_value",
]

# Relative tolerance for rank / feasibility decisions (double-precision LP residuals).
FEAS_TOL = 1e-9
# Probabilities below this are indistinguishable from null states.
MIN_PROB = 1e-12


@dataclass(frozen=True)
class Claim:
    """Terminal payoff vector, one entry per market state (numeraire units)."""

    payoffs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.payoffs, dtype=float)
        if p.ndim != 1:
            raise ValueError("claim payoffs must be a 1-d vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("claim payoffs must be finite")
        object.__setattr__(self, "payoffs", p)

    def __neg__(self) -> "Claim":
        return Claim(-self.payoffs)

    def __add__(self, cash: float) -> "Claim":
        return Claim(self.payoffs + float(cash))

    def __len__(self) -> int:
        return self.payoffs.shape[0]


def as_claim(b, n_states: int) -> Claim:
    """Coerce an array/Claim/None (zero payoff) to a Claim of the right length."""
    if b is None:
        return Claim(np.zeros(n_states))
    if not isinstance(b, Claim):
        b = Claim(np.asarray(b, dtype=float))
    if len(b) != n_states:
        raise ValueError(f"claim has {len(b)} entries, market has {n_states} states")
    return b


@dataclass(frozen=True)
class PriceInterval:
    """Closed hull of the no-arbitrage prices of a claim.

    ``attained_lower``/``attained_upper`` report whether the endpoint is
    realized by an equivalent (strictly positive) measure.  On a finite
    market that happens exactly when the claim is replicable, in which case
    the interval is a single point.
    """

    lower: float
    upper: float
    attained_lower: bool = False
    attained_upper: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def is_degenerate(self, tol: float = FEAS_TOL) -> bool:
        return self.width <= tol * max(1.0, abs(self.lower), abs(self.upper))


@dataclass(frozen=True)
class FiniteMarket:
    """One-period market with ``n_states`` terminal states and ``d`` risky assets.

    ``increments[j, i]`` is the discounted gain of asset j in state i.
    Construction validates the model: strictly positive probabilities and a
    non-singleton set of strictly positive martingale measures.
    """

    probs: np.ndarray
    increments: np.ndarray
    polytope_dim: int = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        A = np.atleast_2d(np.asarray(self.increments, dtype=float))
        if p.ndim != 1:
            raise ValueError("probs must be a 1-d vector")
        if A.shape[1] != p.shape[0]:
            raise ValueError("increments must have one column per state")
        if np.any(p < MIN_PROB):
            raise ValueError("state probabilities must exceed 1e-12")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("state probabilities must sum to 1")
        object.__setattr__(self, "probs", p / p.sum())
        object.__setattr__(self, "increments", A)
        object.__setattr__(self, "polytope_dim", validate_market(self))

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_assets(self) -> int:
        return self.increments.shape[0]


def _positive_measure_margin(increments: np.ndarray) -> float:
    """Best achievable min-probability of a martingale measure (LP).

    Solves  max t  s.t.  q >= t, sum(q) = 1, increments @ q = 0.
    A positive optimum certifies a strictly positive martingale measure.
    """
    d, n = increments.shape
    # Variables: (q_1..q_n, t); objective max t.
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((d + 1, n + 1))
    A_eq[:d, :n] = increments
    A_eq[d, :n] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    # t - q_i <= 0
    A_ub = np.zeros((n, n + 1))
    A_ub[:, :n] = -np.eye(n)
    A_ub[:, -1] = 1.0
    bounds = [(0.0, 1.0)] * n + [(0.0, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        return -1.0
    return -res.fun


def validate_market(market: FiniteMarket) -> int:
    """Check the market admits at least two strictly positive martingale measures.

    Returns the affine dimension of the martingale polytope.  Raises
    ``ArbitrageDetected`` when no strictly positive measure exists and
    ``CompleteMarket`` when the measure set is a singleton.
    """
    A = market.increments
    margin = _positive_measure_margin(A)
    if margin <= FEAS_TOL:
        raise ArbitrageDetected(
            "no strictly positive martingale measure solves increments @ q = 0"
        )
    # With a strictly positive interior point, the polytope's affine dimension
    # equals the nullspace dimension of the stacked constraint matrix.
    stacked = np.vstack([A, np.ones(A.shape[1])])
    rank = np.linalg.matrix_rank(stacked, tol=FEAS_TOL * max(1.0, np.abs(stacked).max()))
    dim = A.shape[1] - rank
    if dim == 0:
        raise CompleteMarket("the martingale measure is unique; market is complete")
    return dim


def _expectation_lp(market: FiniteMarket, payoffs: np.ndarray, sense: str) -> float:
    """min/max of sum(q * payoffs) over the closed martingale polytope."""
    A = market.increments
    d, n = A.shape
    c = payoffs if sense == "min" else -payoffs
    A_eq = np.vstack([A, np.ones(n)])
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, 1.0)] * n, method="highs")
    if not res.success:
        raise ArbitrageDetected("martingale polytope is empty")
    return res.fun if sense == "min" else -res.fun


def arbitrage_bounds(market: FiniteMarket, b) -> PriceInterval:
    """Infimum and supremum of the claim's expectation over martingale measures.

    The LP runs over the closed polytope; whether an endpoint is attained by
    an equivalent measure is decided by degeneracy (a non-constant linear
    functional attains its optimum only on a proper face, which contains no
    strictly positive measure).
    """
    claim = as_claim(b, market.n_states)
    lower = _expectation_lp(market, claim.payoffs, "min")
    upper = _expectation_lp(market, claim.payoffs, "max")
    scale = max(1.0, abs(lower), abs(upper))
    attained = (upper - lower) <= FEAS_TOL * scale
    return PriceInterval(lower, upper, attained, attained)


def is_replicable(market: FiniteMarket, b):
    """Decide whether the payoff lies in span{1, asset increments}.

    Returns ``(flag, cash, theta)``; the replication satisfies
    cash + theta @ increments == payoffs when ``flag`` is True, otherwise
    cash and theta are None.
    """
    claim = as_claim(b, market.n_states)
    A = np.vstack([np.ones(market.n_states), market.increments]).T
    coeffs, _, _, _ = np.linalg.lstsq(A, claim.payoffs, rcond=None)
    residual = A @ coeffs - claim.payoffs
    scale = max(1.0, float(np.abs(claim.payoffs).max(initial=0.0)))
    if np.abs(residual).max(initial=0.0) <= FEAS_TOL * scale:
        return True, float(coeffs[0]), coeffs[1:].copy()
    return False, None, None


def upper_hedging_value(market: FiniteMarket, b) -> float:
    """Supremum of the claim's expectation over the closed martingale polytope.

    This is the super-replication cost of the claim, and also the wealth
    floor entering the feasibility conditions of utilities defined on
    positive wealth: an agent endowed with claim position ``b`` needs
    initial wealth above ``upper_hedging_value(market, -b)``.
    """
    claim = as_claim(b, market.n_states)
    return _expectation_lp(market, claim.payoffs, "max")
