"""Utility-function families and agents.

Two families are supported, distinguished by their domain: utilities on the
whole real line (exponential) and utilities on positive wealth (log, power),
the latter evaluating to -inf below zero.  Every utility exposes the
analytic data the solvers need: value, first and second derivatives, and the
exact inverse of the (strictly decreasing) marginal.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonPositiveMarginal

__all__ = [
    "Utility",
    "ExponentialUtility",
    "LogUtility",
    "PowerUtility",
    "CustomUtility",
    "exponential",
    "log",
    "power",
    "Agent",
]


class Utility:
    """Strictly increasing, strictly concave risk preference on terminal wealth.

    Subclasses set ``kind``, ``domain_lower`` (-inf for whole-line utilities,
    0.0 for positive-wealth utilities) and ``u_infinity`` (the limit of the
    utility at +inf, possibly +inf), and implement the four analytic methods.
    All methods accept scalars or numpy arrays.
    """

    kind: str = "abstract"
    domain_lower: float = -np.inf
    u_infinity: float = np.inf

    @property
    def whole_line(self) -> bool:
        return self.domain_lower == -np.inf

    def evaluate(self, w):
        raise NotImplementedError

    def derivative(self, w):
        raise NotImplementedError

    def second_derivative(self, w):
        raise NotImplementedError

    def inverse_derivative(self, y):
        raise NotImplementedError

    def __call__(self, w):
        return self.evaluate(w)

    def _check_interior(self, w):
        if np.any(np.asarray(w) <= self.domain_lower):
            raise DomainError(
                f"{self.kind} utility derivative needs wealth > {self.domain_lower}"
            )

    @staticmethod
    def _check_marginal_level(y):
        if np.any(np.asarray(y) <= 0.0):
            raise NonPositiveMarginal("marginal-utility level must be positive")


@dataclass(frozen=True)
class ExponentialUtility(Utility):
    """U(w) = -exp(-gamma * w) on the whole real line."""

    gamma: float

    kind = "exponential"
    domain_lower = -np.inf
    u_infinity = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("risk aversion gamma must be positive")

    def evaluate(self, w):
        return -np.exp(-self.gamma * np.asarray(w, dtype=float))

    def derivative(self, w):
        return self.gamma * np.exp(-self.gamma * np.asarray(w, dtype=float))

    def second_derivative(self, w):
        return -self.gamma ** 2 * np.exp(-self.gamma * np.asarray(w, dtype=float))

    def inverse_derivative(self, y):
        self._check_marginal_level(y)
        return -np.log(np.asarray(y, dtype=float) / self.gamma) / self.gamma


class LogUtility(Utility):
    """U(w) = ln(w) on positive wealth; -inf at and below zero."""

    kind = "log"
    domain_lower = 0.0
    u_infinity = np.inf

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(w > 0.0, np.log(np.maximum(w, 1e-300)), -np.inf)
        return out if out.ndim else float(out)

    def derivative(self, w):
        self._check_interior(w)
        return 1.0 / np.asarray(w, dtype=float)

    def second_derivative(self, w):
        self._check_interior(w)
        return -1.0 / np.asarray(w, dtype=float) ** 2

    def inverse_derivative(self, y):
        self._check_marginal_level(y)
        return 1.0 / np.asarray(y, dtype=float)

    def __eq__(self, other):
        return isinstance(other, LogUtility)

    def __hash__(self):
        return hash("log-utility")

    def __repr__(self):
        return "LogUtility()"


@dataclass(frozen=True)
class PowerUtility(Utility):
    """U(w) = w^(1-R)/(1-R) on positive wealth, relative risk aversion R != 1."""

    rra: float

    kind = "power"
    domain_lower = 0.0

    def __post_init__(self):
        if self.rra <= 0 or self.rra == 1.0:
            raise ValueError("relative risk aversion must be positive and != 1 "
                             "(use log() for R = 1)")

    @property
    def u_infinity(self):
        return 0.0 if self.rra > 1.0 else np.inf

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        expo = 1.0 - self.rra
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(w > 0.0, np.power(np.maximum(w, 1e-300), expo) / expo, -np.inf)
        if self.rra < 1.0:
            out = np.where(w == 0.0, 0.0, out)
        return out if out.ndim else float(out)

    def derivative(self, w):
        self._check_interior(w)
        return np.power(np.asarray(w, dtype=float), -self.rra)

    def second_derivative(self, w):
        self._check_interior(w)
        return -self.rra * np.power(np.asarray(w, dtype=float), -self.rra - 1.0)

    def inverse_derivative(self, y):
        self._check_marginal_level(y)
        return np.power(np.asarray(y, dtype=float), -1.0 / self.rra)


class CustomUtility(Utility):
    """User-supplied utility with explicit analytic inverse marginal.

    The caller provides the inverse of the derivative rather than having the
    library invert numerically; the downstream multiplier equations hinge on
    exact monotone inversion.  Monotonicity, concavity and a rough asymptotic
    elasticity check are probed on a grid at construction (elasticity only
    warns: it is not decidable from finitely many samples).
    """

    kind = "custom"

    def __init__(
        self,
        evaluate: Callable,
        derivative: Callable,
        inverse_derivative: Callable,
        domain: str = "whole-line",
        second_derivative: Optional[Callable] = None,
        u_infinity: Optional[float] = None,
    ):
        if domain not in ("whole-line", "positive"):
            raise ValueError("domain must be 'whole-line' or 'positive'")
        self.domain_lower = -np.inf if domain == "whole-line" else 0.0
        self._evaluate = evaluate
        self._derivative = derivative
        self._inverse_derivative = inverse_derivative
        self._second_derivative = second_derivative
        self._probe()
        if u_infinity is None:
            u_infinity = float(evaluate(1e12))
            if u_infinity > 1e100:
                u_infinity = np.inf
        self.u_infinity = u_infinity

    def _probe(self):
        lo = 1e-6 if self.domain_lower == 0.0 else -20.0
        grid = np.linspace(lo, 20.0, 257)
        vals = np.array([float(self._evaluate(w)) for w in grid])
        ders = np.array([float(self._derivative(w)) for w in grid])
        if np.any(np.diff(vals) <= 0.0):
            raise ValueError("custom utility is not strictly increasing on probe grid")
        if np.any(ders <= 0.0) or np.any(np.diff(ders) >= 0.0):
            raise ValueError("custom utility marginal is not positive strictly decreasing")
        y_lo = max(float(ders.min()) * 1.05, 1e-12)
        y_hi = min(float(ders.max()) * 0.95, 1e12)
        for y in np.geomspace(y_lo, y_hi, 25):
            w = float(self._inverse_derivative(y))
            if abs(float(self._derivative(w)) - y) > 1e-8 * max(1.0, y):
                raise ValueError("inverse_derivative is not a right inverse of derivative")
        # Heuristic elasticity probe at the right edge only; best effort.
        w_hi = grid[-1]
        elasticity = w_hi * ders[-1] / vals[-1] if vals[-1] != 0 else 0.0
        if vals[-1] > 0 and elasticity >= 1.0:
            warnings.warn(
                "custom utility may violate the asymptotic elasticity bound "
                f"(probe elasticity {elasticity:.3f} at w={w_hi:g})",
                stacklevel=3,
            )

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        if w.ndim == 0:
            wv = float(w)
            if wv < self.domain_lower:
                return -np.inf
            return float(self._evaluate(wv))
        out = np.array([self.evaluate(x) for x in w])
        return out

    def derivative(self, w):
        self._check_interior(w)
        w = np.asarray(w, dtype=float)
        if w.ndim == 0:
            return float(self._derivative(float(w)))
        return np.array([float(self._derivative(x)) for x in w])

    def second_derivative(self, w):
        self._check_interior(w)
        if self._second_derivative is not None:
            w = np.asarray(w, dtype=float)
            if w.ndim == 0:
                return float(self._second_derivative(float(w)))
            return np.array([float(self._second_derivative(x)) for x in w])
        h = 1e-6
        return (self.derivative(np.asarray(w) + h) - self.derivative(np.asarray(w) - h)) / (2 * h)

    def inverse_derivative(self, y):
        self._check_marginal_level(y)
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return float(self._inverse_derivative(float(y)))
        return np.array([float(self._inverse_derivative(v)) for v in y])


def exponential(gamma: float) -> ExponentialUtility:
    return ExponentialUtility(gamma)


def log() -> LogUtility:
    return LogUtility()


def power(rra: float) -> Utility:
    """CRRA utility with relative risk aversion ``rra``; R = 1 aliases to log."""
    if rra == 1.0:
        return LogUtility()
    return PowerUtility(rra)


@dataclass(frozen=True)
class Agent:
    """A market participant: risk preference, initial wealth, and side."""

    utility: Utility
    initial_wealth: float
    role: Optional[str] = None

    def __post_init__(self):
        if self.role not in (None, "seller", "buyer"):
            raise ValueError("role must be 'seller', 'buyer', or None")
