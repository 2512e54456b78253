"""Expected-utility maximization on a finite market.

Solves  max over holdings theta of  sum_i probs[i] * U(x + theta . S_i + b_i)
for the indirect utility u(x; b), its wealth derivative (envelope theorem)
and the optimizing holding, plus the exact monotone inverses in x and in the
marginal that the pricing layers repeatedly need.

The single-asset built-in-utility path routes through the kernel backend;
multi-asset and custom-utility problems use a damped Newton with feasibility
backtracking.  Batch variants evaluate whole grids with vectorized
bisections and are the workhorses of curve sampling and brute-force oracles.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from . import _backend
from .errors import InfeasibleWealth, NonConvergence, OutOfRange
from .market import Claim, FiniteMarket, as_claim
from .utilities import ExponentialUtility, LogUtility, PowerUtility, Utility

__all__ = [
    "ValueResult",
    "value_function",
    "value_function_batch",
    "inverse_value",
    "inverse_value_batch",
    "inverse_marginal",
]

_KIND_CODE = {"log": _backend.KIND_LOG, "power": _backend.KIND_POWER}

# Stationarity target for the holding optimizer.
GRAD_TOL = 1e-11


def _kind_param(utility: Utility):
    if isinstance(utility, ExponentialUtility):
        return _backend.KIND_EXP, utility.gamma
    if isinstance(utility, LogUtility):
        return _backend.KIND_LOG, 0.0
    if isinstance(utility, PowerUtility):
        return _backend.KIND_POWER, utility.rra
    return None, None


@dataclass(frozen=True)
class ValueResult:
    """Indirect utility at one wealth level, with its derivative and maximizer."""

    value: float
    marginal: float
    theta: np.ndarray
    x: float
    claim: Claim


def _exp_log_scale(market: FiniteMarket, gamma: float, payoffs: np.ndarray):
    """Optimal holding and log of -u(0; b) for the exponential family.

    u(x; b) = -exp(L - gamma*x) with L independent of x, so one solve serves
    every wealth level.
    """
    p, S = market.probs, market.increments
    if S.shape[0] == 1:
        theta = np.array([_backend.solve_theta_1d(
            _backend.KIND_EXP, gamma, p, S[0], payoffs)])
        if np.isnan(theta[0]):
            raise NonConvergence("exponential holding search failed to bracket")
    else:
        theta = _newton_exp_multi(market, gamma, payoffs)
    L = float(logsumexp(-gamma * (theta @ S + payoffs), b=p))
    return theta, L


def _newton_exp_multi(market: FiniteMarket, gamma: float, payoffs: np.ndarray,
                      max_iter: int = 100) -> np.ndarray:
    """Damped Newton on log E[exp(-gamma*(theta.S + b))]; convex in theta."""
    p, S = market.probs, market.increments
    d = S.shape[0]
    theta = np.zeros(d)

    def parts(th):
        e = -gamma * (th @ S + payoffs) + np.log(p)
        m = e.max()
        w = np.exp(e - m)
        Z = w.sum()
        w /= Z
        return m + np.log(Z), w

    L, w = parts(theta)
    for _ in range(max_iter):
        sbar = S @ w
        grad = -gamma * sbar
        cov = (S * w) @ S.T - np.outer(sbar, sbar)
        hess = gamma ** 2 * cov
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess + 1e-12 * np.eye(d), -grad, rcond=None)[0]
        if np.abs(grad).max() <= GRAD_TOL * max(1.0, gamma):
            break
        alpha = 1.0
        for _ in range(60):
            Ln, wn = parts(theta + alpha * step)
            if Ln <= L + 1e-4 * alpha * float(grad @ step):
                theta = theta + alpha * step
                L, w = Ln, wn
                break
            alpha *= 0.5
        else:
            break
    else:
        raise NonConvergence("multi-asset exponential Newton hit iteration cap")
    return theta


def _feasible_start(market: FiniteMarket, x: float, payoffs: np.ndarray) -> np.ndarray:
    """Holding maximizing the minimum statewise wealth (phase-1 LP).

    Raises InfeasibleWealth when no holding keeps wealth positive; that is
    exactly the wealth-floor condition of positive-domain utilities.
    """
    d, n = market.increments.shape
    # variables (theta, t): max t s.t. theta.S_i + (x + b_i) >= t
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-market.increments.T, np.ones((n, 1))])
    b_ub = x + payoffs
    bounds = [(None, None)] * d + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success or -res.fun <= 0.0:
        raise InfeasibleWealth(
            f"no holding keeps terminal wealth positive at x={x:g}; "
            "initial wealth below the super-replication floor of the liability"
        )
    return res.x[:d]


def _newton_concave(market: FiniteMarket, utility: Utility, base: np.ndarray,
                    theta0: np.ndarray, positive_domain: bool,
                    max_iter: int = 120) -> np.ndarray:
    """Damped Newton for max sum p U(base + theta.S), feasibility-preserving."""
    p, S = market.probs, market.increments
    d = S.shape[0]
    theta = theta0.astype(float).copy()

    def wealth(th):
        return base + th @ S

    def objective(w):
        return float(np.dot(p, utility.evaluate(w)))

    w = wealth(theta)
    if positive_domain and w.min() <= 0.0:
        raise InfeasibleWealth("starting holding infeasible")
    f = objective(w)
    for _ in range(max_iter):
        du = utility.derivative(w)
        grad = S @ (p * du)
        scale = max(1.0, float(np.dot(p, du)) * max(1.0, np.abs(S).max()))
        if np.abs(grad).max() <= GRAD_TOL * scale:
            return theta
        d2u = utility.second_derivative(w)
        hess = (S * (p * d2u)) @ S.T
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-hess + 1e-12 * np.eye(d), grad, rcond=None)[0]
        alpha = 1.0
        moved = False
        for _ in range(80):
            cand = theta + alpha * step
            wc = wealth(cand)
            if (not positive_domain or wc.min() > 0.0):
                fc = objective(wc)
                if fc >= f + 1e-4 * alpha * float(grad @ step) or fc > f:
                    theta, w, f = cand, wc, fc
                    moved = True
                    break
            alpha *= 0.5
        if not moved:
            # gradient fallback step
            g = grad / max(np.abs(grad).max(), 1e-300)
            alpha = 1.0
            for _ in range(80):
                cand = theta + alpha * g
                wc = wealth(cand)
                if (not positive_domain or wc.min() > 0.0) and objective(wc) > f:
                    theta, w, f = cand, wc, objective(wc)
                    moved = True
                    break
                alpha *= 0.5
            if not moved:
                return theta
    raise NonConvergence("holding optimizer hit its iteration cap")


def value_function(market: FiniteMarket, utility: Utility, x: float,
                   claim=None) -> ValueResult:
    """Indirect utility u(x; claim) with marginal and optimal holding.

    For positive-domain utilities the wealth x must admit a holding with
    strictly positive terminal wealth in every state; otherwise
    InfeasibleWealth is raised.
    """
    claim = as_claim(claim, market.n_states)
    payoffs = claim.payoffs
    p, S = market.probs, market.increments

    if isinstance(utility, ExponentialUtility):
        theta, L = _exp_log_scale(market, utility.gamma, payoffs)
        value = -np.exp(L - utility.gamma * x)
        marginal = utility.gamma * np.exp(L - utility.gamma * x)
        return ValueResult(float(value), float(marginal), theta, x, claim)

    kind, param = _kind_param(utility)
    base = x + payoffs
    if kind is not None and S.shape[0] == 1:
        theta_s = _backend.solve_theta_1d(kind, param, p, S[0], base)
        if np.isnan(theta_s):
            raise InfeasibleWealth(
                f"no holding keeps terminal wealth positive at x={x:g}"
            )
        theta = np.array([theta_s])
    else:
        positive = not utility.whole_line
        theta0 = _feasible_start(market, x, payoffs) if positive else np.zeros(S.shape[0])
        theta = _newton_concave(market, utility, base, theta0, positive)

    w = base + theta @ S
    value = float(np.dot(p, utility.evaluate(w)))
    marginal = float(np.dot(p, utility.derivative(w)))
    return ValueResult(value, marginal, theta, x, claim)


def value_function_batch(market: FiniteMarket, utility: Utility, xs,
                         claim=None):
    """Vectorized (values, marginals) of u(.; claim) over a wealth grid.

    Entries outside the feasible wealth region come back as -inf / nan for
    positive-domain utilities.
    """
    claim = as_claim(claim, market.n_states)
    xs = np.asarray(xs, dtype=float)
    p, S = market.probs, market.increments

    if isinstance(utility, ExponentialUtility):
        _, L = _exp_log_scale(market, utility.gamma, claim.payoffs)
        scale = np.exp(L - utility.gamma * xs)
        return -scale, utility.gamma * scale

    if S.shape[0] == 1 and isinstance(utility, (LogUtility, PowerUtility)):
        return _batch_positive_1d(market, utility, xs, claim.payoffs)

    values = np.empty(xs.shape)
    marginals = np.empty(xs.shape)
    for i, x in np.ndenumerate(xs):
        try:
            r = value_function(market, utility, float(x), claim)
            values[i], marginals[i] = r.value, r.marginal
        except InfeasibleWealth:
            values[i], marginals[i] = -np.inf, np.nan
    return values, marginals


def _batch_positive_1d(market: FiniteMarket, utility: Utility, xs,
                       payoffs: np.ndarray):
    """Vector bisection on the holding FOC, one problem per wealth level."""
    p, s = market.probs, market.increments[0]
    base = xs[..., None] + payoffs  # (..., n)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = -base / np.where(s == 0.0, np.nan, s)
    lo = np.where(s > 0.0, ratios, -np.inf).max(axis=-1)
    hi = np.where(s < 0.0, ratios, np.inf).min(axis=-1)
    fixed_ok = np.all((s != 0.0) | (base > 0.0), axis=-1)
    feasible = (lo < hi) & fixed_ok
    span = hi - lo
    span = np.where(np.isfinite(span), span, 2.0 + np.abs(lo) + np.abs(hi))
    span = np.where(np.isfinite(span), span, 4.0)
    blo = np.where(np.isfinite(lo), lo + 1e-13 * span, -1e6)
    bhi = np.where(np.isfinite(hi), hi - 1e-13 * span, 1e6)
    blo = np.where(feasible, blo, 0.0)
    bhi = np.where(feasible, bhi, 1.0)

    if isinstance(utility, LogUtility):
        def foc(theta):
            w = base + theta[..., None] * s
            return np.dot(1.0 / w, p * s)
    else:
        R = utility.rra

        def foc(theta):
            w = base + theta[..., None] * s
            return np.dot(np.power(w, -R), p * s)

    for _ in range(110):
        mid = 0.5 * (blo + bhi)
        gt = foc(mid) > 0.0
        blo = np.where(gt, mid, blo)
        bhi = np.where(gt, bhi, mid)
    theta = 0.5 * (blo + bhi)

    w = base + theta[..., None] * s
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.dot(utility.evaluate(np.maximum(w, 1e-300)), p)
        marginals = np.dot(utility.derivative(np.maximum(w, 1e-300)), p)
    values = np.where(feasible, values, -np.inf)
    marginals = np.where(feasible, marginals, np.nan)
    return values, marginals


def _wealth_floor(market: FiniteMarket, utility: Utility, claim: Claim) -> float:
    """Least initial wealth with feasible holdings (positive-domain only)."""
    if utility.whole_line:
        return -np.inf
    from .market import upper_hedging_value

    return upper_hedging_value(market, -claim.payoffs)


def inverse_value(market: FiniteMarket, utility: Utility, y: float, claim=None,
                  floor: Optional[float] = None) -> float:
    """The unique wealth x with u(x; claim) = y.

    Raises OutOfRange when y is at or above U(+inf), or (positive-domain
    utilities with bounded losses) below the attainable range.
    """
    claim = as_claim(claim, market.n_states)
    if y >= utility.u_infinity:
        raise OutOfRange(f"target {y:g} is not below the utility's upper limit")

    if isinstance(utility, ExponentialUtility):
        _, L = _exp_log_scale(market, utility.gamma, claim.payoffs)
        if y >= 0.0:
            raise OutOfRange("exponential indirect utility is negative")
        return (L - np.log(-y)) / utility.gamma

    if floor is None:
        floor = _wealth_floor(market, utility, claim)

    def val(x):
        return value_function(market, utility, x, claim).value

    # Bracket the target by geometric expansion.
    if np.isfinite(floor):
        anchor = floor + 1.0
    else:
        anchor = 0.0
    v = val(anchor)
    if v < y:
        lo, hi = anchor, anchor + 1.0
        step = 1.0
        for _ in range(200):
            if val(hi) >= y:
                break
            lo = hi
            hi += step
            step *= 2.0
        else:
            raise OutOfRange("target above the attainable indirect utility")
    else:
        hi = anchor
        if np.isfinite(floor):
            frac = 0.5
            lo = floor + frac * (anchor - floor)
            for _ in range(400):
                try:
                    reached = val(lo) <= y
                except InfeasibleWealth:
                    # wealth this close to the floor is not representable
                    raise OutOfRange(
                        "target below the indirect utility attainable in "
                        "double precision") from None
                if reached:
                    break
                hi = lo
                frac *= 0.5
                lo = floor + frac * (anchor - floor)
            else:
                raise OutOfRange("target below the attainable indirect utility")
        else:
            lo = anchor - 1.0
            step = 1.0
            for _ in range(200):
                if val(lo) <= y:
                    break
                hi = lo
                lo -= step
                step *= 2.0
            else:
                raise OutOfRange("target below the attainable indirect utility")

    x = brentq(lambda t: val(t) - y, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    # Newton polish against the stated value tolerance.
    for _ in range(6):
        r = value_function(market, utility, x, claim)
        err = r.value - y
        if abs(err) <= 1e-12 * max(1.0, abs(y)):
            break
        x -= err / r.marginal
    return float(x)


def inverse_value_batch(market: FiniteMarket, utility: Utility, ys, claim=None,
                        floor: Optional[float] = None) -> np.ndarray:
    """Vectorized inverse of x -> u(x; claim) over a grid of targets."""
    claim = as_claim(claim, market.n_states)
    ys = np.asarray(ys, dtype=float)

    if isinstance(utility, ExponentialUtility):
        _, L = _exp_log_scale(market, utility.gamma, claim.payoffs)
        if np.any(ys >= 0.0):
            raise OutOfRange("exponential indirect utility is negative")
        return (L - np.log(-ys)) / utility.gamma

    if ys.size == 0:
        return np.empty_like(ys)
    y_min, y_max = float(ys.min()), float(ys.max())
    x_lo = inverse_value(market, utility, y_min, claim, floor=floor)
    x_hi = inverse_value(market, utility, y_max, claim, floor=floor)
    lo = np.full(ys.shape, min(x_lo, x_hi))
    hi = np.full(ys.shape, max(x_lo, x_hi) + 1e-12)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        vals, _ = value_function_batch(market, utility, mid, claim)
        below = vals < ys
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(3):
        vals, margs = value_function_batch(market, utility, x, claim)
        step = (vals - ys) / margs
        x_new = x - step
        x = np.where((x_new > lo) & (x_new < hi), x_new, x)
    return x


def inverse_marginal(market: FiniteMarket, utility: Utility, target: float,
                     claim=None, floor: Optional[float] = None) -> float:
    """The unique wealth w with u'(w; claim) = target (target > 0).

    The marginal sweeps (0, +inf) on the feasible wealth region, so the root
    exists for every positive target.
    """
    if target <= 0.0:
        raise OutOfRange("marginal target must be positive")
    claim = as_claim(claim, market.n_states)

    if isinstance(utility, ExponentialUtility):
        _, L = _exp_log_scale(market, utility.gamma, claim.payoffs)
        return (L + np.log(utility.gamma) - np.log(target)) / utility.gamma

    if floor is None:
        floor = _wealth_floor(market, utility, claim)

    def logmarg(w):
        return np.log(value_function(market, utility, w, claim).marginal)

    lt = np.log(target)
    anchor = floor + 1.0 if np.isfinite(floor) else 0.0
    if logmarg(anchor) > lt:
        lo, hi = anchor, anchor + 1.0
        step = 1.0
        for _ in range(200):
            if logmarg(hi) <= lt:
                break
            lo = hi
            hi += step
            step *= 2.0
        else:
            raise NonConvergence("marginal inversion failed to bracket")
    else:
        hi = anchor
        if np.isfinite(floor):
            frac = 0.5
            lo = floor + frac * (anchor - floor)
            for _ in range(400):
                try:
                    reached = logmarg(lo) >= lt
                except InfeasibleWealth:
                    raise NonConvergence(
                        "marginal target unreachable in double precision "
                        "near the wealth floor") from None
                if reached:
                    break
                hi = lo
                frac *= 0.5
                lo = floor + frac * (anchor - floor)
            else:
                raise NonConvergence("marginal inversion failed to bracket")
        else:
            lo = anchor - 1.0
            step = 1.0
            for _ in range(200):
                if logmarg(lo) >= lt:
                    break
                hi = lo
                lo -= step
                step *= 2.0
            else:
                raise NonConvergence("marginal inversion failed to bracket")

    return float(brentq(lambda w: logmarg(w) - lt, lo, hi,
                        xtol=1e-14, rtol=8.9e-16, maxiter=200))
