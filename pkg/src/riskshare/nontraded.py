"""European claim on a non-traded asset correlated with one traded asset.

The traded asset is a geometric diffusion with drift mu and volatility
sigma; the non-traded state Y follows dY = b(Y,t) dt + a(Y,t) dW with
correlation rho between the driving factors.  For exponential agents the
time-t value functions are in closed form up to a conditional expectation of
exp(+/- gamma (1-rho^2) g(Y_T)) under the minimal-entropy measure, whose
Y-drift is b - (rho mu / sigma) a.  Two engines evaluate that expectation:
Euler Monte Carlo with antithetic pairing, and a Crank-Nicolson march of the
equivalent linear backward PDE.  A Markov-chain lattice supports choosing
the trading time that minimizes the expected total risk.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from . import _backend
from .errors import ConfigError, GridTooCoarse, LogDomain, StepUnderflow

__all__ = [
    "Diffusion",
    "Drift",
    "Payoff",
    "constant_diffusion",
    "affine_diffusion",
    "zero_drift",
    "constant_drift",
    "linear_drift",
    "ou_drift",
    "constant_payoff",
    "capped_call",
    "clipped_identity",
    "NonTradedModel",
    "minimal_entropy_drift",
    "conditional_expectation_mc",
    "delta_factor",
    "claim_free_value",
    "NonTradedPriceResult",
    "indifference_value",
    "indifference_prices",
    "reservation_price",
    "risk_sharing_price",
    "PdeGrid",
    "default_pde_grid",
    "PriceField",
    "solve_price_pde",
    "quasilinear_residual",
    "StoppingResult",
    "optimal_trading_time",
]


# ---------------------------------------------------------------------------
# coefficient catalog (JSON-selectable named forms)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diffusion:
    """Diffusion coefficient a(y, t) of the non-traded asset."""

    kind: str
    a1: float
    a2: float = 0.0

    def __call__(self, y, t=0.0):
        if self.kind == "constant":
            return self.a1 if np.ndim(y) == 0 else np.full(np.shape(y), self.a1)
        return self.a1 + self.a2 * np.asarray(y, dtype=float)

    @property
    def code(self) -> int:
        return _backend.A_CONST if self.kind == "constant" else _backend.A_AFFINE

    def check_positive(self, y_lo: float, y_hi: float):
        probe = np.linspace(y_lo, y_hi, 101)
        if np.any(np.asarray(self(probe)) <= 0.0):
            raise ConfigError("diffusion coefficient must stay positive on the domain")


@dataclass(frozen=True)
class Drift:
    """Physical-measure drift b(y, t) of the non-traded asset."""

    kind: str
    b1: float = 0.0
    b2: float = 0.0

    def __call__(self, y, t=0.0):
        if self.kind == "zero":
            return 0.0 if np.ndim(y) == 0 else np.zeros(np.shape(y))
        if self.kind == "constant":
            return self.b1 if np.ndim(y) == 0 else np.full(np.shape(y), self.b1)
        return self.b1 + self.b2 * np.asarray(y, dtype=float)

    @property
    def code(self) -> int:
        return {"zero": _backend.B_ZERO, "constant": _backend.B_CONST,
                "linear": _backend.B_LINEAR}[self.kind]


@dataclass(frozen=True)
class Payoff:
    """Bounded terminal payoff g(Y_T) with explicit range."""

    kind: str
    fn: Callable
    lower: float
    upper: float
    params: dict = field(default_factory=dict)

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


def constant_diffusion(value: float) -> Diffusion:
    if value <= 0.0:
        raise ConfigError("diffusion level must be positive")
    return Diffusion("constant", float(value))


def affine_diffusion(intercept: float, slope: float) -> Diffusion:
    return Diffusion("affine", float(intercept), float(slope))


def zero_drift() -> Drift:
    return Drift("zero")


def constant_drift(value: float) -> Drift:
    return Drift("constant", float(value))


def linear_drift(intercept: float, slope: float) -> Drift:
    return Drift("linear", float(intercept), float(slope))


def ou_drift(kappa: float, mean: float = 0.0) -> Drift:
    """Mean-reverting drift -kappa * (y - mean)."""
    return Drift("linear", float(kappa) * float(mean), -float(kappa))


def constant_payoff(value: float) -> Payoff:
    v = float(value)
    return Payoff("constant", lambda y: np.full(np.shape(y), v) if np.ndim(y) else v,
                  v, v, {"value": v})


def capped_call(strike: float, cap: float) -> Payoff:
    if cap <= 0.0:
        raise ConfigError("call cap must be positive")
    k, m = float(strike), float(cap)
    return Payoff("capped_call",
                  lambda y: np.clip(np.asarray(y, dtype=float) - k, 0.0, m),
                  0.0, m, {"strike": k, "cap": m})


def clipped_identity(lower: float, upper: float) -> Payoff:
    if not lower < upper:
        raise ConfigError("clip bounds must satisfy lower < upper")
    lo, hi = float(lower), float(upper)
    return Payoff("clip", lambda y: np.clip(np.asarray(y, dtype=float), lo, hi),
                  lo, hi, {"lower": lo, "upper": hi})


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonTradedModel:
    """Market and agent parameters of the non-traded-asset example."""

    mu: float
    sigma: float
    rho: float
    diffusion: Diffusion
    drift: Drift
    payoff: Payoff
    horizon: float
    gamma_s: float
    gamma_b: float
    x_s: float = 0.0
    x_b: float = 0.0
    lam: float = 0.5

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ConfigError("sigma must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ConfigError("rho must lie strictly inside (-1, 1)")
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be positive")
        if self.gamma_s <= 0.0 or self.gamma_b <= 0.0:
            raise ConfigError("risk aversions must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError("lambda must lie strictly in (0, 1)")

    @property
    def hedge_ratio2(self) -> float:
        """1 - rho^2, the unhedgeable variance share."""
        return 1.0 - self.rho ** 2

    @property
    def entropy_shift(self) -> float:
        """Drift adjustment factor rho*mu/sigma of the minimal-entropy measure."""
        return self.rho * self.mu / self.sigma

    def gamma(self, side: str) -> float:
        return self.gamma_s if side == "seller" else self.gamma_b

    def wealth(self, side: str) -> float:
        return self.x_s if side == "seller" else self.x_b


def minimal_entropy_drift(model: NonTradedModel, y, t: float = 0.0):
    """Drift of Y under the minimal-entropy martingale measure."""
    return model.drift(y, t) - model.entropy_shift * model.diffusion(y, t)


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------

def _terminal_samples(model: NonTradedModel, t: float, y: float, n_paths: int,
                      seed: int, n_steps: Optional[int], antithetic: bool):
    horizon = model.horizon
    if t > horizon:
        raise ValueError("evaluation time beyond the horizon")
    if t == horizon:
        return np.full(n_paths, float(y))
    if n_steps is None:
        n_steps = max(1, int(round(250.0 * (horizon - t))))
    dt = (horizon - t) / n_steps
    if dt <= 0.0 or not math.isfinite(dt):
        raise StepUnderflow("time step collapsed to zero")
    rng = np.random.default_rng(seed)
    if antithetic:
        half = n_paths // 2
        if half * 2 != n_paths:
            raise ValueError("antithetic sampling needs an even path count")
        z = rng.standard_normal((half, n_steps))
        z = np.vstack([z, -z])
    else:
        z = rng.standard_normal((n_paths, n_steps))
    return _backend.euler_terminal(
        float(y), float(t), horizon, n_steps, z,
        model.diffusion.code, model.diffusion.a1, model.diffusion.a2,
        model.drift.code, model.drift.b1, model.drift.b2,
        model.entropy_shift,
    )


def conditional_expectation_mc(model: NonTradedModel, t: float, y: float,
                               integrand: Callable, n_paths: int, seed: int,
                               n_steps: Optional[int] = None,
                               antithetic: bool = True):
    """Euler estimate of E[ integrand(Y_T) | Y_t = y ] under the entropy measure.

    Returns (estimate, standard error); with antithetic pairing the error is
    computed over the path-pair averages.  Deterministic for a fixed seed.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    y_T = _terminal_samples(model, t, y, n_paths, seed, n_steps, antithetic)
    f = np.asarray(integrand(y_T), dtype=float)
    if antithetic:
        half = n_paths // 2
        pair_means = 0.5 * (f[:half] + f[half:])
        est = float(pair_means.mean())
        se = float(pair_means.std(ddof=1) / math.sqrt(half))
    else:
        est = float(f.mean())
        se = float(f.std(ddof=1) / math.sqrt(n_paths))
    return est, se


# ---------------------------------------------------------------------------
# closed-form factors and price formulas
# ---------------------------------------------------------------------------

def delta_factor(model: NonTradedModel, side: str, t: float) -> float:
    """exp(gamma*x + mu^2 (T-t) / (2 sigma^2)) for the given agent."""
    g, x = model.gamma(side), model.wealth(side)
    return math.exp(g * x + model.mu ** 2 * (model.horizon - t) / (2.0 * model.sigma ** 2))


def claim_free_value(model: NonTradedModel, side: str, t: float) -> float:
    """Time-t indirect utility with no claim position: -1/delta_factor."""
    return -1.0 / delta_factor(model, side, t)


@dataclass(frozen=True)
class NonTradedPriceResult:
    t: float
    y: float
    v_s: float
    v_b: float
    delta_s: float
    delta_b: float
    p_star: float
    stderr_v_s: Optional[float] = None
    stderr_v_b: Optional[float] = None
    engine: str = "mc"


def indifference_value(model: NonTradedModel, t: float, y: float, side: str,
                       engine: str = "mc", n_paths: int = 100_000, seed: int = 0,
                       n_steps: Optional[int] = None, antithetic: bool = True,
                       grid: Optional["PdeGrid"] = None):
    """Time-t indifference price of the claim for one agent.

    Seller: v = ln E[exp(+g k G)] / (g k); buyer: v = -ln E[exp(-g k G)] / (g k)
    with k = 1 - rho^2 and the expectation under the entropy measure.
    Returns (value, stderr) where stderr is None for the PDE engine.
    """
    k = model.hedge_ratio2
    g = model.gamma(side)
    sign = 1.0 if side == "seller" else -1.0
    if engine == "mc":
        est, se = conditional_expectation_mc(
            model, t, y,
            lambda yT: np.exp(sign * g * k * model.payoff(yT)),
            n_paths, seed, n_steps, antithetic)
        v = sign * math.log(est) / (g * k)
        return v, se / (est * g * k)
    if engine == "pde":
        field = solve_price_pde(model, side, 0.0, grid or default_pde_grid(model, y))
        return field.price_at(t, y), None
    raise ValueError("engine must be 'mc' or 'pde'")


def indifference_prices(model: NonTradedModel, t: float, y: float,
                        engine: str = "mc", n_paths: int = 100_000, seed: int = 0,
                        n_steps: Optional[int] = None, antithetic: bool = True,
                        grid: Optional["PdeGrid"] = None) -> NonTradedPriceResult:
    """Both agents' indifference prices plus the risk-sharing price at (t, y)."""
    if engine == "mc":
        # one path set serves both integrands
        y_T = _terminal_samples(model, t, y, n_paths, seed, n_steps, antithetic)
        k = model.hedge_ratio2
        g_vals = model.payoff(y_T)
        half = n_paths // 2 if antithetic else n_paths

        def estimate(sign, g):
            f = np.exp(sign * g * k * np.asarray(g_vals, dtype=float))
            if antithetic:
                pairs = 0.5 * (f[:half] + f[half:])
                est = float(pairs.mean())
                se = float(pairs.std(ddof=1) / math.sqrt(half))
            else:
                est = float(f.mean())
                se = float(f.std(ddof=1) / math.sqrt(n_paths))
            return est, se

        e_s, se_s = estimate(+1.0, model.gamma_s)
        e_b, se_b = estimate(-1.0, model.gamma_b)
        v_s = math.log(e_s) / (model.gamma_s * k)
        v_b = -math.log(e_b) / (model.gamma_b * k)
        stderr_s = se_s / (e_s * model.gamma_s * k)
        stderr_b = se_b / (e_b * model.gamma_b * k)
    elif engine == "pde":
        v_s, stderr_s = indifference_value(model, t, y, "seller", "pde", grid=grid)
        v_b, stderr_b = indifference_value(model, t, y, "buyer", "pde", grid=grid)
    else:
        raise ValueError("engine must be 'mc' or 'pde'")

    d_s = delta_factor(model, "seller", t)
    d_b = delta_factor(model, "buyer", t)
    p_star = _sharing_price_formula(model, v_s, v_b, d_s, d_b)
    return NonTradedPriceResult(t, y, v_s, v_b, d_s, d_b, p_star,
                                stderr_s, stderr_b, engine)


def _sharing_price_formula(model: NonTradedModel, v_s: float, v_b: float,
                           d_s: float, d_b: float) -> float:
    total = model.gamma_s + model.gamma_b
    return ((model.gamma_s * v_s + model.gamma_b * v_b) / total
            + math.log(model.gamma_s * model.lam * d_b
                       / (model.gamma_b * (1.0 - model.lam) * d_s)) / total)


def reservation_price(model: NonTradedModel, t: float, y: float, side: str,
                      eps: float, v: Optional[float] = None, **engine_kwargs) -> float:
    """Time-t reservation price at risk level eps.

    Seller: v - ln(1 + eps*delta)/gamma; buyer: v + ln(1 + eps*delta)/gamma.
    ``v`` may carry a precomputed indifference price to avoid re-simulation.
    """
    if v is None:
        v, _ = indifference_value(model, t, y, side, **engine_kwargs)
    d = delta_factor(model, side, t)
    arg = 1.0 + eps * d
    if arg <= 0.0:
        raise LogDomain(f"1 + eps*delta = {arg:g} <= 0: risk level below the "
                        "admissible set")
    g = model.gamma(side)
    return v - math.log(arg) / g if side == "seller" else v + math.log(arg) / g


def risk_sharing_price(model: NonTradedModel, t: float, y: float,
                       **engine_kwargs) -> float:
    """Time-t risk-sharing price at state y."""
    return indifference_prices(model, t, y, **engine_kwargs).p_star


# ---------------------------------------------------------------------------
# PDE engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PdeGrid:
    y_min: float
    y_max: float
    ny: int
    nt: int

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ConfigError("need y_min < y_max")
        if self.ny < 8 or self.nt < 2:
            raise GridTooCoarse("PDE grid needs at least 8 space and 2 time steps")

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny + 1)


def default_pde_grid(model: NonTradedModel, y_anchor: float,
                     ny: int = 400, nt: int = 400, n_dev: float = 6.0) -> PdeGrid:
    """Domain spanning n_dev stationary/terminal deviations around the anchor."""
    probe = y_anchor + np.linspace(-1.0, 1.0, 5)
    a_max = float(np.max(np.abs(model.diffusion(probe))))
    scale = a_max * math.sqrt(model.horizon)
    if model.drift.kind == "linear" and model.drift.b2 < 0.0:
        scale = max(scale, a_max / math.sqrt(-2.0 * model.drift.b2))
    drift_shift = abs(float(minimal_entropy_drift(model, y_anchor))) * model.horizon
    half = n_dev * scale + drift_shift
    return PdeGrid(y_anchor - half, y_anchor + half, ny, nt)


@dataclass(frozen=True)
class PriceField:
    """Backward solution of the price transform on a (t, y) grid."""

    side: str
    eps: float
    ts: np.ndarray
    ys: np.ndarray
    phi: np.ndarray    # shape (nt+1, ny+1), phi[i] at time ts[i]
    price: np.ndarray  # same shape

    def price_at(self, t: float, y: float) -> float:
        return self._interp(self.price, t, y)

    def _interp(self, arr: np.ndarray, t: float, y: float) -> float:
        ts, ys = self.ts, self.ys
        if not (ts[0] - 1e-12 <= t <= ts[-1] + 1e-12):
            raise ValueError("time outside the solved range")
        if not (ys[0] - 1e-12 <= y <= ys[-1] + 1e-12):
            raise ValueError("state outside the solved domain")
        i = min(np.searchsorted(ts, t, side="right") - 1, len(ts) - 2)
        i = max(i, 0)
        j = min(np.searchsorted(ys, y, side="right") - 1, len(ys) - 2)
        j = max(j, 0)
        wt = (t - ts[i]) / (ts[i + 1] - ts[i])
        wy = (y - ys[j]) / (ys[j + 1] - ys[j])
        return float((1 - wt) * ((1 - wy) * arr[i, j] + wy * arr[i, j + 1])
                     + wt * ((1 - wy) * arr[i + 1, j] + wy * arr[i + 1, j + 1]))


def _source_coefficient(model: NonTradedModel, side: str, eps: float,
                        t: float) -> float:
    """R'(t)/R(t) of the linear PDE: analytic time derivative of the delta term."""
    if eps == 0.0:
        return 0.0
    d = delta_factor(model, side, t)
    k = model.hedge_ratio2
    rate = -model.mu ** 2 / (2.0 * model.sigma ** 2)
    return k * rate * eps * d / (1.0 + eps * d)


def solve_price_pde(model: NonTradedModel, side: str, eps: float,
                    grid: PdeGrid, check_residual: Optional[float] = None) -> PriceField:
    """Crank-Nicolson march of the linear transform PDE, backward from maturity.

    The transform phi satisfies
        phi_t + a^2/2 phi_yy + (b - rho mu a / sigma) phi_y + (R'/R) phi = 0
    with terminal data exp(+/- gamma k g(y)) / (1 + eps exp(gamma x))^k,
    and the reservation price is recovered as +/- ln(phi) / (gamma k).
    Boundaries impose a vanishing second derivative.
    """
    if side not in ("seller", "buyer"):
        raise ValueError("side must be 'seller' or 'buyer'")
    g = model.gamma(side)
    k = model.hedge_ratio2
    sign = 1.0 if side == "seller" else -1.0
    ys = grid.ys
    model.diffusion.check_positive(grid.y_min, grid.y_max)
    h = ys[1] - ys[0]
    nt = grid.nt
    dt = model.horizon / nt
    ts = np.linspace(0.0, model.horizon, nt + 1)

    d_T = math.exp(g * model.wealth(side))
    if 1.0 + eps * d_T <= 0.0 or 1.0 + eps * delta_factor(model, side, 0.0) <= 0.0:
        raise LogDomain("1 + eps*delta must stay positive on [0, T]")

    a2 = np.asarray(model.diffusion(ys), dtype=float) ** 2
    adv = np.asarray(minimal_entropy_drift(model, ys), dtype=float)

    n = ys.size
    sub = np.zeros(n)
    diag0 = np.zeros(n)
    sup = np.zeros(n)
    sub[1:-1] = 0.5 * a2[1:-1] / h ** 2 - adv[1:-1] / (2.0 * h)
    diag0[1:-1] = -a2[1:-1] / h ** 2
    sup[1:-1] = 0.5 * a2[1:-1] / h ** 2 + adv[1:-1] / (2.0 * h)
    # linear boundaries: second derivative dropped, one-sided advection
    diag0[0], sup[0] = -adv[0] / h, adv[0] / h
    diag0[-1], sub[-1] = adv[-1] / h, -adv[-1] / h

    def apply_operator(vec: np.ndarray, c: float) -> np.ndarray:
        out = (diag0 + c) * vec
        out[:-1] += sup[:-1] * vec[1:]
        out[1:] += sub[1:] * vec[:-1]
        return out

    phi = np.empty((nt + 1, n))
    terminal = np.exp(sign * g * k * np.asarray(model.payoff(ys), dtype=float))
    terminal /= (1.0 + eps * d_T) ** k
    phi[nt] = terminal

    ab = np.zeros((3, n))
    for i in range(nt - 1, -1, -1):
        c_old = _source_coefficient(model, side, eps, ts[i + 1])
        c_new = _source_coefficient(model, side, eps, ts[i])
        rhs = phi[i + 1] + 0.5 * dt * apply_operator(phi[i + 1], c_old)
        ab[0, 1:] = -0.5 * dt * sup[:-1]
        ab[1, :] = 1.0 - 0.5 * dt * (diag0 + c_new)
        ab[2, :-1] = -0.5 * dt * sub[1:]
        phi[i] = solve_banded((1, 1), ab, rhs)

    if phi.min() <= 0.0:
        raise GridTooCoarse("transform went non-positive; refine the grid or "
                            "widen the domain")
    price = sign * np.log(phi) / (g * k)
    fld = PriceField(side, eps, ts, ys, phi, price)
    if check_residual is not None:
        resid = quasilinear_residual(model, fld)
        if resid > check_residual:
            raise GridTooCoarse(
                f"quasilinear price-PDE residual {resid:.3e} exceeds "
                f"{check_residual:.3e}")
    return fld


def quasilinear_residual(model: NonTradedModel, fld: PriceField,
                         margin: int = 4, terminal_layer: float = 0.05) -> float:
    """Max interior residual of the quasilinear PDE satisfied by the price.

    Seller: P_t + a^2/2 P_yy + adv P_y + (g k / 2) a^2 P_y^2 + L'(t) = 0;
    buyer flips the sign of the quadratic and source terms.  Centered
    differences on the stored field, a few nodes in from the space edges and
    skipping the fraction of time rows nearest maturity, where differenced
    derivatives of a kinked payoff are unbounded for the exact solution too.
    """
    g = model.gamma(fld.side)
    k = model.hedge_ratio2
    sign = 1.0 if fld.side == "seller" else -1.0
    ts, ys, P = fld.ts, fld.ys, fld.price
    dt = ts[1] - ts[0]
    h = ys[1] - ys[0]
    t_hi = max(2, int(round((len(ts) - 1) * (1.0 - terminal_layer))))
    tm = slice(1, t_hi)
    ym = slice(margin, len(ys) - margin)

    P_t = (P[2:t_hi + 1, ym] - P[0:t_hi - 1, ym]) / (2.0 * dt)
    P_y = (P[tm, margin + 1:len(ys) - margin + 1]
           - P[tm, margin - 1:len(ys) - margin - 1]) / (2.0 * h)
    P_yy = (P[tm, margin + 1:len(ys) - margin + 1]
            - 2.0 * P[tm, ym]
            + P[tm, margin - 1:len(ys) - margin - 1]) / h ** 2
    a2 = np.asarray(model.diffusion(ys[ym]), dtype=float) ** 2
    adv = np.asarray(minimal_entropy_drift(model, ys[ym]), dtype=float)

    d = np.array([delta_factor(model, fld.side, t) for t in ts[tm]])
    rate = -model.mu ** 2 / (2.0 * model.sigma ** 2)
    lam_prime = rate * fld.eps * d / (g * (1.0 + fld.eps * d))

    resid = (P_t + 0.5 * a2 * P_yy + adv * P_y
             + sign * 0.5 * g * k * a2 * P_y ** 2 + sign * lam_prime[:, None])
    return float(np.abs(resid).max())


# ---------------------------------------------------------------------------
# optimal trading time (Markov-chain lattice)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StoppingResult:
    ts: np.ndarray
    ys: np.ndarray
    total_risk: np.ndarray      # minimal total risk of trading at (t, y)
    value: float                # optimal expected total risk from (0, y0)
    stop_region: np.ndarray     # bool, trade-now optimal
    terminal_expectation: float  # expected total risk when forced to trade at T
    y0_index: int


def _chain_probabilities(ys: np.ndarray, drift_vals: np.ndarray, a_vals: np.ndarray,
                         dt: float):
    """Trinomial move probabilities matching local mean and variance."""
    h = ys[1] - ys[0]
    nu = a_vals ** 2 * dt / h ** 2
    mu_h = drift_vals * dt / h
    pu = 0.5 * (nu + mu_h)
    pd = 0.5 * (nu - mu_h)
    pm = 1.0 - nu
    if np.any(pu < -1e-12) or np.any(pd < -1e-12) or np.any(pm < -1e-12):
        raise GridTooCoarse("lattice probabilities negative: increase time steps "
                            "or widen spacing")
    return np.clip(pu, 0.0, 1.0), np.clip(pm, 0.0, 1.0), np.clip(pd, 0.0, 1.0)


def _chain_expectation(vals: np.ndarray, pu, pm, pd) -> np.ndarray:
    """One-step conditional expectation with mass clipped at the edges."""
    out = pm * vals
    out[:-1] += pu[:-1] * vals[1:]
    out[-1] += pu[-1] * vals[-1]
    out[1:] += pd[1:] * vals[:-1]
    out[0] += pd[0] * vals[0]
    return out


def optimal_trading_time(model: NonTradedModel, y0: float, nt: int = 200,
                         n_dev: float = 6.0, dy: Optional[float] = None,
                         stop_times: str = "all") -> StoppingResult:
    """Trading time minimizing the expected minimal total risk.

    The total risk of trading at (t, y) combines the agents' first-order
    losses at the time-t optimum; it is deterministic in (t, y), so only the
    physical law of Y matters for the stopping problem.  Backward induction
    runs on a trinomial Markov chain matched to the physical drift and
    diffusion; the indifference-value inputs are produced on the same chain
    under the entropy measure.  ``stop_times='terminal'`` forces trading at
    maturity and returns the corresponding expectation as the value.
    """
    if stop_times not in ("all", "terminal"):
        raise ValueError("stop_times must be 'all' or 'terminal'")
    T = model.horizon
    dt = T / nt
    probe = y0 + np.linspace(-1.0, 1.0, 5)
    a_max = float(np.max(np.abs(model.diffusion(probe))))
    a_min = float(np.min(np.abs(model.diffusion(probe))))
    scale = a_max * math.sqrt(T)
    if model.drift.kind == "linear" and model.drift.b2 < 0.0:
        scale = max(scale, a_max / math.sqrt(-2.0 * model.drift.b2))
    half_width = n_dev * scale + abs(float(model.drift(y0))) * T
    if dy is None:
        # spacing must keep every move probability nonnegative:
        # a*sqrt(dt) <= dy (middle weight) and dy <= a^2/|drift| (up/down)
        reach = 1.05 * half_width + 2.0 * a_max * math.sqrt(3.0 * dt)
        edges = np.array([y0 - reach, y0 + reach])
        b_max = max(
            float(np.max(np.abs(model.drift(edges)))),
            float(np.max(np.abs(minimal_entropy_drift(model, edges)))),
        )
        dy = a_min * math.sqrt(3.0 * dt)
        if b_max > 0.0:
            dy_cap = 0.999 * a_min ** 2 / b_max
            if dy_cap < a_max * math.sqrt(dt):
                raise GridTooCoarse(
                    "drift dominates diffusion at this step count; increase nt"
                )
            dy = min(dy, dy_cap)
    m = max(4, int(math.ceil(half_width / dy)))
    ys = y0 + dy * np.arange(-m, m + 1)
    model.diffusion.check_positive(ys[0], ys[-1])
    ts = np.linspace(0.0, T, nt + 1)

    a_vals = np.asarray(model.diffusion(ys), dtype=float)
    pu_p, pm_p, pd_p = _chain_probabilities(
        ys, np.asarray(model.drift(ys), dtype=float), a_vals, dt)
    pu_q, pm_q, pd_q = _chain_probabilities(
        ys, np.asarray(minimal_entropy_drift(model, ys), dtype=float), a_vals, dt)

    k = model.hedge_ratio2
    g_vals = np.asarray(model.payoff(ys), dtype=float)
    phi_s = np.exp(model.gamma_s * k * g_vals)
    phi_b = np.exp(-model.gamma_b * k * g_vals)

    total = model.gamma_s + model.gamma_b
    risk = np.empty((nt + 1, ys.size))
    for i in range(nt, -1, -1):
        if i < nt:
            phi_s = _chain_expectation(phi_s, pu_q, pm_q, pd_q)
            phi_b = _chain_expectation(phi_b, pu_q, pm_q, pd_q)
        # time-t value-function scalars and indifference values on the slice
        t = ts[i]
        u_s = claim_free_value(model, "seller", t)
        u_b = claim_free_value(model, "buyer", t)
        v_s = np.log(phi_s) / (model.gamma_s * k)
        v_b = -np.log(phi_b) / (model.gamma_b * k)
        m_star = ((-u_s * model.lam * model.gamma_s) ** (model.gamma_b / total)
                  * (-u_b * (1.0 - model.lam) * model.gamma_b) ** (model.gamma_s / total)
                  * np.exp(model.gamma_s * model.gamma_b / total * (v_s - v_b)))
        risk_row = (model.lam * u_s + (1.0 - model.lam) * u_b
                    + m_star * (1.0 / model.gamma_s + 1.0 / model.gamma_b))
        risk[i] = risk_row

    value_T = risk[nt].copy()
    terminal = value_T.copy()
    for i in range(nt - 1, -1, -1):
        terminal = _chain_expectation(terminal, pu_p, pm_p, pd_p)
    terminal_expectation = float(terminal[m])

    V = value_T.copy()
    stop_region = np.zeros((nt + 1, ys.size), dtype=bool)
    stop_region[nt] = True
    for i in range(nt - 1, -1, -1):
        cont = _chain_expectation(V, pu_p, pm_p, pd_p)
        if stop_times == "all":
            stop_here = risk[i] <= cont + 1e-14
            V = np.where(stop_here, risk[i], cont)
            stop_region[i] = stop_here
        else:
            V = cont
    return StoppingResult(ts, ys, risk, float(V[m]), stop_region,
                          terminal_expectation, m)
