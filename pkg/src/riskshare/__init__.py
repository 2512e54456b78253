"""Risk-sharing prices for non-replicable claims in incomplete markets.

Two computable settings are provided: a finite-state one-period market
(exact solvers with brute-force certification oracles) and a diffusion model
of a European claim on a non-traded asset (closed forms up to conditional
expectations, evaluated by Monte Carlo or a backward PDE).
"""

from ._backend import BACKEND
from .market import Claim, FiniteMarket, PriceInterval, arbitrage_bounds, is_replicable
from .maximization import ValueResult, inverse_value, value_function
from .curves import ReservationCurve, indifference_price
from .sharing import (
    RiskSharingProblem,
    RiskSharingSolution,
    exponential_closed_form,
    lambda_bounds,
    lambda_sweep,
    residual_risk_objective,
    solve,
    solve_generalized,
)
from .utilities import Agent, exponential, log, power

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Claim",
    "FiniteMarket",
    "PriceInterval",
    "arbitrage_bounds",
    "is_replicable",
    "ValueResult",
    "value_function",
    "inverse_value",
    "ReservationCurve",
    "indifference_price",
    "RiskSharingProblem",
    "RiskSharingSolution",
    "solve",
    "solve_generalized",
    "exponential_closed_form",
    "lambda_sweep",
    "lambda_bounds",
    "residual_risk_objective",
    "Agent",
    "exponential",
    "log",
    "power",
]
