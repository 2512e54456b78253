"""JSON run-configuration schema: parsing, validation, normalization.

A config document carries exactly one of a finite market block or a
non-traded diffusion model block, plus agents and the sharing weight.
``normalize`` produces the canonical dict form; parsing a normalized config
and re-normalizing is the identity (round-trip contract of the CLI).
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .market import Claim, FiniteMarket
from .nontraded import (
    NonTradedModel,
    affine_diffusion,
    capped_call,
    clipped_identity,
    constant_diffusion,
    constant_drift,
    constant_payoff,
    linear_drift,
    ou_drift,
    zero_drift,
)
from .sharing import RiskSharingProblem
from .utilities import Agent, exponential, log, power

__all__ = ["RunConfig", "parse_config", "load_config"]


def _require(block: dict, key: str, context: str):
    if key not in block:
        raise ConfigError(f"missing '{key}' in {context}")
    return block[key]


def _parse_utility(block: dict, context: str):
    kind = _require(block, "kind", context)
    if kind == "exponential":
        return exponential(float(_require(block, "gamma", context)))
    if kind == "log":
        return log()
    if kind == "power":
        return power(float(_require(block, "rra", context)))
    raise ConfigError(f"unknown utility kind '{kind}' in {context}")


def _utility_dict(u) -> dict:
    if u.kind == "exponential":
        return {"kind": "exponential", "gamma": u.gamma}
    if u.kind == "log":
        return {"kind": "log"}
    if u.kind == "power":
        return {"kind": "power", "rra": u.rra}
    raise ConfigError("custom utilities cannot be serialized to JSON")


def _parse_agent(block: dict, role: str) -> Agent:
    utility = _parse_utility(_require(block, "utility", f"{role} agent"), f"{role} agent")
    return Agent(utility, float(_require(block, "initial_wealth", f"{role} agent")),
                 role)


def _parse_diffusion(block: dict):
    kind = _require(block, "kind", "diffusion 'a'")
    if kind == "constant":
        return constant_diffusion(float(_require(block, "value", "diffusion 'a'")))
    if kind == "affine":
        return affine_diffusion(float(_require(block, "intercept", "diffusion 'a'")),
                                float(_require(block, "slope", "diffusion 'a'")))
    raise ConfigError(f"unknown diffusion kind '{kind}'")


def _diffusion_dict(d) -> dict:
    if d.kind == "constant":
        return {"kind": "constant", "value": d.a1}
    return {"kind": "affine", "intercept": d.a1, "slope": d.a2}


def _parse_drift(block: dict):
    kind = _require(block, "kind", "drift 'b'")
    if kind == "zero":
        return zero_drift()
    if kind == "constant":
        return constant_drift(float(_require(block, "value", "drift 'b'")))
    if kind == "ou":
        return ou_drift(float(_require(block, "kappa", "drift 'b'")),
                        float(block.get("mean", 0.0)))
    if kind == "linear":
        return linear_drift(float(_require(block, "intercept", "drift 'b'")),
                            float(_require(block, "slope", "drift 'b'")))
    raise ConfigError(f"unknown drift kind '{kind}'")


def _drift_dict(d) -> dict:
    if d.kind == "zero":
        return {"kind": "zero"}
    if d.kind == "constant":
        return {"kind": "constant", "value": d.b1}
    return {"kind": "linear", "intercept": d.b1, "slope": d.b2}


def _parse_payoff(block: dict):
    kind = _require(block, "kind", "payoff 'g'")
    if kind == "constant":
        return constant_payoff(float(_require(block, "value", "payoff 'g'")))
    if kind == "capped_call":
        return capped_call(float(_require(block, "strike", "payoff 'g'")),
                           float(_require(block, "cap", "payoff 'g'")))
    if kind == "clip":
        return clipped_identity(float(_require(block, "lower", "payoff 'g'")),
                                float(_require(block, "upper", "payoff 'g'")))
    raise ConfigError(f"unknown payoff kind '{kind}'")


def _payoff_dict(p) -> dict:
    return {"kind": p.kind, **p.params}


@dataclass
class RunConfig:
    """Parsed run configuration: exactly one of the two model kinds."""

    kind: str  # "finite" | "nontraded"
    problem: Optional[RiskSharingProblem] = None
    model: Optional[NonTradedModel] = None
    y0: float = 0.0
    t0: float = 0.0
    lambda_grid: Optional[list] = None
    eps_grid: Optional[list] = None

    def normalized(self) -> dict:
        if self.kind == "finite":
            p = self.problem
            out = {
                "market": {
                    "probs": [float(v) for v in p.market.probs],
                    "increments": [[float(v) for v in row]
                                   for row in p.market.increments],
                },
                "claim": {"payoffs": [float(v) for v in p.claim.payoffs]},
                "seller": {"utility": _utility_dict(p.seller.utility),
                           "initial_wealth": float(p.seller.initial_wealth)},
                "buyer": {"utility": _utility_dict(p.buyer.utility),
                          "initial_wealth": float(p.buyer.initial_wealth)},
                "lambda": float(p.lam),
            }
        else:
            m = self.model
            out = {
                "nontraded_model": {
                    "mu": m.mu, "sigma": m.sigma, "rho": m.rho,
                    "a": _diffusion_dict(m.diffusion),
                    "b": _drift_dict(m.drift),
                    "g": _payoff_dict(m.payoff),
                    "horizon": m.horizon,
                    "gamma_s": m.gamma_s, "gamma_b": m.gamma_b,
                    "x_s": m.x_s, "x_b": m.x_b,
                    "lambda": m.lam,
                    "y0": self.y0, "t": self.t0,
                },
            }
        if self.lambda_grid is not None:
            out["lambda_grid"] = [float(v) for v in self.lambda_grid]
        if self.eps_grid is not None:
            out["eps_grid"] = [float(v) for v in self.eps_grid]
        return out


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    has_market = "market" in doc
    has_model = "nontraded_model" in doc
    if has_market == has_model:
        raise ConfigError("config must contain exactly one of 'market' or "
                          "'nontraded_model'")

    lambda_grid = doc.get("lambda_grid")
    if lambda_grid is not None:
        lambda_grid = [float(v) for v in lambda_grid]
        if any(not 0.0 < v < 1.0 for v in lambda_grid):
            raise ConfigError("lambda_grid entries must lie in (0, 1)")
    eps_grid = doc.get("eps_grid")
    if eps_grid is not None:
        eps_grid = [float(v) for v in eps_grid]
        if len(eps_grid) != 3 or eps_grid[0] >= eps_grid[1] or eps_grid[2] < 2:
            raise ConfigError("eps_grid must be [low, high, count>=2]")

    try:
        if has_market:
            mblock = doc["market"]
            market = FiniteMarket(
                np.asarray(_require(mblock, "probs", "market"), dtype=float),
                np.asarray(_require(mblock, "increments", "market"), dtype=float),
            )
            claim = Claim(np.asarray(
                _require(_require(doc, "claim", "config"), "payoffs", "claim"),
                dtype=float))
            seller = _parse_agent(_require(doc, "seller", "config"), "seller")
            buyer = _parse_agent(_require(doc, "buyer", "config"), "buyer")
            lam = float(_require(doc, "lambda", "config"))
            problem = RiskSharingProblem(market, seller, buyer, claim, lam)
            return RunConfig("finite", problem=problem, lambda_grid=lambda_grid,
                             eps_grid=eps_grid)
        block = doc["nontraded_model"]
        model = NonTradedModel(
            mu=float(_require(block, "mu", "nontraded_model")),
            sigma=float(_require(block, "sigma", "nontraded_model")),
            rho=float(_require(block, "rho", "nontraded_model")),
            diffusion=_parse_diffusion(_require(block, "a", "nontraded_model")),
            drift=_parse_drift(_require(block, "b", "nontraded_model")),
            payoff=_parse_payoff(_require(block, "g", "nontraded_model")),
            horizon=float(_require(block, "horizon", "nontraded_model")),
            gamma_s=float(_require(block, "gamma_s", "nontraded_model")),
            gamma_b=float(_require(block, "gamma_b", "nontraded_model")),
            x_s=float(block.get("x_s", 0.0)),
            x_b=float(block.get("x_b", 0.0)),
            lam=float(block.get("lambda", 0.5)),
        )
        return RunConfig("nontraded", model=model,
                         y0=float(block.get("y0", 0.0)),
                         t0=float(block.get("t", 0.0)),
                         lambda_grid=lambda_grid, eps_grid=eps_grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)
