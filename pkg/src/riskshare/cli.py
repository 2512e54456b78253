"""Command-line surface: price, curves, sweep, and diffusion-model commands.

Scalar results print as JSON on stdout; grids are CSV with fixed
12-significant-digit formatting so identical configs and seeds produce
byte-identical output.  Exit codes: 0 success, 2 solvable infeasibility,
3 invalid input, 4 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from .config import RunConfig, load_config
from .curves import indifference_price
from .errors import (
    ArbitrageDetected,
    CompleteMarket,
    ConfigError,
    DomainError,
    EmptyFeasibleGrid,
    GridTooCoarse,
    InfeasibleWealth,
    LogDomain,
    NoOverlap,
    NonConvergence,
    NonMonotonePsi,
    NonPositiveMarginal,
    OutOfRange,
    StepUnderflow,
    WrongUtilityKind,
)
from .market import arbitrage_bounds
from .nontraded import (
    PdeGrid,
    default_pde_grid,
    indifference_prices,
    optimal_trading_time,
    solve_price_pde,
)
from .sharing import lambda_bounds, lambda_sweep, solve

_INFEASIBLE = (NoOverlap, InfeasibleWealth, EmptyFeasibleGrid)
_INVALID = (ConfigError, ArbitrageDetected, CompleteMarket, WrongUtilityKind,
            DomainError, OutOfRange, LogDomain, NonPositiveMarginal,
            NonMonotonePsi, ValueError)
_NUMERICAL = (NonConvergence, GridTooCoarse, StepUnderflow)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) if not isinstance(v, str) else v for v in row)
                 for row in rows)
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_json(payload: dict):
    def clean(v):
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return float(v)
        return v

    payload = {k: clean(v) for k, v in payload.items()}
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _need_finite(cfg: RunConfig):
    if cfg.kind != "finite":
        raise ConfigError("this command needs a finite 'market' config")
    return cfg.problem


def _need_nontraded(cfg: RunConfig):
    if cfg.kind != "nontraded":
        raise ConfigError("this command needs a 'nontraded_model' config")
    return cfg.model


def cmd_price(cfg: RunConfig, args) -> int:
    problem = _need_finite(cfg)
    sol = solve(problem)
    bounds = arbitrage_bounds(problem.market, problem.claim)
    v_s = indifference_price(problem.market, problem.seller, problem.claim, "seller")
    v_b = indifference_price(problem.market, problem.buyer, problem.claim, "buyer")
    inside = bounds.lower < sol.price < bounds.upper
    _print_json({
        "price": sol.price,
        "eps_s": sol.eps_s,
        "eps_b": sol.eps_b,
        "multiplier": sol.multiplier,
        "objective": sol.objective,
        "seller_indifference": v_s,
        "buyer_indifference": v_b,
        "arbitrage_lower": bounds.lower,
        "arbitrage_upper": bounds.upper,
        "inside_bounds": inside,
        "lambda": problem.lam,
    })
    return 0


def _default_eps_grid(problem, n: int = 101):
    s_curve = problem.seller_curve()
    b_curve = problem.buyer_curve()
    s_lo, s_hi = s_curve.nonarbitrage_loss_interval()
    b_lo, b_hi = b_curve.nonarbitrage_loss_interval()
    lo, hi = min(s_lo, b_lo), max(s_hi, b_hi)
    pad = 0.1 * (hi - lo) if hi > lo else 0.5
    lo, hi = lo - pad, hi + pad
    floor = max(s_curve.a_lower, b_curve.a_lower)
    if np.isfinite(floor):
        lo = max(lo, floor + 1e-9 * max(1.0, abs(floor)) + 1e-12)
    return np.linspace(lo, hi, n), s_curve, b_curve


def cmd_curves(cfg: RunConfig, args) -> int:
    problem = _need_finite(cfg)
    if cfg.eps_grid is not None:
        lo, hi, n = cfg.eps_grid
        eps = np.linspace(lo, hi, int(n))
        s_curve, b_curve = problem.seller_curve(), problem.buyer_curve()
    else:
        eps, s_curve, b_curve = _default_eps_grid(problem)
    rows = []
    for e in eps:
        if e <= s_curve.a_lower or e <= b_curve.a_lower:
            continue
        rows.append((e, s_curve.price(e), b_curve.price(e),
                     s_curve.slope(e), b_curve.slope(e)))
    _write_csv(args.out, ["eps", "P_s", "P_b", "dP_s", "dP_b"], rows)
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    problem = _need_finite(cfg)
    lambdas = cfg.lambda_grid or [round(v, 10) for v in np.linspace(0.05, 0.95, 19)]
    rows = [("sweep", r.lam, r.price, r.eps_s, r.eps_b, r.multiplier)
            for r in lambda_sweep(problem, lambdas)]
    bounds = arbitrage_bounds(problem.market, problem.claim)
    lam_lo, lam_hi = lambda_bounds(problem, bounds)
    rows.append(("lambda_low", lam_lo, bounds.lower, "", "", ""))
    rows.append(("lambda_high", lam_hi, bounds.upper, "", "", ""))
    _write_csv(args.out, ["kind", "lambda", "price", "eps_s", "eps_b", "multiplier"],
               rows)
    return 0


def _parse_grid_arg(model, y0, arg):
    if arg:
        ny, nt = (int(v) for v in arg.split(","))
        base = default_pde_grid(model, y0)
        return PdeGrid(base.y_min, base.y_max, ny, nt)
    return default_pde_grid(model, y0)


def cmd_mz(cfg: RunConfig, args) -> int:
    model = _need_nontraded(cfg)
    y0, t0 = cfg.y0, cfg.t0
    if args.mz_command == "price":
        grid = _parse_grid_arg(model, y0, args.grid) if args.engine == "pde" else None
        res = indifference_prices(model, t0, y0, engine=args.engine,
                                  n_paths=args.paths, seed=args.seed, grid=grid)
        _print_json({
            "t": res.t, "y": res.y,
            "v_s": res.v_s, "v_b": res.v_b,
            "stderr_v_s": res.stderr_v_s, "stderr_v_b": res.stderr_v_b,
            "delta_s": res.delta_s, "delta_b": res.delta_b,
            "p_star": res.p_star, "engine": res.engine,
        })
        return 0
    if args.mz_command == "field":
        grid = _parse_grid_arg(model, y0, args.grid)
        fld = solve_price_pde(model, args.side, args.eps, grid)
        rows = [(t, y, fld.price[i, j])
                for i, t in enumerate(fld.ts)
                for j, y in enumerate(fld.ys)]
        _write_csv(args.out, ["t", "y", "value"], rows)
        return 0
    if args.mz_command == "stop":
        nt = int(args.grid.split(",")[1]) if args.grid else 200
        res = optimal_trading_time(model, y0, nt=nt)
        _print_json({
            "value": res.value,
            "immediate_risk": float(res.total_risk[0, res.y0_index]),
            "terminal_expectation": res.terminal_expectation,
        })
        if args.out:
            rows = [(t, y, int(res.stop_region[i, j]), res.total_risk[i, j])
                    for i, t in enumerate(res.ts)
                    for j, y in enumerate(res.ys)]
            _write_csv(args.out, ["t", "y", "stop", "total_risk"], rows)
        return 0
    raise ConfigError(f"unknown mz subcommand '{args.mz_command}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskshare",
        description="Risk-sharing prices of non-replicable claims",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="CSV output path (default stdout)")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")

    p_price = sub.add_parser("price", help="risk-sharing price of the claim")
    common(p_price)

    p_curves = sub.add_parser("curves", help="sampled reservation-price curves")
    common(p_curves)

    p_sweep = sub.add_parser("sweep", help="price across sharing weights")
    common(p_sweep)

    p_mz = sub.add_parser("mz", help="non-traded-asset diffusion model")
    p_mz.add_argument("mz_command", choices=["price", "field", "stop"])
    common(p_mz)
    p_mz.add_argument("--engine", choices=["mc", "pde"], default="mc")
    p_mz.add_argument("--paths", type=int, default=100_000)
    p_mz.add_argument("--grid", default=None, help="ny,nt for PDE/lattice grids")
    p_mz.add_argument("--side", choices=["seller", "buyer"], default="seller")
    p_mz.add_argument("--eps", type=float, default=0.0)
    return parser


_DISPATCH = {"price": cmd_price, "curves": cmd_curves, "sweep": cmd_sweep,
             "mz": cmd_mz}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _DISPATCH[args.command](cfg, args)
    except _INFEASIBLE as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except _INVALID as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the stream
        return 0


if __name__ == "__main__":
    sys.exit(main())
