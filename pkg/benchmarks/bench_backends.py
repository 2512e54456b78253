"""Compare the compiled kernels against the numpy fallback.

Run:  python benchmarks/bench_backends.py [--repeat 5]

Times the two hot kernels (single-asset holding search; Euler path
stepping) and one end-to-end solve that exercises the holding search
thousands of times.
"""

import argparse
import os
import time

import numpy as np

os.environ.setdefault("RISKSHARE_PURE", "")  # decided per-run below

from riskshare._backend import pure  # noqa: E402

try:
    from riskshare._backend import _fastcore as fast
except ImportError:
    fast = None


def time_fn(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_theta(impl, n_calls=20000):
    rng = np.random.default_rng(0)
    probs = rng.dirichlet(np.ones(4))
    incr = np.array([1.5, 0.5, -0.5, -1.5])
    bases = rng.uniform(0.5, 3.0, size=(n_calls, 4))

    def run():
        for i in range(n_calls):
            impl.solve_theta_1d(1, 0.0, probs, incr, bases[i])

    return run


def bench_euler(impl, n_paths=100_000, n_steps=250):
    z = np.random.default_rng(1).standard_normal((n_paths, n_steps))

    def run():
        impl.euler_terminal(0.0, 0.0, 1.0, n_steps, z, 0, 0.3, 0.0, 2, 0.0, -1.0, 0.125)

    return run


def bench_solve():
    import importlib

    import riskshare._backend
    import riskshare.maximization
    import riskshare.sharing

    importlib.reload(riskshare._backend)
    importlib.reload(riskshare.maximization)

    import riskshare as rs
    from riskshare.sharing import RiskSharingProblem, solve

    m = rs.FiniteMarket(np.array([0.25] * 4), np.array([[1.5, 0.5, -0.5, -1.5]]))
    claim = rs.Claim(np.array([1.2, 0.4, 0.1, 0.0]))
    seller = rs.Agent(rs.log(), 2.0, "seller")
    buyer = rs.Agent(rs.log(), 2.0, "buyer")

    def run():
        for lam in np.linspace(0.2, 0.8, 7):
            solve(RiskSharingProblem(m, seller, buyer, claim, float(lam)))

    return run, riskshare._backend.BACKEND


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rows = []
    rows.append(("holding search x20k (numpy)", time_fn(bench_theta(pure), args.repeat)))
    if fast is not None:
        rows.append(("holding search x20k (cython)", time_fn(bench_theta(fast), args.repeat)))
    rows.append(("euler 1e5x250 (numpy)", time_fn(bench_euler(pure), args.repeat)))
    if fast is not None:
        rows.append(("euler 1e5x250 (cython)", time_fn(bench_euler(fast), args.repeat)))

    run, backend = bench_solve()
    rows.append((f"7-weight log-agent solve ({backend})", time_fn(run, args.repeat)))

    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark'.ljust(width)}  best (s)")
    for name, t in rows:
        print(f"{name.ljust(width)}  {t:8.4f}")
    if fast is None:
        print("\ncompiled backend unavailable; numpy fallback only")


if __name__ == "__main__":
    main()
