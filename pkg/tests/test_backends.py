import subprocess
import sys

import numpy as np
import pytest

from riskshare import _backend
from riskshare._backend import pure

fastcore = pytest.importorskip("riskshare._backend._fastcore",
                               reason="compiled kernels not built")


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "pure")


def test_holding_search_parity():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(2, 9))
        probs = rng.dirichlet(np.ones(n))
        incr = rng.normal(size=n)
        if not (np.any(incr > 1e-9) and np.any(incr < -1e-9)):
            continue
        kind = int(rng.integers(0, 3))
        param = {0: rng.uniform(0.2, 3.0), 1: 0.0, 2: rng.uniform(0.3, 3.0)}[kind]
        base = (rng.normal(size=n) if kind == 0
                else rng.uniform(0.5, 3.0, size=n))
        t_py = pure.solve_theta_1d(kind, param, probs, incr, base)
        t_cy = fastcore.solve_theta_1d(kind, param, probs, incr, base)
        assert np.isnan(t_py) == np.isnan(t_cy)
        if not np.isnan(t_py):
            assert t_cy == pytest.approx(t_py, abs=1e-12)
            checked += 1
    assert checked > 200


def test_holding_search_infeasible_parity():
    probs = np.array([0.5, 0.5])
    incr = np.array([1.0, -1.0])
    base = np.array([-2.0, -2.0])
    assert np.isnan(pure.solve_theta_1d(pure.KIND_LOG, 0.0, probs, incr, base))
    assert np.isnan(fastcore.solve_theta_1d(pure.KIND_LOG, 0.0, probs, incr, base))


def test_euler_bitwise_parity():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((500, 200))
    args = (0.3, 0.0, 1.0, 200, z)
    for coeffs in [(0, 0.3, 0.0, 2, 0.1, -1.0, 0.2),
                   (0, 0.5, 0.0, 0, 0.0, 0.0, 0.0),
                   (1, 0.2, 0.05, 1, 0.3, 0.0, -0.1)]:
        a = np.asarray(pure.euler_terminal(*args, *coeffs))
        b = np.asarray(fastcore.euler_terminal(*args, *coeffs))
        assert np.array_equal(a, b)


def test_pure_env_override_forces_fallback():
    code = ("import riskshare._backend as b; print(b.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env={"RISKSHARE_PURE": "1", "PATH": "/usr/bin"},
                         cwd="/root/pkg")
    assert out.stdout.strip() == "pure"


def test_solvers_agree_across_backends(tmp_path):
    # end-to-end: the canonical price must not depend on the backend
    code = """
import numpy as np
import riskshare as rs
from riskshare.sharing import RiskSharingProblem, solve
m = rs.FiniteMarket(np.array([0.25]*4), np.array([[1.5, 0.5, -0.5, -1.5]]))
claim = rs.Claim(np.array([1.2, 0.4, 0.1, 0.0]))
p = RiskSharingProblem(m, rs.Agent(rs.log(), 2.0), rs.Agent(rs.log(), 2.0), claim, 0.5)
print(repr(solve(p).price))
"""
    runs = {}
    for env_flag in ("", "1"):
        env = {"PATH": "/usr/bin"}
        if env_flag:
            env["RISKSHARE_PURE"] = env_flag
        out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                             text=True, env=env, cwd="/root/pkg")
        assert out.returncode == 0, out.stderr
        runs[env_flag] = float(out.stdout.strip())
    assert runs[""] == pytest.approx(runs["1"], abs=1e-10)
