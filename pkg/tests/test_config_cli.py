import json
import math
from importlib import resources

import numpy as np
import pytest

from riskshare import cli
from riskshare.config import load_config, parse_config
from riskshare.errors import ConfigError


def shipped(name: str) -> str:
    return str(resources.files("riskshare.configs").joinpath(name))


CONFIGS = ["trinomial.json", "quadrinomial_log.json", "nontraded_ou.json"]


@pytest.mark.parametrize("name", CONFIGS)
def test_config_round_trip(name):
    with open(shipped(name), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    cfg = parse_config(doc)
    normalized = cfg.normalized()
    again = parse_config(normalized).normalized()
    assert again == normalized


def test_config_requires_exactly_one_model_block():
    with pytest.raises(ConfigError):
        parse_config({})
    with open(shipped("trinomial.json")) as fh:
        doc = json.load(fh)
    doc["nontraded_model"] = {"mu": 0.0}
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_config_rejects_malformed_blocks(tmp_path):
    with open(shipped("trinomial.json")) as fh:
        doc = json.load(fh)
    bad = dict(doc)
    bad["seller"] = {"utility": {"kind": "mystery"}, "initial_wealth": 0.0}
    with pytest.raises(ConfigError):
        parse_config(bad)
    missing = tmp_path / "missing.json"
    with pytest.raises(ConfigError):
        load_config(str(missing))
    notjson = tmp_path / "broken.json"
    notjson.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(notjson))


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_price_command_canonical(capsys):
    code, out = run_cli(capsys, "price", "--config", shipped("trinomial.json"))
    assert code == 0
    doc = json.loads(out)
    v_s = math.log((2 + math.e) / 3)
    v_b = -math.log((2 + math.exp(-1)) / 3)
    assert doc["price"] == pytest.approx((v_s + v_b) / 2, abs=1e-9)
    assert doc["seller_indifference"] == pytest.approx(v_s, abs=1e-9)
    assert doc["buyer_indifference"] == pytest.approx(v_b, abs=1e-9)
    assert doc["inside_bounds"] is True
    assert doc["arbitrage_lower"] == pytest.approx(0.0, abs=1e-9)
    assert doc["arbitrage_upper"] == pytest.approx(1.0, abs=1e-9)


def test_price_command_extreme_weight_outside_bounds(capsys, tmp_path):
    with open(shipped("trinomial.json")) as fh:
        doc = json.load(fh)
    doc["lambda"] = 0.999
    path = tmp_path / "extreme.json"
    path.write_text(json.dumps(doc))
    code, out = run_cli(capsys, "price", "--config", str(path))
    assert code == 0
    assert json.loads(out)["inside_bounds"] is False


def test_exit_codes(capsys, tmp_path):
    arb = {
        "market": {"probs": [0.5, 0.5], "increments": [[1.0, 2.0]]},
        "claim": {"payoffs": [0.0, 1.0]},
        "seller": {"utility": {"kind": "exponential", "gamma": 1.0},
                   "initial_wealth": 0.0},
        "buyer": {"utility": {"kind": "exponential", "gamma": 1.0},
                  "initial_wealth": 0.0},
        "lambda": 0.5,
    }
    p = tmp_path / "arb.json"
    p.write_text(json.dumps(arb))
    code, _ = run_cli(capsys, "price", "--config", str(p))
    assert code == 3

    with open(shipped("quadrinomial_log.json")) as fh:
        doc = json.load(fh)
    doc["seller"]["initial_wealth"] = 0.5  # below the super-replication floor
    p2 = tmp_path / "infeasible.json"
    p2.write_text(json.dumps(doc))
    code, _ = run_cli(capsys, "price", "--config", str(p2))
    assert code == 2


def test_curves_csv_contract(capsys, tmp_path):
    with open(shipped("trinomial.json")) as fh:
        doc = json.load(fh)
    doc["eps_grid"] = [-0.5, 1.0, 151]  # includes zero exactly
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    out_csv = tmp_path / "curves.csv"
    code, _ = run_cli(capsys, "curves", "--config", str(path), "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0] == "eps,P_s,P_b,dP_s,dP_b"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    eps = np.array([r[0] for r in rows])
    p_s = np.array([r[1] for r in rows])
    p_b = np.array([r[2] for r in rows])
    assert np.all(np.diff(p_s) < 0.0)
    assert np.all(np.diff(p_b) > 0.0)
    at_zero = rows[int(np.argmin(np.abs(eps)))]
    assert at_zero[1] == pytest.approx(math.log((2 + math.e) / 3), abs=1e-9)
    assert at_zero[2] == pytest.approx(-math.log((2 + math.exp(-1)) / 3), abs=1e-9)


def test_sweep_csv_contract(capsys, tmp_path):
    with open(shipped("trinomial.json")) as fh:
        doc = json.load(fh)
    doc["lambda_grid"] = [round(v, 6) for v in np.linspace(0.1, 0.9, 9)]
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    out_csv = tmp_path / "sweep.csv"
    code, _ = run_cli(capsys, "sweep", "--config", str(path), "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0] == "kind,lambda,price,eps_s,eps_b,multiplier"
    sweep_rows = [ln.split(",") for ln in lines[1:] if ln.startswith("sweep")]
    prices = np.array([float(r[2]) for r in sweep_rows])
    assert prices.size == 9
    assert np.all(np.diff(prices) > 0.0)
    tail = [ln.split(",")[0] for ln in lines[-2:]]
    assert tail == ["lambda_low", "lambda_high"]


def test_mz_price_command(capsys):
    code, out = run_cli(capsys, "mz", "price", "--config",
                        shipped("nontraded_ou.json"), "--paths", "20000",
                        "--seed", "5")
    assert code == 0
    doc = json.loads(out)
    assert doc["engine"] == "mc"
    assert 0.0 <= doc["v_s"] <= 1.0
    assert 0.0 <= doc["v_b"] <= 1.0
    assert doc["stderr_v_s"] > 0.0


def test_mz_field_and_stop_commands(capsys, tmp_path):
    out_csv = tmp_path / "field.csv"
    code, _ = run_cli(capsys, "mz", "field", "--config",
                      shipped("nontraded_ou.json"), "--grid", "60,60",
                      "--side", "seller", "--eps", "0.1", "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0] == "t,y,value"
    assert len(lines) == 1 + 61 * 61

    code, out = run_cli(capsys, "mz", "stop", "--config",
                        shipped("nontraded_ou.json"), "--grid", "0,100")
    assert code == 0
    doc = json.loads(out)
    assert doc["value"] <= min(doc["immediate_risk"],
                               doc["terminal_expectation"]) + 1e-9


@pytest.mark.parametrize("argv", [
    ("price", "--config", shipped("trinomial.json")),
    ("curves", "--config", shipped("trinomial.json")),
    ("sweep", "--config", shipped("trinomial.json")),
    ("mz", "price", "--config", shipped("nontraded_ou.json"),
     "--paths", "20000", "--seed", "7"),
])
def test_repeated_runs_are_byte_identical(capsys, argv):
    _, first = run_cli(capsys, *argv)
    _, second = run_cli(capsys, *argv)
    assert first == second
