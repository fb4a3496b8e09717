import json
import os
from pathlib import Path

import numpy as np
import pytest

import zempc

CONFIG_DIR = Path(os.environ.get("ZEMPC_CONFIG_DIR", Path(__file__).resolve().parents[2] / "configs"))


def test_default_config_is_full_json():
    cfg = json.loads(zempc.default_config())
    assert cfg["zone"]["lower"] == pytest.approx(0.85)
    assert cfg["zone"]["upper"] == pytest.approx(0.90)


@pytest.mark.parametrize("name", ["default.json", "noise_comparison.json", "ramp.json", "startup.json"])
def test_shipped_configs_load(name):
    json.loads(zempc.load_config(str(CONFIG_DIR / name)))


def test_bad_config_raises():
    with pytest.raises(zempc.ConfigError):
        zempc.steady_state(5e-4, json.dumps({"no_such_key": 1}))
    with pytest.raises(ValueError):
        zempc.steady_state(-1.0)


def test_steady_state():
    ss = zempc.steady_state(5.4e-4)
    assert 0.85 < ss["efficiency"] < 0.90
    assert ss["residual"] < 1e-8
    assert abs(ss["co2_in"] - ss["co2_out"]) <= 1e-6 * ss["co2_in"]
    assert ss["state"].shape == (50,)
    assert zempc.efficiency_for_flow(8e-4) > ss["efficiency"]


def test_stage_cost():
    assert zempc.stage_cost(0.88) == pytest.approx(-0.88)
    assert zempc.zone_penalty(0.88) == 0.0
    assert zempc.zone_penalty(0.91) == pytest.approx(1e4 * 0.01**2)


def test_lyapunov():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    a -= (np.max(np.linalg.eigvals(a).real) + 0.5) * np.eye(6)
    q = np.eye(6)
    p = zempc.solve_lyapunov(a, q)
    assert np.allclose(a @ p + p @ a.T + q, 0.0, atol=1e-10)
    assert zempc.lyapunov_residual(a, p, q) < 1e-10


def test_invariance_sdp_double_integrator():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    r = zempc.invariance_sdp(a, b, 1.0)
    assert r["lyapunov_certificate"] <= -1e-9
    assert r["schur_certificate"] >= -1e-9
    assert np.all(np.linalg.eigvals(a + b @ r["K"]).real < 0)


def test_modify_zone():
    mz = zempc.modify_zone()
    assert not mz["empty"]
    assert 0.85 <= mz["y_lo"] - 0.009 and mz["y_hi"] + 0.009 <= 0.90
    assert json.loads(mz["json"])["iterations"] == mz["iterations"]


def test_simulate_writes_trace(tmp_path):
    r = zempc.simulate("nzempc", duration=2, seed=4, out_dir=str(tmp_path))
    assert r["error"] == ""
    assert r["y"].shape == (2,)
    assert np.all(r["u"] > 0)
    assert r["summary"]["average_cost"] == pytest.approx(r["stage_cost"].mean())
    assert (tmp_path / "trace.csv").read_text().count("\n") == 3
