import json
import math

import numpy as np
import pytest

import pysie


def test_catalog_lists_models():
    names = [m["name"] for m in pysie.catalog()]
    assert names == ["linear-reset", "rimless-wheel", "vdp-adapter", "bouncing-ball"]


def test_linear_reset_closed_form():
    m = pysie.Model("linear-reset", {"a": math.log(2.0)})
    out = pysie.simulate(m, [1.0, 0.0], 5.0, sample_dt=0.05)
    # starting on S resets at t = 0, then one impact per unit time
    times = [imp["t"] for imp in out["impacts"]]
    assert times == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0, 5.0], abs=1e-9)
    assert out["termination"] == "horizon-reached"
    assert out["x"].shape == (len(out["t"]), 2)


def test_forced_linear_reset_ultimate_bound():
    m = pysie.Model("linear-reset")
    report, orbit = pysie.solve(m)
    assert report.verdict == "LES"
    assert report.spectral_radius == pytest.approx(0.5, abs=1e-8)
    res = pysie.run_sweep(m, orbit, report, u_amps=[0.0, 0.1], trials=3, seed=4)
    assert res["cells"][1]["ultimate_discrete"] == pytest.approx(0.1 / math.log(2.0), rel=0.02)
    assert res["equivalence"]["passed"]


def test_rimless_fixed_point_and_distance():
    m = pysie.Model("rimless-wheel")
    report, orbit = pysie.solve(m)
    alpha, gamma, gl = math.pi / 8, 0.08, 9.81
    omega = math.sqrt(4 * gl * math.sin(alpha) * math.sin(gamma)) / math.sin(2 * alpha)
    assert report.x_star[1] == pytest.approx(omega, rel=1e-9)
    assert abs(report.eigenvalues[0]) == pytest.approx(math.cos(2 * alpha) ** 2, abs=1e-5)
    assert orbit.distance(orbit.eval(0.3 * orbit.T_star)) < 1e-9
    cert = pysie.certify_prop1(orbit, m, samples=200, seed=3)
    assert cert["violations"] == 0
    assert cert["lambda_hat"] > 0
    assert np.all(np.asarray(cert["dist_to_orbit"]) <= np.asarray(cert["dist_to_xstar"]) + 1e-9)


def test_errors_carry_a_kind():
    with pytest.raises(pysie.SieError) as err:
        pysie.Model("double-pendulum")
    assert err.value.kind == "unknown_model"
    with pytest.raises(pysie.SieError) as err:
        pysie.find_fixed_point(pysie.Model("rimless-wheel"), [math.pi / 8 + 0.08, 1.2])
    assert err.value.kind in ("newton_diverged", "infinite_time_to_impact")


def test_cli_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"name": "bouncing-ball"}, "simulate": {"x0": [1, 0]}}))
    code, _, _ = pysie.run_cli("simulate", str(cfg), str(tmp_path / "out"))
    assert code == 2
    assert pysie.format_number(0.1) == "0.10000000000000001"
