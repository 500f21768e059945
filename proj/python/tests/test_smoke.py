import json

import numpy as np
import pytest

import mgtlab


def test_grid_and_operator():
    grid = mgtlab.default_grid_1d(31)
    assert grid.n_tot == 31
    assert len(grid.w1) == 5 and len(grid.w2) == 5
    op = mgtlab.build_fracop(grid, 0.5)
    lam = op.eigenvalues
    assert np.all(np.diff(lam) > 0)
    u = np.random.default_rng(0).standard_normal(grid.n_tot)
    half = mgtlab.build_fracop(grid, 0.25)
    twice = half.apply(half.apply(u.reshape(-1, 1)))
    np.testing.assert_allclose(twice.ravel(), op.apply(u.reshape(-1, 1)).ravel(), rtol=1e-10, atol=1e-10)
    laws = mgtlab.operator_laws(op, 50)
    assert laws["orthonormality"] < 1e-10
    assert laws["psd_min"] >= -1e-10


def test_exterior_solve_is_linear():
    op = mgtlab.build_fracop(mgtlab.default_grid_1d(31), 0.75)
    a = mgtlab.solve_exterior(op, T=1.0, dt=5e-3, amplitude=1.0)
    b = mgtlab.solve_exterior(op, T=1.0, dt=5e-3, amplitude=2.0)
    assert a["u"].shape == (15, 201)
    np.testing.assert_allclose(b["u"], 2.0 * a["u"], rtol=1e-12, atol=1e-15)
    assert abs(a["pairing"]) > 0.0
    assert a["u"][:, 0].tolist() == [0.0] * 15


def test_config_validation():
    cfg = mgtlab.default_config("dn")
    assert cfg["pipeline"] == "dn"
    assert mgtlab.validate_config(cfg) == cfg
    cfg["grid"]["spacing"] = 0.1
    with pytest.raises(mgtlab.ConfigError):
        mgtlab.validate_config(cfg)
    assert issubclass(mgtlab.ConfigError, mgtlab.MgtError)
    assert "invert-q" in mgtlab.pipeline_names()


def test_run_pipeline(tmp_path):
    manifest = mgtlab.run("dn", tmp_path / "dn", grid={"N": 31}, time={"T": 1.0, "dt": 0.01},
                          exterior={"n_temporal": 2})
    assert manifest["pipeline"] == "dn"
    assert (tmp_path / "dn" / "summary.txt").read_text().startswith("dn: PASS")
    field = mgtlab.read_field(str(tmp_path / "dn" / "trace_input0"))
    meta = json.loads((tmp_path / "dn" / "trace_input0.json").read_text())
    assert field.shape == (meta["rows"], meta["cols"])
    assert mgtlab.sha256_hex("abc").startswith("ba7816bf")
