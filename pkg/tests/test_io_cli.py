import json

import numpy as np
import pytest
from pydantic import ValidationError

from tentflow import PeriodicGrid, ScalarField, VectorField, make_log_time_grid
from tentflow import cli
from tentflow.config import RunConfig, load_config
from tentflow.ensembles import preset_velocity
from tentflow.harness import InequalityReport
from tentflow.io import (
    DIAG_COLUMNS,
    MAGIC,
    read_checkpoint,
    read_field,
    write_checkpoint,
    write_field,
    write_series_csv,
    write_trajectory,
)
from tentflow.operators import heat_flow

L = 2 * np.pi


# -- checkpoints -------------------------------------------------------------------


def test_field_round_trip(tmp_path):
    g = PeriodicGrid(2, L, 16)
    u = preset_velocity("taylor-green", g)
    p = write_field(tmp_path / "u.ckpt", u, {"note": "tg"})
    assert p.read_bytes()[:8] == MAGIC
    back = read_field(p)
    assert isinstance(back, VectorField)
    assert back.values.tobytes() == u.values.tobytes()
    s = ScalarField(g, np.arange(256.0).reshape(16, 16))
    assert isinstance(read_field(write_field(tmp_path / "s.ckpt", s)), ScalarField)


def test_trajectory_round_trip(tmp_path):
    g = PeriodicGrid(3, 1.5, 8)
    tg = make_log_time_grid(1e-3, 1.0, 5)
    u = heat_flow(VectorField(g, np.random.default_rng(0).standard_normal((3,) + g.shape)), tg)
    ck = read_checkpoint(write_trajectory(tmp_path / "t.ckpt", u, {"a": [1, 2]}))
    assert ck.config == {"a": [1, 2]}
    assert ck.grid == g
    np.testing.assert_array_equal(ck.nodes, tg.nodes)
    np.testing.assert_array_equal(ck.weights, tg.weights)
    np.testing.assert_array_equal(ck.as_spacetime().values, u.values)


def test_checkpoint_errors(tmp_path):
    g = PeriodicGrid(2, L, 8)
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT" + bytes(64))
    with pytest.raises(ValueError, match="magic"):
        read_checkpoint(bad)
    with pytest.raises(ValueError):
        write_checkpoint(tmp_path / "x.ckpt", g, [0.0, 1.0], [0.0, 1.0], np.zeros((1, 1, 8, 8)))
    p = write_field(tmp_path / "ok.ckpt", ScalarField.zeros(g))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError, match="size"):
        read_checkpoint(p)


def test_empty_series_is_header_only(tmp_path):
    p = write_series_csv(tmp_path / "e.csv", ("x", "y"), [])
    assert p.read_text() == "x,y\n"
    paths = cli.emit_plot_data({}, tmp_path, "empty")
    assert paths[0].read_text() == "x,y\n"


# -- configuration ----------------------------------------------------------------


def test_run_config_round_trip():
    cfg = RunConfig(command="solve", preset="bump", rho_deviation=0.05)
    assert RunConfig.from_json(cfg.to_json()) == cfg


@pytest.mark.parametrize("data", [
    {"command": "solve", "solvr": {}},
    {"command": "solve", "solver": {"alpha": 0.5, "typo": 1}},
    {"command": "nope"},
    {"command": "verify", "verify": {"id": "unknown"}},
    {"command": "norm", "grid": {"N": 48}},
])
def test_run_config_rejects(data):
    with pytest.raises(ValidationError):
        RunConfig.model_validate(data)


def test_load_config_with_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "norm", "grid": {"N": 32}}))
    cfg = load_config(p, preset="bump")
    assert cfg.grid.N == 32 and cfg.preset == "bump"


# -- CLI -----------------------------------------------------------------------


def test_cli_validation_error_exit_code(tmp_path, capsys):
    code = cli.main(["solve", "--preset", "zero", "--alpha", "1.5", "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "solver.alpha" in err
    assert not any(tmp_path.iterdir())


def test_cli_bad_config_file(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"solver": {"alhpa": 0.5}}))
    assert cli.main(["solve", "--config", str(p), "--preset", "zero"]) == 1
    assert "solver.alhpa" in capsys.readouterr().err
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json")]) == 1


def test_cli_solve_zero(tmp_path):
    assert cli.main(["solve", "--preset", "zero", "--n", "16", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "solve_report.json").read_text())
    assert rep["status"] == "CONVERGED"
    ck = read_checkpoint(tmp_path / "solve_velocity.ckpt")
    assert np.all(ck.values == 0)
    assert ck.config["command"] == "solve"
    header = (tmp_path / "solve_diagnostics.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == DIAG_COLUMNS
    rho = np.loadtxt(tmp_path / "solve_rho_dev_vs_t.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(rho[:, 1]) <= 1e-12)


def test_cli_solve_from_field_files(tmp_path):
    g = PeriodicGrid(2, L, 16)
    write_field(tmp_path / "u.ckpt", preset_velocity("bump", g) * 0.01)
    write_field(tmp_path / "r.ckpt", ScalarField(g, np.ones(g.shape)))
    out = tmp_path / "out"
    code = cli.main(["solve", "--field", str(tmp_path / "u.ckpt"), "--field", str(tmp_path / "r.ckpt"),
                     "--n", "16", "--out", str(out)])
    assert code == 0
    assert json.loads((out / "solve_report.json").read_text())["status"] == "CONVERGED"


def test_cli_solve_without_data(tmp_path, capsys):
    assert cli.main(["solve", "--out", str(tmp_path)]) == 1
    assert "preset" in capsys.readouterr().err


def test_cli_norm(tmp_path):
    assert cli.main(["norm", "--preset", "bump", "--n", "32", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "norm.json").read_text())
    assert set(rep) == {"family", "param", "value", "argmax_center", "argmax_radius", "grid_n", "time_nodes"}
    assert rep["family"] == "U" and rep["value"] > 0
    g = PeriodicGrid(2, L, 32)
    write_field(tmp_path / "f.ckpt", ScalarField.from_function(g, lambda x, y: np.cos(3 * x)))
    assert cli.main(["norm", "--field", str(tmp_path / "f.ckpt"), "--norm", "besov_inf_inf",
                     "--out", str(tmp_path)]) == 0
    val = json.loads((tmp_path / "norm.json").read_text())["value"]
    assert val == pytest.approx((2 * np.e * 9) ** -0.5, rel=1e-6)


def test_cli_verify_scaling_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["verify", "--id", "scaling", "--seed", "7", "--n", "64", "--out", str(d)]) == 0
        outs.append(d)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    assert json.loads((outs[0] / "scaling.json").read_text())["verdict"] == "PASS"


def test_cli_verify_small_campaign_outputs(tmp_path):
    cfg = {"command": "verify", "ensemble": {"size": 2}, "verify": {"id": "maxreg", "ns": [16, 32]}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", str(p), "--out", str(out)]) == 0
    series = np.loadtxt(out / "maxreg_cemp_vs_beta.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(series[:, 0], [0.0, 0.5, 0.9])
    assert (out / "maxreg_beta0.5_ratios.csv").exists()
    summary = json.loads((out / "verify_summary.json").read_text())
    assert set(summary) == {"maxreg_beta0", "maxreg_beta0.5", "maxreg_beta0.9"}


def test_cli_unstable_verdict_exits_2(tmp_path, monkeypatch):
    bad = InequalityReport("fake", {16: [1.0], 32: [2.0]}, {16: [1.0], 32: [1.0]})
    monkeypatch.setattr(cli, "_campaign_reports", lambda cid, cfg: [("fake", bad)])
    assert cli.main(["verify", "--id", "timederiv", "--out", str(tmp_path)]) == 2


def test_cli_sweep(tmp_path):
    cfg = {"command": "sweep", "solver": {"N": 16, "time_nodes": 16, "t_final": 0.02},
           "sweep": {"alphas": [0.5], "eps0s": [0.05, 0.1], "ns": [16]}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())
    assert [r["status"] for r in rows] == ["CONVERGED", "CONVERGED"]
