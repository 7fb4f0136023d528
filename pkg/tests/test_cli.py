import json

import jsonschema
import numpy as np
import pytest

from ellipot.cli import (
    EXIT_GATE,
    EXIT_INVALID,
    EXIT_OK,
    KERNELS_SCHEMA,
    PRESETS,
    ConfigError,
    RunConfig,
    apply_env,
    load_config,
    main,
)


def run_cli(tmp_path, command, toml=None, preset=None, name="out", extra=()):
    out = tmp_path / name
    argv = [command, "--out", str(out), *extra]
    if toml is not None:
        cfg = tmp_path / f"{name}.toml"
        cfg.write_text(toml)
        argv += ["--config", str(cfg)]
    if preset is not None:
        argv += ["--preset", preset]
    return main(argv), out


# -- configuration ------------------------------------------------------------


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_config_round_trip(preset):
    cfg = RunConfig.from_dict({"preset": preset, "seed": 3})
    again = RunConfig.from_toml(cfg.to_toml())
    assert again == cfg


def test_config_validation():
    with pytest.raises(ConfigError, match="Im tau"):
        RunConfig.from_dict({"backend": {"kind": "torus", "tau": [0.0, -1.0]}})
    with pytest.raises(ConfigError, match="preset"):
        RunConfig.from_dict({"preset": "nope"})
    with pytest.raises(ConfigError, match="tolerance"):
        RunConfig.from_dict({"solver": {"tol": 0}})
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_dict({"solvr": {}})
    with pytest.raises(ConfigError, match="x1 < x2"):
        RunConfig.from_dict({"backend": {"kind": "curve", "x1": -1.0, "x2": -2.0}})
    with pytest.raises(ConfigError, match="line"):
        RunConfig.from_toml("[solver\nn = 3")


def test_env_override():
    cfg = RunConfig.from_dict({"preset": "arcsine"})
    env = {"ELLIPOT_SOLVER__N": "64", "ELLIPOT_SEED": "7", "OTHER": "x"}
    new = apply_env(cfg, env)
    assert new.solver["n"] == 64 and new.seed == 7
    with pytest.raises(ConfigError):
        apply_env(cfg, {"ELLIPOT_BOGUS__X": "1"})
    assert load_config(preset="torus", environ={"ELLIPOT_BACKEND__TAU": "[0.0, 0.5]"}).backend["tau"] == [0.0, 0.5]


# -- kernels ------------------------------------------------------------------


def test_kernels_torus_preset_and_schema(tmp_path):
    code, out = run_cli(tmp_path, "kernels", preset="torus")
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, KERNELS_SCHEMA)
    assert rep["all_passed"] and len(rep["checks"]) >= 5


def test_kernels_bad_tau(tmp_path):
    toml = 'preset = "torus"\n[backend]\ntau = [0.0, -2.0]\n'
    code, _ = run_cli(tmp_path, "kernels", toml)
    assert code == EXIT_INVALID


def test_kernels_deterministic(tmp_path):
    _, a = run_cli(tmp_path, "kernels", preset="torus", name="a", extra=["--seed", "5"])
    _, b = run_cli(tmp_path, "kernels", preset="torus", name="b", extra=["--seed", "5"])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_missing_config_file(tmp_path):
    assert main(["kernels", "--config", str(tmp_path / "none.toml")]) == EXIT_INVALID


# -- equilibrium -----------------------------------------------------------------


def test_equilibrium_arcsine(tmp_path):
    code, out = run_cli(tmp_path, "equilibrium", preset="arcsine")
    assert code == EXIT_OK
    rows = (out / "measure.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 400
    var = json.loads((out / "variational.json").read_text())
    assert var["passed"] and var["sup_on_support"] < 5e-3


def test_equilibrium_aztec(tmp_path):
    code, _ = run_cli(tmp_path, "equilibrium", preset="aztec")
    assert code == EXIT_OK


def test_equilibrium_deterministic(tmp_path):
    _, a = run_cli(tmp_path, "equilibrium", preset="arcsine", name="a")
    _, b = run_cli(tmp_path, "equilibrium", preset="arcsine", name="b")
    for f in ("measure.csv", "variational.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_equilibrium_pole_on_contour(tmp_path, capsys):
    toml = """
[backend]
kind = "sphere"
[field]
kind = "primitives"
terms = [{residue = 0.5, zeros = [[0.0, 1.0]]}]
[contour]
components = [{kind = "circle", center = [0.0, 0.0], radius = 1.0}]
"""
    code, _ = run_cli(tmp_path, "equilibrium", toml)
    assert code != EXIT_OK
    assert "pole" in capsys.readouterr().err


# -- maxmin --------------------------------------------------------------------


def test_maxmin_gate_failure(tmp_path):
    toml = 'preset = "hexagon"\n[field]\nc = -0.5\n'
    code, _ = run_cli(tmp_path, "maxmin", toml)
    assert code == EXIT_GATE


def test_maxmin_needs_genus_one(tmp_path):
    code, _ = run_cli(tmp_path, "maxmin", preset="arcsine")
    assert code == EXIT_INVALID


def test_maxmin_hexagon_report_and_determinism(tmp_path):
    code, a = run_cli(tmp_path, "maxmin", preset="hexagon", name="a")
    assert code == EXIT_OK
    rep = json.loads((a / "report.json").read_text())
    assert rep["gate"]["r0"] == 1.5 and rep["gate"]["r_inf"] == 0
    assert rep["omega"]["pole_count"] == 8 and rep["omega"]["zero_count"] == 8
    assert rep["criticality"]["max_abs_re"] < 1e-3
    for f in ("contour.json", "measure.csv", "omega_zeros.csv", "trajectories.svg"):
        assert (a / f).exists()
    _, b = run_cli(tmp_path, "maxmin", preset="hexagon", name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


# -- tiling and aztec ----------------------------------------------------------------


def test_tiling_tiny(tmp_path):
    code, out = run_cli(tmp_path, "tiling", preset="tiny")
    assert code == EXIT_OK
    chk = json.loads((out / "enumeration_check.json").read_text())
    assert chk["verdict"] == "pass" and chk["tilings"] == 6
    sc = json.loads((out / "spectral_curve.json").read_text())
    assert sc["genus_drop"] and sc["notes"]
    K = np.loadtxt(out / "kernel.csv", delimiter=",", skiprows=1)
    assert K.shape == (64, 6)


def test_tiling_deterministic(tmp_path):
    _, a = run_cli(tmp_path, "tiling", preset="tiny", name="a")
    _, b = run_cli(tmp_path, "tiling", preset="tiny", name="b")
    for f in ("spectral_curve.json", "kernel.csv", "enumeration_check.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_tiling_weighting_file(tmp_path):
    w = tmp_path / "w.json"
    w.write_text(json.dumps(dict(p=3, q=2, blue=[[1, 1], [1, 1], [1, 1]], yellow=[[1, 1], [1, 1], [1, "2"]])))
    code, out = run_cli(tmp_path, "tiling", f'[tiling]\nweighting = "{w}"\n')
    assert code == EXIT_OK
    sc = json.loads((out / "spectral_curve.json").read_text())
    assert sc["branch_points"] == [-4.0, -1.5, 0.0] and not sc["genus_drop"]


def test_tiling_negative_weight(tmp_path, capsys):
    w = tmp_path / "w.json"
    w.write_text(json.dumps(dict(p=1, q=2, blue=[[1, -1]], yellow=[[1, 1]])))
    code, _ = run_cli(tmp_path, "tiling", f'[tiling]\nweighting = "{w}"\n')
    assert code == EXIT_INVALID
    assert "blue[0][1]" in capsys.readouterr().err


def test_tiling_bad_shape(tmp_path, capsys):
    w = tmp_path / "w.json"
    w.write_text(json.dumps(dict(p=2, q=2, blue=[[1, 1]], yellow=[[1, 1], [1, 1]])))
    code, _ = run_cli(tmp_path, "tiling", f'[tiling]\nweighting = "{w}"\n')
    assert code == EXIT_INVALID
    assert "shape" in capsys.readouterr().err


def test_aztec_command(tmp_path):
    toml = 'preset = "aztec"\n[aztec]\nradii = [0.5]\nn = 120\n'
    code, out = run_cli(tmp_path, "aztec", toml)
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and all(rep["runs"][0]["checks"].values())
