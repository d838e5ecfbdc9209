import csv
import json
import math
from pathlib import Path

import pytest

from vmprandtl.cli import main
from vmprandtl.cli.artifacts import MANIFEST_NAME, read_csv, verify_manifest
from vmprandtl.cli.config import ConfigError, apply_env, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
[setup]
lambda0 = 1.0
Y = 1.0
eta = 0.1
psi0 = { kind = "affine", c0 = 1.0, c1 = 2.5 }

[initial]
kind = "separable"
alpha_param = 2.5

[solver]
eps = 4e-3
n_s = 128
n_out = 4

[barrier]
mu = 0.1

[convergence]
eps_list = [8e-3, 4e-3]
n_s_list = [64, 128]
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


@pytest.fixture
def clean_env(monkeypatch):
    import os
    for name in list(os.environ):
        if name.startswith("VMP_"):
            monkeypatch.delenv(name)
    return monkeypatch


def rows_of(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def run(mode, cfg, out, *extra):
    return main([mode, "--config", str(cfg), "--out", str(out), *extra])


def test_shipped_configs_parse(clean_env):
    cfg = load_config(CONFIGS / "benchmark.toml", "verify")
    assert cfg.solver.eps == 1e-3 and cfg.solver.n_s == 512
    assert load_config(CONFIGS / "ode.toml").mode == "ode"
    assert load_config(CONFIGS / "sweep.toml").sweep.kappas == (2.1, 2.5, 3.0, 1.0)


def test_unknown_key_is_rejected(tmp_path, clean_env, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL.replace("n_out = 4", "n_out = 4\nnsteps = 3"))
    assert run("solve", path, tmp_path / "o") == 1
    assert "nsteps" in capsys.readouterr().err


def test_env_override(small_cfg, clean_env):
    clean_env.setenv("VMP_SOLVER__EPS", "2e-3")
    clean_env.setenv("VMP_SOLVER__N_S", "64")
    cfg = load_config(small_cfg, "solve")
    assert cfg.solver.eps == 2e-3 and cfg.solver.n_s == 64
    assert apply_env({"setup": {}}, {"VMP_SETUP__Y": "0.5"})["setup"]["Y"] == 0.5


def test_unknown_env_key_fails(small_cfg, clean_env, tmp_path):
    clean_env.setenv("VMP_SOLVER__BOGUS", "1")
    assert run("solve", small_cfg, tmp_path / "o") == 1


def test_mode_conflict(tmp_path, clean_env):
    with pytest.raises(ConfigError):
        parse_config({"mode": "ode", "ode": {}}, "solve")
    assert run("solve", CONFIGS / "ode.toml", tmp_path / "o") == 1


def test_bad_usage_exits_one(small_cfg):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--config", str(small_cfg)])
    assert info.value.code == 1


def test_missing_config_is_io_error(tmp_path):
    assert run("solve", tmp_path / "absent.toml", tmp_path / "o") == 4


def test_ode_run(tmp_path, clean_env):
    out = tmp_path / "ode"
    assert run("ode", CONFIGS / "ode.toml", out) == 0
    summary = json.loads((out / "ode_summary.json").read_text())
    assert summary["monotone"] is True
    assert 1.0 < summary["threshold"] < 3.0
    cols, data = read_csv(out / "ode.csv")
    assert cols == ["xi", "phi", "dphi", "d2phi"] and data[0, 1] == 0.0 and data[0, 2] == 0.0
    assert verify_manifest(out) == []


def test_solve_is_byte_deterministic(small_cfg, tmp_path, clean_env):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("solve", small_cfg, a) == 0
    assert run("solve", small_cfg, b) == 0
    for name in ("field.csv", "diagnostics.csv", "steps.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    first = (a / "field.csv").read_text().splitlines()[0]
    assert first == f"# manifest: {MANIFEST_NAME}"
    manifest = json.loads((a / MANIFEST_NAME).read_text())
    assert manifest["checks"]["exit_code"] == 0
    assert verify_manifest(a) == []
    (a / "steps.csv").write_text("tampered\n")
    assert verify_manifest(a) == ["steps.csv"]


def test_verify_and_tampered_field(small_cfg, tmp_path, clean_env, capsys):
    solved = tmp_path / "solved"
    assert run("solve", small_cfg, solved) == 0
    assert run("verify", small_cfg, tmp_path / "v") == 0
    report = json.loads((tmp_path / "v" / "barrier_report.json").read_text())
    assert report["passed"] is True

    clean_env.setenv("VMP_BARRIER__FIELD_DIR", json.dumps(str(solved)))
    assert run("verify", small_cfg, tmp_path / "v2") == 0

    lines = (solved / "field.csv").read_text().splitlines()
    cols = lines[1].split(",")
    row = lines[2 + 3 * 129 + 40].split(",")
    row[cols.index("w")] = repr(-float(row[cols.index("w")]))
    lines[2 + 3 * 129 + 40] = ",".join(row)
    (solved / "field.csv").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert run("verify", small_cfg, tmp_path / "v3") == 5
    err = capsys.readouterr().err
    assert "blanket_lower" in err and "level=3" in err and "node=40" in err


def test_verify_missing_field_file(small_cfg, tmp_path, clean_env):
    clean_env.setenv("VMP_BARRIER__FIELD_DIR", json.dumps(str(tmp_path / "nowhere")))
    assert run("verify", small_cfg, tmp_path / "v") == 4


def test_weak_slope_exits_two(tmp_path, clean_env):
    out = tmp_path / "weak"
    assert run("solve", CONFIGS / "weak_slope.toml", out) == 2
    assert (out / "validation.json").is_file()


def test_fields_run(small_cfg, tmp_path, clean_env):
    out = tmp_path / "f"
    assert run("fields", small_cfg, out) == 0
    fits = rows_of(out / "decay.csv")
    assert fits and all(r["error"] == "" for r in fits)
    assert all(float(r["relative_gap"]) < 0.1 for r in fits if float(r["y"]) > 0)
    cols, data = read_csv(out / "physical.csv")
    assert all(data[data[:, cols.index("psi")] == 0.0, cols.index("u")] == 0.0)


def test_convergence_run(small_cfg, tmp_path, clean_env):
    out = tmp_path / "c"
    assert run("convergence", small_cfg, out) == 0
    text = (out / "convergence.csv").read_text().splitlines()
    assert text[1] == "study,coarse,fine,sup_difference,ratio"
    assert [ln.split(",")[0] for ln in text[2:]] == ["eps", "n_s"]


def _sweep_cfg(tmp_path, kappas):
    path = tmp_path / "sweep.toml"
    path.write_text(f'mode = "sweep"\n[sweep]\nkappas = {kappas}\nsolve = false\n')
    return path


def test_sweep_rows_and_failures(tmp_path, clean_env):
    out = tmp_path / "s"
    assert run("sweep", _sweep_cfg(tmp_path, [3.0, 1.0, 2.5]), out, "--workers", "2") == 0
    rows = rows_of(out / "sweep.csv")
    assert [float(r["parameter"]) for r in rows] == [1.0, 2.5, 3.0]
    assert rows[0]["error"] != ""  # the subcritical row records its error
    assert rows[1]["error"] == "" and not math.isnan(float(rows[1]["a"]))
    assert rows[2]["monotone"] == "1"


def test_sweep_empty_and_all_failed(tmp_path, clean_env):
    assert run("sweep", _sweep_cfg(tmp_path, []), tmp_path / "e") == 1
    assert run("sweep", _sweep_cfg(tmp_path, [0.5, 1.0]), tmp_path / "f") == 6
