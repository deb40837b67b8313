import hashlib
import json
import subprocess
import sys

import pytest

from steklov_lab import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_spectrum_outputs_and_manifest(tmp_path):
    code, out = run(tmp_path, "spectrum", "--set", "kmax=20", "--set", "n=2")
    assert code == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "sigma,multiplicity" and len(lines) == 22
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "spectrum" and manifest["seed"] == 0
    for entry in manifest["artifacts"]:
        data = (out / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["kmax"] == 20 and "out" not in cfg


def test_runs_are_byte_identical(tmp_path):
    args = ("oplab", "--set", "N=128", "--seed", "7")
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    for name in ("oplab.json", "oplab.csv", "config.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "cylinder", "L": 1.0, "boundary_eigenvalues": [0, 1], "kmax": 5}))
    code, out = run(tmp_path, "spectrum", "--config", str(cfg), "--set", "L=2.0")
    assert code == 0
    assert json.loads((out / "config.json").read_text())["L"] == 2.0
    assert len((out / "spectrum.csv").read_text().splitlines()) == 5


def test_unknown_key_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "spectrum", "--set", "bogus=1")
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_malformed_override_exits_2(tmp_path):
    assert run(tmp_path, "spectrum", "--set", "kmax")[0] == 2


def test_numerical_failure_exits_3(tmp_path):
    # -pi^2 is a Dirichlet eigenvalue of the unit ball in n = 3
    code, _ = run(tmp_path, "spectrum", "--set", "model=potential_ball", "--set", 'potential="-pi**2"',
                  "--set", "kmax=3")
    assert code == 3


def test_trace_of_empty_spectrum_is_zero(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("sigma,multiplicity\n")
    code, out = run(tmp_path, "trace", "--set", f'spectrum_file="{empty}"', "--format", "svg")
    assert code == 0
    rows = (out / "trace.csv").read_text().splitlines()[1:]
    assert rows and all(r.split(",")[1:] == ["0.0", "0.0", "0.0"] for r in rows)
    assert (out / "trace.svg").exists()
    assert json.loads((out / "peaks.json").read_text())["peaks"] == []


def test_difference_trace_and_invariants(tmp_path):
    code, out = run(tmp_path, "trace", "--set", "model=ball", "--set", "kmax=120",
                    "--set", "model_b=conformal_ball", "--set", 'profile_b="normal_slope"',
                    "--set", "lengths=[6.283185307179586]", "--format", "json")
    assert code == 0
    doc = json.loads((out / "invariants.json").read_text())
    assert len(doc["amplitudes"]) == 1
    assert json.loads((out / "trace.json").read_text())["schema"] == "trace/v1"


def test_weyl(tmp_path):
    code, out = run(tmp_path, "weyl", "--set", "n=2", "--set", "kmax=500")
    assert code == 0
    assert json.loads((out / "weyl.json").read_text())["volume"] == pytest.approx(6.283185307179586, rel=1e-2)


def test_geodesics_w1(tmp_path):
    code, out = run(tmp_path, "geodesics", "--set", "W=1")
    assert code == 0
    rows = (out / "classes.csv").read_text().splitlines()[1:]
    assert len(rows) == 4
    assert all(float(r.split(",")[1]) == pytest.approx(3.0571418389619, abs=1e-9) for r in rows)


def test_recover_planted_order_three(tmp_path):
    code, out = run(tmp_path, "recover", "--set", "plant_order=3", "--set", "W=3")
    assert code == 0
    doc = json.loads((out / "recover.json").read_text())
    assert doc["first_nonzero_order"] == 3 and doc["verdict"] == "distinguished"
    assert doc["field_relative_error"] < 1e-3


def test_recover_rejects_unrecoverable_plant(tmp_path):
    assert run(tmp_path, "recover", "--set", "plant_order=0", "--set", "kind=potential", "--set", "W=1",
               "--set", "basis_size=2")[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "steklov_lab", "spectrum", "--set", "kmax=3", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "spectrum.json").exists()
