import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from nmode.cli import load_schema, main, read_binary_grid


def run(capsys, *argv):
    """Run the CLI in-process; returns (exit status, parsed JSON)."""
    try:
        status = main(list(argv))
    except SystemExit as exc:
        status = exc.code
    out = capsys.readouterr().out
    return status, json.loads(out)


@pytest.fixture(scope="module")
def schemas():
    return load_schema("envelope"), load_schema("error")


def check(rec, schemas, error=False):
    jsonschema.validate(rec, schemas[1] if error else schemas[0])


def test_spectrum(capsys, schemas):
    status, rec = run(capsys, "spectrum", "--d", "3")
    assert status == 0
    check(rec, schemas)
    assert rec["payload"]["values"] == [-3.0, -1.0, 1.0, 3.0]
    assert rec["payload"]["multiplicities"] == [1, 3, 3, 1]
    status, rec = run(capsys, "spectrum", "--d", "2", "--method", "dense")
    check(rec, schemas)
    assert len(rec["payload"]["eigenvectors"]) == 4


def test_solve_family_seed(capsys, schemas):
    status, rec = run(capsys, "solve", "--d", "2", "--eta", "-3.8", "--seed", "F23Ter-branch-b")
    assert status == 0
    check(rec, schemas)
    p = rec["payload"]
    np.testing.assert_allclose(p["q"], [0.110, 0.742, 0.037, 0.110], atol=5e-3)
    assert abs(p["Omega"] + 3.591) < 5e-3
    assert p["residual_norm"] < 1e-12


def test_solve_asym(capsys, schemas):
    status, rec = run(capsys, "solve", "--d", "1", "--eta", "-2.01", "--seed", "asym")
    assert status == 0
    np.testing.assert_allclose(rec["payload"]["q"], [0.45, 0.55], atol=5e-3)
    assert abs(rec["payload"]["Omega"] + 2.01) < 1e-8


def test_solve_raw_units(capsys, schemas):
    status, rec = run(capsys, "--units", "raw", "solve", "--d", "1", "--epsilon-c", "-5", "--beta", "2",
                      "--lambda-D", "0", "--hbar", "1")
    assert status == 0
    check(rec, schemas)
    assert rec["payload"]["eta"] == -2.5
    assert rec["payload"]["omega"] == pytest.approx(2 * (-2.5 / 2 - 1))


def test_missing_state_is_domain_error(capsys, schemas):
    status, rec = run(capsys, "solve", "--d", "1", "--eta", "-1.0", "--seed", "asym")
    assert status == 1
    check(rec, schemas, error=True)
    assert rec["error"]["type"] == "DomainError"


def test_usage_errors(capsys, schemas):
    status, rec = run(capsys, "solve", "--d", "2", "--seed", "bogus")
    assert status == 2
    check(rec, schemas, error=True)
    status, rec = run(capsys, "solve", "--d", "3", "--eta", "-2", "--seed", "asym")
    assert status == 2
    status, rec = run(capsys, "--units", "raw", "continue", "--d", "1")
    assert status == 2
    status, rec = run(capsys, "continue", "--d", "1", "--eta-min", "1")
    assert status == 2


def test_continue_csv(capsys, schemas, tmp_path):
    path = tmp_path / "branches.csv"
    status, rec = run(capsys, "continue", "--d", "1", "--eta-min", "-4", "--csv", str(path))
    assert status == 0
    check(rec, schemas)
    kinds = [(e["kind"], round(e["eta"], 6)) for e in rec["payload"]["unique_events"]]
    assert kinds == [("branch_point", -2.0)]
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert rows[0].keys() >= {"branch_id", "eta", "Omega", "q_1", "q_2"}
    assert {r["branch_id"] for r in rows} == {"0", "1"}
    for r in rows:
        assert float(r["eta"]) == float(repr(float(r["eta"])))


def test_dynamics(capsys, schemas, tmp_path):
    status, rec = run(capsys, "dynamics", "--d", "2", "--eta", "-1.5", "--initial", "site:0", "--t-end", "5",
                      "--csv", str(tmp_path / "traj.csv"))
    assert status == 0
    check(rec, schemas)
    cons = rec["payload"]["conservation"]
    assert cons["max_norm_drift"] < 1e-9 and cons["max_H_drift"] < 1e-8
    data = np.loadtxt(tmp_path / "traj.csv", delimiter=",", skiprows=1)
    assert data.shape == (201, 1 + 4 + 2)


def test_dynamics_stationary_input(capsys):
    status, rec = run(capsys, "dynamics", "--d", "1", "--eta", "-2.5", "--initial", "stationary", "--seed", "asym",
                      "--t-end", "20")
    assert status == 0
    assert rec["payload"]["max_q_drift"] < 1e-8


def test_reconstruct_binary_roundtrip(capsys, schemas, tmp_path):
    out = tmp_path / "field.bin"
    status, rec = run(capsys, "reconstruct", "--d", "2", "--eta", "-8.1", "--seed", "F23Ter-branch-b",
                      "--format", "binary", "--out", str(out), "--grid-n", "41")
    assert status == 0
    check(rec, schemas)
    header, vals = read_binary_grid(out)
    assert vals.shape == (41, 41)
    assert float(vals.max()) == pytest.approx(rec["payload"]["max_abs_psi"])
    assert rec["payload"]["dominant_site"] == 1


def test_reconstruct_csv(capsys, tmp_path):
    out = tmp_path / "field.csv"
    status, rec = run(capsys, "reconstruct", "--d", "1", "--eta", "-3", "--seed", "asym", "--out", str(out),
                      "--grid-n", "51")
    assert status == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (51, 2)


def test_agmon(capsys, schemas, tmp_path):
    status, rec = run(capsys, "agmon")
    assert status == 0
    check(rec, schemas)
    assert abs(rec["payload"]["S0"] - 3.0) < 1e-10
    r = np.linspace(0, 1, 2001)
    table = tmp_path / "profile.csv"
    np.savetxt(table, np.column_stack([r, r ** 2 - 1]), delimiter=",", header="r,f", comments="")
    status, rec = run(capsys, "agmon", "--profile", f"table:{table}")
    assert status == 0
    assert abs(rec["payload"]["S0"] - 3.0) < 1e-6


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 2, "eta": -3.8, "seed": "F23Ter"}))
    status, rec = run(capsys, "--config", str(cfg), "solve")
    assert status == 0
    assert rec["parameters"]["d"] == 2
    assert max(rec["payload"]["q"]) > 0.7


def test_output_is_deterministic(capsys, tmp_path):
    a = run(capsys, "continue", "--d", "2", "--eta-min", "-9")[1]
    b = run(capsys, "--threads", "3", "continue", "--d", "2", "--eta-min", "-9")[1]
    for rec in (a, b):
        rec.pop("provenance")
        rec["parameters"].pop("threads")
    assert a == b


def test_output_flag(capsys, tmp_path):
    path = tmp_path / "out.json"
    assert main(["--output", str(path), "spectrum", "--d", "1"]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(path.read_text())["command"] == "spectrum"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nmode", "agmon"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["payload"]["S0"] == pytest.approx(3.0)
    proc = subprocess.run([sys.executable, "-m", "nmode", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
