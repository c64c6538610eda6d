import csv
import io
import json
import subprocess
import sys

import pytest

from cmcindex import cli, fem, index_engine
from cmcindex.closed_spectrum import IndexCount
from cmcindex.errors import ConvergenceError


def run_cli(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_index_example(capsys):
    code, out, _ = run_cli(capsys, "index", "--family", "clifford", "--n", "2", "--k", "1",
                           "--r2", "1/2", "--engine", "closed")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"config", "result", "residuals", "versions"}
    assert (doc["result"]["strong"], doc["result"]["weak"], doc["result"]["zeroModes"]) == (5, 4, 4)
    assert set(doc["versions"]) == {"cmcindex", "numpy", "scipy", "python"}


def test_theorem_sphere(capsys):
    code, out, _ = run_cli(capsys, "theorem", "--family", "sphere", "--n", "2", "--r", "0.8")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["caseApplied"] == "NotApplicable" and res["predictedLowerBound"] is None


def test_sweep_csv(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--family", "clifford", "--n", "2", "--k", "1",
                           "--r-min", "0.3", "--r-max", "0.95", "--steps", "27", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["r", "strong", "weak", "zeroModes", "absH", "hypothesisGap"]
    assert len(rows) == 27
    for row in rows:
        if 0.5 < float(row["r"]) < 0.85:
            assert row["weak"] == "4"


def test_sweep_threads_do_not_change_output(capsys, monkeypatch):
    argv = ["sweep", "--family", "clifford", "--n", "2", "--k", "1", "--r-min", "0.3",
            "--r-max", "0.9", "--steps", "9", "--format", "csv"]
    monkeypatch.setenv("CMCINDEX_THREADS", "1")
    _, one, _ = run_cli(capsys, *argv)
    monkeypatch.setenv("CMCINDEX_THREADS", "4")
    _, four, _ = run_cli(capsys, *argv)
    assert one == four
    monkeypatch.setenv("CMCINDEX_THREADS", "many")
    code, _, err = run_cli(capsys, *argv)
    assert code == 2 and json.loads(err)["exitCode"] == 2


def test_output_is_deterministic(tmp_path, capsys):
    path = tmp_path / "geom.json"
    runs = []
    for _ in range(2):
        assert cli.run(["geometry", "--family", "clifford", "--n", "2", "--k", "1", "--r", "0.6",
                        "-o", str(path)]) == 0
        runs.append(path.read_bytes())
    assert runs[0] == runs[1]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["geom.json"]
    doc = json.loads(runs[0])
    assert doc["result"]["H"] == pytest.approx(7 / 24, abs=1e-15)
    assert max(doc["residuals"].values()) <= 1e-12


def test_floats_keep_seventeen_digits():
    assert cli.dumps(0.1).strip() == "0.10000000000000001"
    assert cli.dumps(2.0).strip() == "2.0"
    assert cli.dumps(float("nan")).strip() == "null"
    assert json.loads(cli.dumps({"x": [1, 0.5, None, True]})) == {"x": [1, 0.5, None, True]}


def test_plot(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", "--family", "clifford", "--n", "2", "--k", "1", "--r-min", "0.3",
            "--r-max", "0.9", "--steps", "7", "--format", "csv", "-o", str(out), "--plot"]
    assert cli.run(argv) == 0
    svg = out.with_suffix(".svg")
    first = svg.read_bytes()
    assert first.startswith(b"<?xml")
    assert cli.run(argv) == 0
    assert svg.read_bytes() == first


@pytest.mark.parametrize("argv", [
    ["index", "--family", "clifford", "--n", "2", "--k", "1"],
    ["index", "--family", "clifford", "--n", "2", "--k", "1", "--r", "1.2"],
    ["index", "--family", "clifford", "--n", "2", "--k", "1", "--r", "0.5", "--r2", "1/4"],
    ["index", "--family", "torus", "--n", "2"],
    ["index", "--family", "sphere", "--n", "2", "--engine", "fem"],
    ["index", "--family", "sphere", "--n", "2", "--format", "csv"],
    ["geometry", "--family", "sphere", "--n", "2", "--r", "0.8", "--u", "0", "1"],
    ["spectrum", "--family", "sphere", "--n", "2", "--cutoff", "-1"],
    ["sweep", "--family", "clifford", "--n", "2", "--k", "1"],
    ["bogus"],
])
def test_invalid_input_exit_2(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 2 and out == ""
    payload = json.loads(err)
    assert payload["exitCode"] == 2 and payload["error"] and payload["message"]


def test_convergence_exit_3(capsys, monkeypatch):
    def fail(*args, **kwargs):
        raise ConvergenceError("no convergence", 1e-3)

    monkeypatch.setattr(fem, "eigen_solve", fail)
    code, _, err = run_cli(capsys, "index", "--family", "clifford", "--n", "2", "--k", "1",
                           "--r", "0.6", "--engine", "fem", "--mesh", "16", "16")
    payload = json.loads(err)
    assert code == 3 and payload["error"] == "ConvergenceError" and payload["bestResidual"] == 1e-3


def test_insufficient_count_exit_3(capsys):
    code, _, err = run_cli(capsys, "index", "--family", "clifford", "--n", "2", "--k", "1",
                           "--r", "0.6", "--cutoff", "1e-3", "--zero-tol", "0.01")
    assert code == 3 and json.loads(err)["error"] == "InsufficientCountError"


def test_theorem_violation_exit_4(capsys, monkeypatch):
    monkeypatch.setattr(index_engine, "compute_index", lambda *a, **k: IndexCount(1, 0, 0, 1e-9))
    code, out, err = run_cli(capsys, "theorem", "--family", "clifford", "--n", "2", "--k", "1",
                             "--r2", "1/2")
    assert code == 4
    assert json.loads(out)["result"]["consistent"] is False
    assert json.loads(err)["exitCode"] == 4


def test_verify_single(capsys):
    code, out, _ = run_cli(capsys, "verify", "--family", "sphere", "--n", "2", "--r", "0.8")
    assert code == 0 and json.loads(out)["result"]["pass"] is True


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"family": "clifford", "n": 2, "k": 1, "r": 0.45,
                               "quadrature": {"pointsPerDim": 64, "rule": "gauss"}}))
    code, out, _ = run_cli(capsys, "index", "--config", str(cfg))
    assert code == 0 and json.loads(out)["result"]["weak"] == 6
    code, out, _ = run_cli(capsys, "index", "--config", str(cfg), "--r", "0.6")
    doc = json.loads(out)
    assert doc["result"]["weak"] == 4 and doc["config"]["r"] == 0.6
    assert doc["config"]["quadrature"] == {"pointsPerDim": 64, "rule": "gauss"}
    cfg.write_text(json.dumps({"family": "sphere", "n": 2, "colour": "red"}))
    code, _, _ = run_cli(capsys, "index", "--config", str(cfg))
    assert code == 2


def test_spectrum_fem_export(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "spectrum", "--family", "clifford", "--n", "2", "--k", "1",
                           "--r2", "1/2", "--engine", "fem", "--mesh", "24", "24",
                           "--export-dir", str(tmp_path))
    assert code == 0
    res = json.loads(out)["result"]
    assert (res["strong"], res["weak"]) == (5, 4)
    for name in ("K", "M", "V"):
        assert fem.read_coordinate(tmp_path / f"{name}.txt").shape == (576, 576)


def test_spectrum_closed(capsys):
    code, out, _ = run_cli(capsys, "spectrum", "--family", "sphere", "--n", "3", "--r", "0.5")
    res = json.loads(out)["result"]
    assert code == 0 and res["modes"][0]["label"] == [0] and res["strong"] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cmcindex", "index", "--family", "sphere",
                           "--n", "4"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["weak"] == 0
