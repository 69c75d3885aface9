import csv
import json
import subprocess
import sys

import pytest

from gtrde import load_problem, load_solution, save_problem
from gtrde import cli
from gtrde.cli import main
from gtrde.errors import NoConvergence

from conftest import scalar_game


@pytest.fixture
def problem(tmp_path):
    path = tmp_path / "p.json"
    assert main(["generate", "--n", "2", "--seed", "7", "--out", str(path)]) == 0
    return path


def test_generate_solve_verify(problem, tmp_path, capsys):
    out = tmp_path / "x.json"
    assert main(["solve", "--problem", str(problem), "--out", str(out)]) == 0
    X, report = load_solution(out)
    P = load_problem(problem)
    assert (X.N, X.n, X.G) == (P.N, P.n, 64)
    assert report["converged"]
    assert main(["verify", "--problem", str(problem), "--solution", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "ok   residual" in captured.err


def test_solve_options(problem, tmp_path):
    out = tmp_path / "x.json"
    assert main(["solve", "--problem", str(problem), "--out", str(out),
                 "--tol", "1e-10", "--grid", "16"]) == 0
    X, _ = load_solution(out)
    assert X.G == 16


def test_verify_corrupted_asymmetric(problem, tmp_path, capsys):
    out = tmp_path / "x.json"
    main(["solve", "--problem", str(problem), "--out", str(out)])
    doc = json.loads(out.read_text())
    doc["modes"][1]["samples"][5][0][1] += 1e-3
    out.write_text(json.dumps(doc))
    assert main(["verify", "--problem", str(problem), "--solution", str(out)]) == 1
    err = capsys.readouterr().err
    assert "modes/1/samples/5" in err and "symmetric" in err


def test_verify_corrupted_value_names_residual(problem, tmp_path, capsys):
    out = tmp_path / "x.json"
    main(["solve", "--problem", str(problem), "--out", str(out)])
    doc = json.loads(out.read_text())
    doc["modes"][0]["half_samples"][3][1][1] += 0.01
    out.write_text(json.dumps(doc))
    assert main(["verify", "--problem", str(problem), "--solution", str(out)]) == 1
    assert "FAIL residual" in capsys.readouterr().err


def test_verify_dimension_mismatch(problem, tmp_path, capsys):
    other = tmp_path / "s.json"
    save_problem(scalar_game(), other)
    out = tmp_path / "x.json"
    main(["solve", "--problem", str(other), "--out", str(out)])
    assert main(["verify", "--problem", str(problem), "--solution", str(out)]) == 1
    assert "FAIL dimensions" in capsys.readouterr().err


def test_solve_no_convergence_exit_code(problem, tmp_path, monkeypatch, capsys):
    # the iteration reaches a bitwise fixed point, so force the failure path
    def stuck(*args, **kwargs):
        raise NoConvergence("no convergence after 500 outer steps", [1.0, 0.5])

    monkeypatch.setattr(cli, "solve", stuck)
    assert main(["solve", "--problem", str(problem), "--out", str(tmp_path / "x.json")]) == 2
    assert "NoConvergence" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_io_errors(tmp_path):
    assert main(["solve", "--problem", str(tmp_path / "missing.json"), "--out", "x"]) == 3
    assert main(["generate", "--n", "1", "--seed", "1",
                 "--out", str(tmp_path / "no" / "dir" / "p.json")]) == 3


def test_invalid_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["solve", "--problem", str(bad), "--out", str(tmp_path / "x.json")]) == 1
    assert main(["generate", "--n", "0", "--seed", "1", "--out", str(tmp_path / "p")]) == 1
    assert main(["experiment", "--dims", "3..1", "--trials", "1", "--seed", "1",
                 "--out", str(tmp_path)]) == 1


def test_unknown_flag_prints_usage(capsys):
    assert main(["solve", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["frobnicate"]) == 1


def test_experiment_row_count(tmp_path):
    out = tmp_path / "results"
    assert main(["experiment", "--dims", "1..3", "--trials", "5", "--seed", "1",
                 "--out", str(out)]) == 0
    with open(out / "trials.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 3 * 5 * 2
    assert json.loads((out / "summary.json").read_text())["trials"] == 15


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gtrde", "generate", "--n", "1", "--seed", "3",
         "--out", str(tmp_path / "p.json")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout == ""
    proc = subprocess.run([sys.executable, "-m", "gtrde", "--nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
