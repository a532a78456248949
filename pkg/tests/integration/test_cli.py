# tests/integration/test_cli.py

import json
import logging
import sys

import pytest
from click.testing import CliRunner

from flowtopo import __version__
from flowtopo.core.logging import LOG_FORMAT
from flowtopo.main import cli
from flowtopo.services import csv_io


def payloads(output: str):
    """JSON result lines from the mixed stdout/stderr stream."""
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr, force=True)


@pytest.fixture
def square_csv(tmp_path):
    path = tmp_path / "square.csv"
    path.write_text("x0,x1\n0,0\n1,0\n1,1\n0,1\n")
    return path


def generate(runner, path, *args):
    result = runner.invoke(cli, ["generate", "chirp", "--out", str(path), *args])
    assert result.exit_code == 0, result.output
    return payloads(result.output)[0]


# ---------------------------------------------
# generate / ingest
# ---------------------------------------------

def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_generate_is_deterministic(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    generate(runner, a, "--n", "100", "--snr-db", "10", "--seed", "3")
    generate(runner, b, "--n", "100", "--snr-db", "10", "--seed", "3")
    assert a.read_bytes() == b.read_bytes()


def test_generate_then_ingest(runner, tmp_path):
    path = tmp_path / "chirp.csv"
    info = generate(runner, path, "--n", "100")
    assert info["rows"] == 100
    assert info["columns"] == ["t", "x0", "x1", "phase"]
    assert info["snr_db"] is None  # infinite SNR

    result = runner.invoke(cli, ["ingest", str(path)])
    assert result.exit_code == 0, result.output
    (report,) = payloads(result.output)
    assert report["n"] == 100 and report["d"] == 2
    assert report["dt"] == pytest.approx(2.0 / 99)


def test_generate_hamiltonian(runner, tmp_path):
    path = tmp_path / "ham.csv"
    result = runner.invoke(cli, ["generate", "hamiltonian", "--out", str(path), "--skip", "6"])
    assert result.exit_code == 0, result.output
    assert payloads(result.output)[0]["rows"] == 210
    assert path.read_text().splitlines()[0] == "t,x0,x1"


def test_ingest_segment_and_stride(runner, tmp_path):
    path = tmp_path / "chirp.csv"
    generate(runner, path, "--n", "100")
    result = runner.invoke(cli, ["ingest", str(path), "--segment", "10", "40", "--stride", "2"])
    assert result.exit_code == 0, result.output
    assert payloads(result.output)[0]["n"] == 20


def test_ingest_reports_parse_errors(runner, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x0\n0,1\n1\n")
    result = runner.invoke(cli, ["ingest", str(path)])
    assert result.exit_code == 1
    assert "line 3" in result.output


# ---------------------------------------------
# persistence
# ---------------------------------------------

def test_unit_square_diagram_csv(runner, tmp_path, square_csv):
    diagram = tmp_path / "diagram.csv"
    edges = tmp_path / "edges.csv"
    result = runner.invoke(cli, [
        "persistence", str(square_csv), "--filtration", "vr", "--cap", "2.0",
        "--diagram-out", str(diagram), "--edges-out", str(edges),
    ])
    assert result.exit_code == 0, result.output
    rows = diagram.read_text().splitlines()
    assert rows[0] == "dim,birth,death,unresolved"
    assert "1,1.0,1.4142135623730951,0" in rows
    assert rows.count("0,0.0,1.0,0") == 3
    assert "0,0.0,,0" in rows
    assert len(edges.read_text().splitlines()) == 7

    (report,) = payloads(result.output)
    assert report["dominant"] == {"birth": 1.0, "death": 1.4142135623730951, "lifetime": pytest.approx(0.41421356)}
    assert report["schedule"][0] == 1.0


def test_persistence_without_a_loop(runner, tmp_path, square_csv):
    diagram = tmp_path / "diagram.csv"
    result = runner.invoke(cli, [
        "persistence", str(square_csv), "--filtration", "vr", "--cap", "0.5", "--diagram-out", str(diagram),
    ])
    assert result.exit_code == 0, result.output
    (report,) = payloads(result.output)
    assert report["dominant"] is None and report["schedule"] is None
    assert report["edges"] == 0


def test_identity_ellipsoid_persistence(runner, tmp_path, square_csv):
    diagram = tmp_path / "diagram.csv"
    result = runner.invoke(cli, [
        "persistence", str(square_csv), "--identity-covariance", "--cap", "1.0", "--diagram-out", str(diagram),
    ])
    assert result.exit_code == 0, result.output
    (report,) = payloads(result.output)
    assert report["filtration"] == "ellipsoid"
    assert report["dominant"]["birth"] == pytest.approx(0.5, rel=1e-5)
    assert report["dominant"]["death"] == pytest.approx(2 ** 0.5 / 2, rel=1e-5)


# ---------------------------------------------
# denoise / recurrence
# ---------------------------------------------

def test_denoise_writes_filters_and_rmse(runner, tmp_path):
    clean, noisy = tmp_path / "clean.csv", tmp_path / "noisy.csv"
    generate(runner, clean, "--n", "120")
    generate(runner, noisy, "--n", "120", "--snr-db", "10", "--seed", "1")
    out_dir = tmp_path / "out"
    result = runner.invoke(cli, [
        "denoise", str(noisy), "--clean", str(clean), "--filter", "moving_average", "--filter", "knn",
        "--window", "3", "--knn-k", "5", "--snr-db", "10", "--seed", "1", "--out-dir", str(out_dir),
    ])
    assert result.exit_code == 0, result.output
    assert (out_dir / "moving_average_3.csv").exists()
    assert (out_dir / "knn_5.csv").exists()
    rows = csv_io.read_sweep(out_dir / "rmse.csv")
    assert {(r.filter, r.axis) for r in rows} == {("moving_average_3", 0), ("moving_average_3", 1), ("knn_5", 0), ("knn_5", 1)}
    assert all(r.snr_db == 10.0 and r.seed == 1 for r in rows)
    assert [p["filter"] for p in payloads(result.output)] == ["moving_average_3", "knn_5"]


def test_denoise_with_explicit_radius(runner, tmp_path):
    noisy = tmp_path / "noisy.csv"
    generate(runner, noisy, "--n", "80", "--snr-db", "20")
    result = runner.invoke(cli, [
        "denoise", str(noisy), "--filter", "spherical", "--radius", "0.5", "--out-dir", str(tmp_path / "out"),
    ])
    assert result.exit_code == 0, result.output
    (report,) = payloads(result.output)
    assert report["scale"] == 0.5
    assert "rmse" not in report


def test_recurrence_scores_against_the_phase(runner, tmp_path):
    path = tmp_path / "chirp.csv"
    generate(runner, path, "--n", "200")
    out_dir = tmp_path / "rec"
    result = runner.invoke(cli, [
        "recurrence", str(path), "--neighborhood", "spherical", "--scale", "0.5", "--scale", "1.0",
        "--tau-min", "5", "--out-dir", str(out_dir),
    ])
    assert result.exit_code == 0, result.output
    reports = payloads(result.output)
    assert [r["scale"] for r in reports] == [0.5, 1.0]
    assert all(r["score"]["evaluated"] > 0 for r in reports)
    header = (out_dir / "recurrence_spherical_0.csv").read_text().splitlines()[0]
    assert header == "i,t1,truth,within_tol"


def test_recurrence_without_truth_column(runner, tmp_path, square_csv):
    result = runner.invoke(cli, [
        "recurrence", str(square_csv), "--neighborhood", "spherical", "--scale", "0.1", "--tau-min", "1",
        "--out-dir", str(tmp_path / "rec"),
    ])
    assert result.exit_code == 0, result.output
    (report,) = payloads(result.output)
    assert report["score"] is None


# ---------------------------------------------
# sweep
# ---------------------------------------------

@pytest.fixture
def sweep_config(tmp_path):
    path = tmp_path / "sweep.env"
    path.write_text("SNR_DB=10,20\nSEEDS=0\nFILTERS=moving_average,knn\nKNN_K=4\nWINDOW=3\nCHIRP_N=60\n")
    return path


def test_sweep_resumes_from_existing_output(runner, tmp_path, sweep_config):
    out = tmp_path / "sweep.csv"
    first = runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(out)])
    assert first.exit_code == 0, first.output
    assert payloads(first.output)[0]["new_rows"] == 8
    content = out.read_text()

    second = runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(out), "--threads", "2"])
    assert second.exit_code == 0, second.output
    report = payloads(second.output)[0]
    assert report["new_rows"] == 0 and report["skipped_cells"] == 4
    assert out.read_text() == content


def test_sweep_override_adds_cells(runner, tmp_path, sweep_config):
    out = tmp_path / "sweep.csv"
    runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(out)])
    result = runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(out), "--set", "SEEDS=0,1"])
    assert result.exit_code == 0, result.output
    report = payloads(result.output)[0]
    assert report["new_rows"] == 8 and report["rows"] == 16


def test_sweep_exits_2_when_a_cell_fails(runner, tmp_path, sweep_config):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(out), "--set", "KNN_K=500"])
    assert result.exit_code == 2
    report = payloads(result.output)[0]
    assert len(report["failed_cells"]) == 2
    assert out.exists()


def test_sweep_rejects_malformed_override(runner, sweep_config, tmp_path):
    result = runner.invoke(cli, ["sweep", str(sweep_config), "--out", str(tmp_path / "s.csv"), "--set", "SEEDS"])
    assert result.exit_code != 0
    assert "KEY=VALUE" in result.output
