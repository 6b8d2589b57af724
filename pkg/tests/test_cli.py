import json

import pytest
import yaml

from bnlsv.cli import SUMMARY_COLUMNS, main, read_summary_csv
from bnlsv.config import ConfigError, load_config, parse_config
from bnlsv.diagnostics import RECORD_COLUMNS, read_records_csv
from bnlsv.grid import read_field_csv

BASE = {
    "model": {"N": 10, "p": 2.0, "lambda": -1},
    "potential": {"kind": "inverse_power", "C": 1.0, "sigma": 9.0},
    "grid": {"r_max": 30.0, "n": 1024},
}


def write_config(tmp_path, **sections):
    cfg = {**BASE, **sections}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def load_report(path):
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1 and "created" in doc["metadata"]
    return doc


# pairs ---------------------------------------------------------------------------

def test_pairs_solves(capsys):
    assert run("pairs", "--N", 10, "--family", "B", "--q", 2) == 0
    assert "(2, 10/3)" in capsys.readouterr().out


def test_pairs_endpoint_rejected(capsys):
    assert run("pairs", "--N", 4, "--family", "B", "--q", 2, "--r", "inf") == 0
    assert "(2,inf,4)" in capsys.readouterr().out


def test_pairs_lambda_s(capsys, tmp_path):
    assert run("pairs", "--N", 10, "--family", "Lambda_s", "--s", 1, "--r", "5/2",
               "--out", tmp_path) == 0
    assert "(inf, 5/2)" in capsys.readouterr().out
    rep = load_report(tmp_path / "pairs.json")
    assert rep["result"]["q"] == "inf"


def test_pairs_no_solution(capsys):
    assert run("pairs", "--N", 10, "--family", "Lambda_s", "--s", 1, "--r", 2) == 0
    assert "no solution in range" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["--q", "1.5"], ["--q", "a/b"], ["--family", "Z", "--q", "2"]])
def test_pairs_malformed(argv, capsys):
    base = ["pairs", "--N", "10", "--family", "B"]
    assert main(base + argv) == 1


# config errors -------------------------------------------------------------------

def test_missing_config_file(tmp_path, capsys):
    assert run("ground-state", "--config", tmp_path / "nope.yaml") == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_flag():
    assert run("ground-state") == 1


@pytest.mark.parametrize("model", [{"N": 10, "p": 1.0}, {"N": 10, "p": 0.5},
                                   {"N": 10, "p": 3.0}, {"N": 10}])
def test_invalid_model_rejected(tmp_path, model):
    assert run("ground-state", "--config", write_config(tmp_path, model=model)) == 1


@pytest.mark.parametrize("extra", [{"bogus": {}}, {"grid": {"n": 8}},
                                   {"scan": {"amplitudes": []}},
                                   {"initial": {"profile": "missing.csv"}},
                                   {"evolve": {"dt": -1.0, "t_end": 1.0}},
                                   {"virial": {"R": [0.0]}}])
def test_parse_rejects(tmp_path, extra):
    with pytest.raises(ConfigError):
        parse_config({**BASE, **extra}, tmp_path)


def test_load_config_resolves_output(tmp_path):
    path = write_config(tmp_path, output={"directory": "results"})
    cfg = load_config(path)
    assert cfg.output == tmp_path / "results" and cfg.n == 1024


def test_shipped_configs_parse():
    from pathlib import Path
    for path in sorted(Path(__file__).parent.parent.joinpath("configs").glob("*.yaml")):
        load_config(path)


def test_scan_without_evolve_section(tmp_path):
    path = write_config(tmp_path, scan={"amplitudes": [0.5]})
    assert run("classify-scan", "--config", path, "--out", tmp_path / "o") == 1


def test_bad_thread_count(tmp_path):
    assert run("ground-state", "--config", write_config(tmp_path), "--threads", 0) == 1


# solver and I/O failures ---------------------------------------------------------

def test_non_convergence_exit_code(tmp_path):
    path = write_config(tmp_path, solver={"tol": 1e-8, "max_iter": 2})
    assert run("ground-state", "--config", path, "--out", tmp_path / "o") == 2


def test_unwritable_output_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("ground-state", "--config", write_config(tmp_path), "--out", blocker / "o") == 3


# commands ------------------------------------------------------------------------

def test_ground_state_outputs(tmp_path):
    out = tmp_path / "gs"
    assert run("ground-state", "--config", write_config(tmp_path), "--out", out) == 0
    rep = load_report(out / "ground_state.json")
    assert all(v < 1e-3 for v in rep["pohozaev_residuals"].values())
    assert rep["ground_state"]["grid"]["n"] == 1024
    Q = read_field_csv(out / "Q.csv")
    assert Q.grid.n == 1024 and Q.values[0].real > 0


def test_evolve_outputs(tmp_path):
    path = write_config(tmp_path, evolve={"dt": 1e-3, "t_end": 0.05, "record_every": 10},
                        virial={"R": 2.0}, initial={"amplitude": 0.5})
    out = tmp_path / "ev"
    assert run("evolve", "--config", path, "--out", out) == 0
    rep = load_report(out / "evolve_report.json")
    assert rep["threshold_verdict_t0"]["class"] == "below_both"
    assert rep["run"]["termination"] == "completed"
    assert "scattering_proxy" in rep and rep["hypotheses"]["ok"]
    recs = read_records_csv(out / "trajectory.csv")
    assert (out / "trajectory.csv").read_text().splitlines()[0] == ",".join(RECORD_COLUMNS)
    assert recs[-1].t == pytest.approx(0.05) and len(recs) == 6
    assert read_field_csv(out / "final_state.csv").t == pytest.approx(0.05)


def test_evolve_from_profile(tmp_path):
    gs_out = tmp_path / "gs"
    assert run("ground-state", "--config", write_config(tmp_path), "--out", gs_out) == 0
    path = write_config(tmp_path, evolve={"dt": 1e-3, "t_end": 0.01, "record_every": 5},
                        initial={"profile": str(gs_out / "Q.csv")})
    assert run("evolve", "--config", path, "--out", tmp_path / "ev") == 0
    rep = load_report(tmp_path / "ev" / "evolve_report.json")
    assert rep["run"]["termination"] == "completed"


def test_evolve_blowup_report(tmp_path):
    path = write_config(tmp_path, evolve={"dt": 1e-3, "t_end": 1.0, "record_every": 50},
                        initial={"amplitude": 2.0})
    assert run("evolve", "--config", path, "--out", tmp_path / "ev") == 0
    rep = load_report(tmp_path / "ev" / "evolve_report.json")
    assert rep["threshold_verdict_t0"]["class"] == "negative_energy"
    assert rep["run"]["termination"] == "blowup_detected"
    assert "scattering_proxy" not in rep


SCAN = {"evolve": {"dt": 1e-3, "t_end": 0.05, "record_every": 10}, "virial": {"R": 2.0},
        "scan": {"amplitudes": [0.5, 1.0, 2.0]}}


def test_classify_scan_outputs(tmp_path):
    path = write_config(tmp_path, **SCAN)
    out = tmp_path / "scan"
    assert run("classify-scan", "--config", path, "--out", out, "--threads", 2) == 0
    rows = read_summary_csv(out / "summary.csv")
    assert (out / "summary.csv").read_text().splitlines()[0] == ",".join(SUMMARY_COLUMNS)
    assert [r["c"] for r in rows] == [0.5, 1.0, 2.0]
    assert [r["class"] for r in rows] == ["below_both", "indeterminate", "negative_energy"]
    assert rows[1]["termination"] == "completed"
    assert rows[2]["termination"] == "blowup_detected" and rows[2]["t_termination"] < 0.05
    for i in range(3):
        read_records_csv(out / f"run_{i:03d}.csv")
    rep = load_report(out / "scan_report.json")
    assert len(rep["runs"]) == 3


def test_classify_scan_deterministic_across_thread_counts(tmp_path):
    path = write_config(tmp_path, **SCAN)
    for k, threads in enumerate((1, 3)):
        assert run("classify-scan", "--config", path, "--out", tmp_path / f"s{k}",
                   "--threads", threads) == 0
    for name in ("summary.csv", "run_000.csv", "run_002.csv"):
        assert (tmp_path / "s0" / name).read_bytes() == (tmp_path / "s1" / name).read_bytes()


def test_virial_report_inline_sweep(tmp_path):
    path = write_config(tmp_path, evolve={"dt": 1e-3, "t_end": 1.0, "record_every": 5},
                        virial={"R": [1.5, 2.0]}, initial={"amplitude": 2.0})
    out = tmp_path / "vr"
    assert run("virial-report", "--config", path, "--out", out) == 0
    rep = load_report(out / "virial_report.json")
    assert rep["termination"] == "blowup_detected"
    assert [r["R"] for r in rep["R_sweep"]] == [1.5, 2.0]
    assert all(r["inequality_holds"] for r in rep["R_sweep"])
    header = (out / "virial_R1.5.csv").read_text().splitlines()[0].split(",")
    assert header[:6] == ["t", "M_R", "fd_derivative", "rhs_bound", "slack", "ok"]
    assert {"rem_R_pow", "rem_grad", "rem_grad_nonlinear", "rem_outer_mass"} <= set(header)


def test_virial_report_from_trajectory(tmp_path):
    path = write_config(tmp_path, evolve={"dt": 1e-3, "t_end": 1.0, "record_every": 5},
                        virial={"R": 2.0}, initial={"amplitude": 2.0})
    assert run("evolve", "--config", path, "--out", tmp_path / "ev") == 0
    path = write_config(tmp_path, virial={"trajectory": str(tmp_path / "ev" / "trajectory.csv")})
    out = tmp_path / "vr"
    assert run("virial-report", "--config", path, "--out", out) == 0
    rep = load_report(out / "virial_report.json")
    assert rep["interior_records"] >= 1 and "inequality_holds" in rep
