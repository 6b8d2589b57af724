"""Batch runner: ``bnlsv <command> --config run.yaml --out DIR``.

Exit status: 0 success, 1 config error, 2 solver non-convergence, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from bnlsv import __version__
from bnlsv.config import ConfigError, ExperimentConfig, load_config
from bnlsv.diagnostics import (BLOWUP_GROWTH_SQ, SCATTER_BOUND, SCATTER_RATIO, Monitor,
                               fmt, read_records_csv, scattering_proxy, threshold_classify,
                               write_records_csv)
from bnlsv.evolution import EvolveConfig, evolve, run_summary
from bnlsv.grid import Field, read_field_csv, write_field_csv
from bnlsv.groundstate import (GroundState, GroundStateError, gn_constant_forms,
                               pohozaev_report, solve_ground_state)
from bnlsv.model import check_hypotheses, virial_decomposition
from bnlsv.operators import SolverError
from bnlsv.pairs import FAMILIES, NoSolution, canonical_family, pair_report
from bnlsv.virial import make_virial_weight, virial_derivative_fd, virial_rhs_bound

log = logging.getLogger("bnlsv")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ["c", "energy_ratio", "kinetic_ratio", "class", "termination", "t_termination"]
VIRIAL_REL_SLACK = 0.05
VIRIAL_ABS_SLACK = 1e-6  # times ||Q||_{p+1}^{p+1}


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_report(path: Path, body: dict, cfg: ExperimentConfig | None = None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "version": __version__,
            "config": str(cfg.source) if cfg and cfg.source else None,
        },
    }
    doc.update(body)
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n")


def _model_section(cfg: ExperimentConfig) -> dict:
    m = cfg.model
    return {
        "N": m.N, "p": m.p, "lambda": m.lam, "s_c": m.s_c,
        "potential": cfg.potential.to_config(),
        "grid": {"r_max": cfg.r_max, "n": cfg.n},
    }


def _ground_state(cfg: ExperimentConfig, grid=None) -> GroundState:
    return solve_ground_state(cfg.model, grid or cfg.grid(), tol=cfg.tol,
                              max_iter=cfg.max_iter)


def _require_evolve(cfg: ExperimentConfig) -> EvolveConfig:
    if cfg.evolve is None:
        raise ConfigError("this command needs an 'evolve' section")
    return cfg.evolve


def _monitor(cfg: ExperimentConfig, grid, R=None) -> Monitor:
    R = R if R is not None else (cfg.virial_R[0] if cfg.virial_R else None)
    weight = make_virial_weight(grid, R) if R is not None else None
    return Monitor(cfg.potential, cfg.model, weight)


# ground-state -----------------------------------------------------------------

def cmd_ground_state(cfg: ExperimentConfig, out: Path, args) -> int:
    gs = _ground_state(cfg)
    formula, inverse_J0 = gn_constant_forms(gs, cfg.model)
    body = {
        "command": "ground-state",
        "model": _model_section(cfg),
        "ground_state": gs.to_report(),
        "pohozaev_residuals": pohozaev_report(gs, cfg.model),
        "gn_constant": {"formula": formula, "inverse_J0": inverse_J0,
                        "relative_difference": abs(formula / inverse_J0 - 1)},
    }
    write_field_csv(out / "Q.csv", gs.Q)
    write_report(out / "ground_state.json", body, cfg)
    log.info("ground state: %d iterations, residual %.3e", gs.iterations, gs.residual)
    return EXIT_OK


# evolve -----------------------------------------------------------------------

def _initial_data(cfg: ExperimentConfig, gs: GroundState) -> Field:
    if cfg.profile is not None:
        u0 = read_field_csv(cfg.profile)
        if not u0.grid.same_as(gs.grid):
            raise ConfigError("initial profile grid differs from the configured grid")
        return u0.replace(values=u0.values, t=0.0)
    return gs.Q * cfg.amplitude


def _trigger_section() -> dict:
    return {
        "blowup_growth_delta_u_sq": BLOWUP_GROWTH_SQ,
        "nan_detection": True,
        "scattering_ratio_threshold": SCATTER_RATIO,
        "scattering_boundedness_factor": SCATTER_BOUND,
    }


def cmd_evolve(cfg: ExperimentConfig, out: Path, args) -> int:
    ecfg = _require_evolve(cfg)
    gs = _ground_state(cfg)
    u0 = _initial_data(cfg, gs)
    verdict = threshold_classify(u0, cfg.potential, cfg.model, gs)
    mon = _monitor(cfg, u0.grid)
    traj = evolve(u0, cfg.potential, cfg.model, ecfg, mon)
    write_records_csv(out / "trajectory.csv", traj.records)
    write_field_csv(out / "final_state.csv", traj.final_state)
    body = {
        "command": "evolve",
        "model": _model_section(cfg),
        "initial": {"amplitude": cfg.amplitude, "profile": cfg.profile},
        "threshold_verdict_t0": verdict.to_dict(),
        "hypotheses": check_hypotheses(cfg.potential, cfg.model, u0.grid).to_dict(),
        "run": run_summary(traj),
        "triggers": _trigger_section(),
    }
    if traj.termination == "completed" and len(traj.records) >= 4:
        body["scattering_proxy"] = scattering_proxy(traj.records)
    write_report(out / "evolve_report.json", body, cfg)
    log.info("evolve: %s at t=%g", traj.termination, traj.t_final)
    return EXIT_OK


# classify-scan ----------------------------------------------------------------

def _scan_one(cfg: ExperimentConfig, gs: GroundState, index: int, c: float, out: Path) -> dict:
    row = {"c": c, "energy_ratio": math.nan, "kinetic_ratio": math.nan,
           "class": "error", "termination": "error", "t_termination": math.nan}
    try:
        grid = cfg.grid()  # each run owns its grid and operators
        u0 = Field(grid, c * gs.Q.values)
        verdict = threshold_classify(u0, cfg.potential, cfg.model, gs)
        row.update(energy_ratio=verdict.energy_ratio, kinetic_ratio=verdict.kinetic_ratio,
                   **{"class": verdict.cls})
        traj = evolve(u0, cfg.potential, cfg.model, cfg.evolve, _monitor(cfg, grid))
        row.update(termination=traj.termination, t_termination=traj.t_final)
        write_records_csv(out / f"run_{index:03d}.csv", traj.records)
    except (SolverError, ValueError, OSError) as exc:
        log.error("scan entry c=%g failed: %s", c, exc)
        row["error"] = str(exc)
    return row


def write_summary_csv(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([row[k] if isinstance(row[k], str) else fmt(row[k])
                        for k in SUMMARY_COLUMNS])


def read_summary_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: unexpected summary header {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append({k: (rec[k] if k in ("class", "termination") else float(rec[k]))
                         for k in SUMMARY_COLUMNS})
        return rows


def cmd_classify_scan(cfg: ExperimentConfig, out: Path, args) -> int:
    _require_evolve(cfg)
    if not cfg.amplitudes:
        raise ConfigError("classify-scan needs scan.amplitudes")
    gs = _ground_state(cfg)
    threads = args.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_scan_one, cfg, gs, i, c, out)
                   for i, c in enumerate(cfg.amplitudes)]
        rows = [f.result() for f in futures]
    write_summary_csv(out / "summary.csv", rows)
    body = {
        "command": "classify-scan",
        "model": _model_section(cfg),
        "ground_state": gs.to_report(),
        "evolve": {"dt": cfg.evolve.dt, "t_end": cfg.evolve.t_end,
                   "record_every": cfg.evolve.record_every, "adaptive": cfg.evolve.adaptive},
        "triggers": _trigger_section(),
        "runs": rows,
    }
    write_report(out / "scan_report.json", body, cfg)
    return EXIT_OK


# virial-report ----------------------------------------------------------------

def virial_table(times, MR, bounds, P: float, remainders=None) -> tuple[list, bool]:
    """Per interior record: FD derivative of M_R against the bound plus slack."""
    fd = virial_derivative_fd(times, MR)
    rows, ok_all = [], True
    for k in range(1, len(times) - 1):
        b = bounds[k]
        slack = VIRIAL_REL_SLACK * abs(b) + VIRIAL_ABS_SLACK * P
        ok = bool(fd[k - 1] <= b + slack)
        ok_all &= ok
        row = {"t": times[k], "M_R": MR[k], "fd_derivative": fd[k - 1], "rhs_bound": b,
               "slack": slack, "ok": ok}
        if remainders is not None:
            row.update(remainders[k])
        rows.append(row)
    return rows, ok_all


def _write_virial_csv(path: Path, rows: list) -> None:
    cols = list(rows[0]) if rows else ["t", "M_R", "fd_derivative", "rhs_bound", "slack", "ok"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([str(row[c]).lower() if isinstance(row[c], bool) else fmt(row[c])
                        for c in cols])


def _virial_run(cfg: ExperimentConfig, gs: GroundState, R: float) -> dict:
    ecfg = cfg.evolve
    run_cfg = EvolveConfig(dt=ecfg.dt, t_end=ecfg.t_end, record_every=ecfg.record_every,
                           dt_min=ecfg.dt_min, adaptive=ecfg.adaptive, keep_snapshots=True)
    grid = gs.grid
    mon = _monitor(cfg, grid, R)
    traj = evolve(_initial_data(cfg, gs), cfg.potential, cfg.model, run_cfg, mon)
    E0 = mon.E0_initial
    rem, bounds = [], []
    for u in traj.snapshots:
        vb = virial_rhs_bound(u, cfg.potential, cfg.model, mon.weight, E0)
        bounds.append(vb.total)
        rem.append({"main": vb.main, **{f"rem_{k}": v for k, v in vb.remainders.items()},
                    "pot_2rdV_8V": vb.potential_term_8V,
                    "pot_2rdV_pNV": vb.potential_term_pNV})
    times = [u.t for u in traj.snapshots]
    MR = [r.virial_MR for r in traj.records]
    if len(times) < 3:
        raise ValueError("virial report needs at least 3 records; lower record_every")
    rows, ok = virial_table(times, MR, bounds, gs.P, rem)
    return {"R": R, "termination": traj.termination, "t_final": traj.t_final,
            "interior_records": len(rows), "inequality_holds": ok, "rows": rows,
            "weight_margins": mon.weight.invariant_margins()}


def cmd_virial_report(cfg: ExperimentConfig, out: Path, args) -> int:
    gs = _ground_state(cfg)
    body = {"command": "virial-report", "model": _model_section(cfg),
            "slack": {"relative": VIRIAL_REL_SLACK, "absolute_times_P": VIRIAL_ABS_SLACK},
            "P": gs.P,
            "potential_split": virial_decomposition(cfg.potential, cfg.model, gs.grid).to_dict()}
    if cfg.trajectory is not None:
        recs = read_records_csv(cfg.trajectory)
        if len(recs) < 3:
            raise ValueError("trajectory has fewer than 3 records")
        rows, ok = virial_table([r.t for r in recs], [r.virial_MR for r in recs],
                                [r.virial_rhs for r in recs], gs.P)
        _write_virial_csv(out / "virial_report.csv", rows)
        body.update(source=str(cfg.trajectory), inequality_holds=ok,
                    interior_records=len(rows))
    else:
        _require_evolve(cfg)
        if not cfg.virial_R:
            raise ConfigError("virial-report needs virial.R (a value or a list)")
        runs = [_virial_run(cfg, gs, R) for R in cfg.virial_R]
        _write_virial_csv(out / "virial_report.csv", runs[0]["rows"])
        for run in runs:
            _write_virial_csv(out / f"virial_R{run['R']:g}.csv", run["rows"])
        body.update(R=runs[0]["R"], inequality_holds=runs[0]["inequality_holds"],
                    termination=runs[0]["termination"])
        if len(runs) > 1:
            body["R_sweep"] = [{k: v for k, v in run.items() if k != "rows"} for run in runs]
    write_report(out / "virial_report.json", body, cfg)
    return EXIT_OK


# pairs ------------------------------------------------------------------------

def cmd_pairs(args) -> int:
    try:
        family = canonical_family(args.family)
        rep = pair_report(args.N, family, args.s, q=args.q, r=args.r)
    except NoSolution as exc:
        print(f"no solution in range: {exc}")
        return EXIT_OK
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if rep.get("admissible"):
        print(f"(q, r) = ({rep['q']}, {rep['r']}) is {family} at N={args.N}"
              + (f", s={rep['s']}" if family in ("Lambda_s", "dual_Lambda_s") else ""))
    elif "reason" in rep:
        print(f"rejected: {rep['reason']}")
    else:
        print("no solution in range" if args.q is None or args.r is None
              else f"(q, r) = ({rep['q']}, {rep['r']}) is not {family}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "pairs.json", {"command": "pairs", "result": rep})
    return EXIT_OK


# entry point ------------------------------------------------------------------

COMMANDS = {
    "ground-state": cmd_ground_state,
    "evolve": cmd_evolve,
    "classify-scan": cmd_classify_scan,
    "virial-report": cmd_virial_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bnlsv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_config=True):
        p.add_argument("--config", required=need_config, help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for scans (default: logical cores)")
        p.add_argument("-v", "--verbose", action="store_true")

    for name in COMMANDS:
        common(sub.add_parser(name))
    pp = sub.add_parser("pairs", help="exact admissible-pair arithmetic")
    common(pp, need_config=False)
    pp.add_argument("--N", type=int, required=True)
    pp.add_argument("--family", required=True, help=f"one of {', '.join(FAMILIES)} (or B, S)")
    pp.add_argument("--s", default="0")
    pp.add_argument("--q")
    pp.add_argument("--r")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "pairs":
        return cmd_pairs(args)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else cfg.output
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GroundStateError, SolverError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
