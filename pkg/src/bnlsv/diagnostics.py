"""State functionals, threshold classification, monitor records and run-level proxies."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from bnlsv.functionals import (delta_sq, energy, h_half_sq, kinetic_product, lp_power,
                               mass)
from bnlsv.grid import Field, lp_norm
from bnlsv.groundstate import GroundState
from bnlsv.model import ModelParams, Potential
from bnlsv.virial import VirialWeight, localized_virial, virial_rhs_bound

__all__ = [
    "MonitorRecord", "Monitor", "ThresholdVerdict", "mass", "energy",
    "threshold_classify", "coercivity_gap", "comparability_check",
    "blowup_trigger", "scattering_proxy", "strichartz_norm",
    "write_records_csv", "read_records_csv",
]

BLOWUP_GROWTH_SQ = 100.0  # ||Lu||^2 growth factor (i.e. 10x in ||Lu||)
EQUALITY_TOL = 1e-9
TAIL_FRACTION = 0.9
SCATTER_RATIO = 0.5
SCATTER_BOUND = 2.0


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    mass: float
    energy: float
    delta_u_sq: float
    h_half_sq: float
    lp1: float
    kinetic_product: float
    virial_MR: float
    virial_rhs: float
    tail_mass_frac: float
    dt_current: float


RECORD_COLUMNS = [f.name for f in fields(MonitorRecord)]


class Monitor:
    """Produces a MonitorRecord from a state; holds the run's fixed context."""

    def __init__(self, pot: Potential, params: ModelParams,
                 weight: Optional[VirialWeight] = None, E0_initial: Optional[float] = None):
        self.pot = pot
        self.params = params
        self.weight = weight
        self.E0_initial = E0_initial

    def __call__(self, u: Field, dt: float) -> MonitorRecord:
        p = self.params.p
        M = mass(u)
        hh = h_half_sq(u, self.pot)
        P = lp_power(u, p + 1)
        E = 0.5 * hh + self.params.lam / (p + 1) * P
        if self.E0_initial is None:
            self.E0_initial = E
        if self.weight is not None:
            MR = localized_virial(u, self.weight)
            rhs = virial_rhs_bound(u, self.pot, self.params, self.weight,
                                   self.E0_initial).total
        else:
            MR = rhs = math.nan
        tail = np.where(u.grid.nodes > TAIL_FRACTION * u.grid.r_max, np.abs(u.values) ** 2, 0)
        tail_mass = float(np.dot(u.grid.weights, tail) * u.grid.omega)
        return MonitorRecord(
            t=u.t,
            mass=M,
            energy=E,
            delta_u_sq=delta_sq(u),
            h_half_sq=hh,
            lp1=P ** (1 / (p + 1)),
            kinetic_product=math.sqrt(M) ** self.params.threshold_exponent * math.sqrt(max(hh, 0)),
            virial_MR=MR,
            virial_rhs=rhs,
            tail_mass_frac=tail_mass / M if M > 0 else 0.0,
            dt_current=dt,
        )


def record_is_collapsed(rec: MonitorRecord) -> bool:
    vals = (rec.mass, rec.energy, rec.delta_u_sq, rec.h_half_sq, rec.lp1)
    return not all(math.isfinite(v) for v in vals)


@dataclass(frozen=True)
class ThresholdVerdict:
    energy_ratio: float
    kinetic_ratio: float
    cls: str
    energy: float

    def to_dict(self) -> dict:
        return {"energy_ratio": self.energy_ratio, "kinetic_ratio": self.kinetic_ratio,
                "class": self.cls, "energy": self.energy}


def threshold_classify(u: Field, pot: Potential, params: ModelParams,
                       gs: GroundState) -> ThresholdVerdict:
    """Place ``u`` relative to the mass-energy and kinetic thresholds of Q."""
    if (gs.N, gs.p) != (params.N, params.p):
        raise ValueError("ground state solved for a different (N, p)")
    E = energy(u, pot, params)
    M = mass(u)
    energy_ratio = M ** params.threshold_exponent * E / gs.thresh_energy
    kinetic_ratio = kinetic_product(u, pot, params) / gs.thresh_kinetic
    if E < 0:
        cls = "negative_energy"
    elif abs(energy_ratio - 1) <= EQUALITY_TOL or abs(kinetic_ratio - 1) <= EQUALITY_TOL:
        cls = "indeterminate"
    elif energy_ratio < 1 and kinetic_ratio < 1:
        cls = "below_both"
    elif energy_ratio < 1 and kinetic_ratio > 1:
        cls = "above_kinetic"
    else:
        cls = "indeterminate"
    return ThresholdVerdict(energy_ratio, kinetic_ratio, cls, E)


def coercivity_gap(u: Field, params: ModelParams) -> float:
    """(||Lu||^2 - N(p-1)/(4(p+1)) ||u||_{p+1}^{p+1}) / ||Lu||^2."""
    D = delta_sq(u)
    if D == 0:
        raise ValueError("coercivity gap undefined for a field with Lu = 0")
    N, p = params.N, params.p
    return (D - N * (p - 1) / (4 * (p + 1)) * lp_power(u, p + 1)) / D


def comparability_check(u: Field, pot: Potential, params: ModelParams) -> tuple[bool, bool]:
    """Lower and upper comparison of E(u) with ||H^(1/2) u||^2, each with 1e-9 slack."""
    N, p = params.N, params.p
    hh = h_half_sq(u, pot)
    E = energy(u, pot, params)
    slack = EQUALITY_TOL * max(hh, abs(E), 1e-300)
    lower = (N * (p - 1) - 8) / (2 * N * (p - 1)) * hh <= E + slack
    upper = E <= 0.5 * hh + slack
    return bool(lower), bool(upper)


def growth_exceeded(delta_u_sq: float, initial_delta_u_sq: float) -> bool:
    """True when ||Lu|| has grown past 10x its initial value, or is not finite."""
    return not math.isfinite(delta_u_sq) or delta_u_sq > BLOWUP_GROWTH_SQ * initial_delta_u_sq


def blowup_trigger(record: MonitorRecord, initial: MonitorRecord) -> bool:
    if record_is_collapsed(record):
        return True
    return growth_exceeded(record.delta_u_sq, initial.delta_u_sq)


def scattering_proxy(records: Sequence[MonitorRecord]) -> dict:
    """Tail decay of ||u||_{p+1} over the second half of a completed run."""
    if len(records) < 4:
        raise ValueError("scattering proxy needs at least 4 records")
    lp0, lp_end = records[0].lp1, records[-1].lp1
    ratio = lp_end / lp0 if lp0 > 0 else 0.0
    hh0 = records[0].h_half_sq
    bounded = all(r.h_half_sq <= SCATTER_BOUND * hh0 for r in records) if hh0 > 0 else True
    half = [r for r in records[len(records) // 2:] if r.t > 0 and r.lp1 > 0]
    if len(half) >= 2:
        slope = float(np.polyfit(np.log([r.t for r in half]), np.log([r.lp1 for r in half]), 1)[0])
    else:
        slope = math.nan
    verdict = ratio < SCATTER_RATIO and bounded
    return {
        "lp1_ratio": ratio,
        "tail_loglog_slope": slope,
        "h_half_bounded": bounded,
        "verdict": "consistent-with-scattering" if verdict else "not-scattering",
        "ratio_threshold": SCATTER_RATIO,
        "boundedness_factor": SCATTER_BOUND,
    }


def strichartz_norm(snapshots: Sequence[Field], q: float, r: float) -> float:
    """Discrete L^q_t L^r_x norm from state snapshots (trapezoid rule in t)."""
    if not snapshots:
        raise ValueError("no snapshots retained; enable snapshot retention")
    vals = np.array([lp_norm(u.grid, u, r) for u in snapshots])
    if math.isinf(q):
        return float(vals.max())
    t = np.array([u.t for u in snapshots])
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(vals**q, t) ** (1.0 / q))


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_records_csv(path, records: Sequence[MonitorRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in records:
            w.writerow([fmt(v) for v in astuple(rec)])


def read_records_csv(path) -> list[MonitorRecord]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RECORD_COLUMNS:
        raise ValueError(f"{path}: header does not match the monitor record schema")
    return [MonitorRecord(*map(float, row)) for row in rows[1:]]
