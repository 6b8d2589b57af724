"""Strang-split Crank-Nicolson integration of i u_t + H u + lam |u|^(p-1) u = 0."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from bnlsv.diagnostics import Monitor, MonitorRecord, blowup_trigger, growth_exceeded
from bnlsv.functionals import delta_sq
from bnlsv.grid import Field
from bnlsv.model import ModelParams, Potential
from bnlsv.operators import H_for, RadialOperator, SolverError, apply, solve_shifted

log = logging.getLogger(__name__)

TERMINATIONS = ("completed", "blowup_detected", "dt_floor_hit", "nan_detected")


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    record_every: int = 10
    dt_min: Optional[float] = None
    adaptive: bool = True
    keep_snapshots: bool = False
    max_phase: float = 0.5  # radians of nonlinear phase per step

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every}")
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", self.dt / 2**15)
        if not 0 < self.dt_min <= self.dt:
            raise ValueError(f"need 0 < dt_min <= dt, got dt_min={self.dt_min}")
        if not self.max_phase > 0:
            raise ValueError("max_phase must be positive")


@dataclass
class Trajectory:
    records: list
    final_state: Field
    termination: str
    snapshots: list = field(default_factory=list)
    steps: int = 0

    @property
    def t_final(self) -> float:
        return self.final_state.t

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def linear_half_step(u: Field, H_op: RadialOperator, dt: float, check: bool = True) -> Field:
    """Cayley step: (I - i dt/2 H) v = (I + i dt/2 H) u."""
    if not H_op.grid.same_as(u.grid):
        raise ValueError("operator and field live on different grids")
    alpha = 2j / dt
    rhs = alpha * u.values - H_op.matrix @ u.values
    return solve_shifted(H_op, alpha, u.replace(values=rhs), check=check)


def nonlinear_step(u: Field, params: ModelParams, dt: float) -> Field:
    """Exact phase rotation u <- u exp(i lam |u|^(p-1) dt)."""
    amp = np.abs(u.values) ** (params.p - 1)
    return u.replace(values=u.values * np.exp(1j * params.lam * amp * dt))


def strang_step(u: Field, H_op: RadialOperator, params: ModelParams, dt: float,
                check: bool = True) -> Field:
    v = nonlinear_step(u, params, 0.5 * dt)
    v = linear_half_step(v, H_op, dt, check=check)
    v = nonlinear_step(v, params, 0.5 * dt)
    return v.replace(t=u.t + dt)


def integrate_steps(u0: Field, pot: Potential, params: ModelParams, dt: float,
                    steps: int) -> Field:
    """Fixed-step Strang integration; ``dt`` may be negative (backward in time)."""
    H_op = H_for(u0.grid, pot)
    u = u0
    for _ in range(steps):
        u = strang_step(u, H_op, params, dt)
    return u


def nonlinear_rate(u: Field, params: ModelParams) -> float:
    """max |u|^(p-1), the pointwise phase speed of the nonlinear sub-flow."""
    return float(np.max(np.abs(u.values))) ** (params.p - 1)


def evolve(u0: Field, pot: Potential, params: ModelParams, cfg: EvolveConfig,
           monitor: Optional[Monitor] = None) -> Trajectory:
    """Step from u0.t to u0.t + t_end, recording every ``record_every`` steps.

    The step halves whenever the nonlinear phase per step would exceed
    ``max_phase``; the growth trigger is tested after every step.
    """
    monitor = monitor or Monitor(pot, params)
    H_op = H_for(u0.grid, pot)
    t0 = u0.t
    t_stop = t0 + cfg.t_end
    dt = cfg.dt
    u = u0
    records = [monitor(u, dt)]
    initial = records[0]
    snapshots = [u] if cfg.keep_snapshots else []
    termination = "completed"
    steps = 0

    def record(state: Field):
        rec = monitor(state, dt)
        if rec.t > records[-1].t:
            records.append(rec)
            if cfg.keep_snapshots:
                snapshots.append(state)
        return rec

    while u.t < t_stop:
        if cfg.adaptive:
            rate = nonlinear_rate(u, params)
            while rate * min(dt, t_stop - u.t) > cfg.max_phase and dt > cfg.dt_min:
                dt = max(0.5 * dt, cfg.dt_min)
            if rate * min(dt, t_stop - u.t) > cfg.max_phase:
                termination = "dt_floor_hit"
                break
        step = min(dt, t_stop - u.t)
        try:
            nxt = strang_step(u, H_op, params, step)
        except SolverError as exc:
            log.warning("linear solve failed at t=%g: %s", u.t, exc)
            termination = "nan_detected"
            break
        if t_stop - (u.t + step) <= 1e-12 * max(1.0, abs(t_stop)):
            nxt = nxt.replace(t=t_stop)
        u = nxt
        steps += 1
        if u.collapsed:
            termination = "nan_detected"
            break
        if growth_exceeded(delta_sq(u), initial.delta_u_sq):
            rec = record(u)
            if blowup_trigger(rec, initial):
                termination = "blowup_detected"
                break
        if steps % cfg.record_every == 0:
            record(u)

    if records[-1].t < u.t and not u.collapsed:
        record(u)
    return Trajectory(records, u, termination, snapshots, steps)


def run_summary(traj: Trajectory) -> dict:
    return {
        "termination": traj.termination,
        "t_final": traj.t_final,
        "steps": traj.steps,
        "records": len(traj.records),
    }
