"""Equation parameters, the radial potential family and hypothesis checks on (N, p, V)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from bnlsv.grid import RadialGrid, integrate

FOCUSING = -1
DEFOCUSING = 1


def critical_exponent(N: int, p: float) -> float:
    """Scaling-critical Sobolev index s_c = N/2 - 4/(p-1)."""
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    if p <= 1:
        raise ValueError(f"power p must exceed 1, got {p}")
    return N / 2 - 4 / (p - 1)


def admissible_power_range(N: int) -> tuple[Fraction, Fraction]:
    """Open interval of powers with 0 < s_c < 2, returned as exact fractions."""
    if N <= 4:
        raise ValueError(f"the range 1+8/N < p < 1+8/(N-4) needs N >= 5, got {N}")
    return 1 + Fraction(8, N), 1 + Fraction(8, N - 4)


def in_power_range(N: int, p: float) -> bool:
    """Strict membership; floats are read as their shortest decimal (1.8 is 9/5)."""
    lo, hi = admissible_power_range(N)
    exact = Fraction(repr(p)) if isinstance(p, float) else Fraction(p)
    return lo < exact < hi


@dataclass(frozen=True)
class ModelParams:
    N: int
    p: float
    lam: int = FOCUSING

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p!r}")
        if self.lam not in (FOCUSING, DEFOCUSING):
            raise ValueError(f"lambda must be -1 or +1, got {self.lam!r}")

    @property
    def s_c(self) -> float:
        return critical_exponent(self.N, self.p)

    @property
    def m(self) -> float:
        """Soliton frequency 2 - s_c."""
        return 2.0 - self.s_c

    @property
    def threshold_exponent(self) -> float:
        """(2 - s_c)/s_c, the mass power in the threshold products."""
        return (2.0 - self.s_c) / self.s_c

    def require_intercritical(self) -> None:
        if not 0 < self.s_c < 2:
            raise ValueError(
                f"(N={self.N}, p={self.p}) gives s_c={self.s_c:.6g}; need 0 < s_c < 2"
            )


@dataclass(frozen=True, eq=False)
class Potential:
    """Radial potential V(r).

    ``kind`` is ``"zero"``, ``"inverse_power"`` (V = C (1+r^2)^-sigma) or
    ``"tabulated"`` (samples ``table = (r, V, dV)``; dV may be None).
    """

    kind: str = "zero"
    C: float = 0.0
    sigma: float = 1.0
    table: Optional[tuple] = field(default=None, repr=False)
    source: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("zero", "inverse_power", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "inverse_power":
            if self.C < 0:
                raise ValueError(f"amplitude C must be >= 0, got {self.C}")
            if self.sigma <= 0:
                raise ValueError(f"decay exponent sigma must be > 0, got {self.sigma}")
        if self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated potential needs a table")
            r, V, dV = self.table
            r = np.asarray(r, dtype=float)
            if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0):
                raise ValueError("table radii must be strictly increasing (>= 4 rows)")
            if r[0] < 0:
                raise ValueError("table radii must be >= 0")
            V = np.asarray(V, dtype=float)
            if dV is None:
                spline = CubicSpline(r, V)
                object.__setattr__(self, "_interp", (spline, spline.derivative()))
            else:
                dV = np.asarray(dV, dtype=float)
                object.__setattr__(
                    self, "_interp",
                    (lambda x: np.interp(x, r, V), lambda x: np.interp(x, r, dV)),
                )
            object.__setattr__(self, "table", (r, V, dV))

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def inverse_power(cls, C: float, sigma: float) -> "Potential":
        return cls("inverse_power", C=float(C), sigma=float(sigma))

    @classmethod
    def from_table_file(cls, path) -> "Potential":
        """Two columns ``r V`` or three columns ``r V dV``, whitespace separated."""
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] not in (2, 3):
            raise ValueError(f"{path}: expected 2 or 3 columns, got {data.shape[1]}")
        dV = data[:, 2] if data.shape[1] == 3 else None
        return cls("tabulated", table=(data[:, 0], data[:, 1], dV), source=str(path))

    def __call__(self, r):
        return self.eval(r)[0]

    def eval(self, r):
        """Return ``(V(r), V'(r))``; works on scalars and arrays."""
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0):
            raise ValueError("potential evaluated at negative radius")
        if self.kind == "zero":
            V = np.zeros_like(r_arr)
            dV = np.zeros_like(r_arr)
        elif self.kind == "inverse_power":
            base = 1.0 + r_arr**2
            V = self.C * base ** (-self.sigma)
            dV = -2.0 * self.sigma * self.C * r_arr * base ** (-self.sigma - 1.0)
        else:
            lo, hi = self.table[0][0], self.table[0][-1]
            if np.any(r_arr < lo) or np.any(r_arr > hi):
                raise ValueError(f"radius outside tabulated range [{lo}, {hi}]")
            f, df = self._interp
            V, dV = np.asarray(f(r_arr), dtype=float), np.asarray(df(r_arr), dtype=float)
        if np.ndim(r) == 0:
            return float(V), float(dV)
        return V, dV

    def to_config(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "inverse_power":
            return {"kind": "inverse_power", "C": self.C, "sigma": self.sigma}
        return {"kind": "tabulated", "table": self.source}

    @classmethod
    def from_config(cls, cfg: dict, base_dir=None) -> "Potential":
        kind = cfg.get("kind", "zero")
        if kind == "zero":
            return cls.zero()
        if kind == "inverse_power":
            return cls.inverse_power(cfg.get("C", 1.0), cfg["sigma"])
        if kind == "tabulated":
            path = Path(cfg["table"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return cls.from_table_file(path)
        raise ValueError(f"unknown potential kind {kind!r}")


def potential_eval(pot: Potential, r: float) -> tuple[float, float]:
    return pot.eval(float(r))


@dataclass(frozen=True)
class HypothesisReport:
    repulsive: bool
    nonnegative: bool
    decay_sup: float
    decay_finite: bool
    decay_exact: Optional[bool]
    max_rdV: float
    min_V: float

    @property
    def ok(self) -> bool:
        decay = self.decay_finite if self.decay_exact is None else self.decay_exact
        return self.repulsive and self.nonnegative and decay

    def to_dict(self) -> dict:
        return {
            "repulsive": self.repulsive,
            "nonnegative": self.nonnegative,
            "decay_sup": self.decay_sup,
            "decay_finite": self.decay_finite,
            "decay_exact": self.decay_exact,
            "max_r_dV": self.max_rdV,
            "min_V": self.min_V,
            "ok": self.ok,
        }


def check_hypotheses(pot: Potential, params: ModelParams, grid: RadialGrid) -> HypothesisReport:
    """Grid-sampled checks of repulsivity, sign and decay <r>^-(N+4) of (V, V')."""
    r = grid.nodes
    V, dV = pot.eval(r)
    rdV = r * dV
    beta = params.N + 4
    size = np.abs(V) + np.abs(dV)
    weighted = (1.0 + r**2) ** (beta / 2) * size
    decay_sup = float(np.max(weighted))

    # Finite when the tail of |V|+|V'| decays faster than r^-beta: the weighted
    # quantity is not growing over the outer quarter of the grid.
    tail = slice(3 * grid.n // 4, None)
    tail_vals = weighted[tail]
    if np.all(size[tail] == 0):
        decay_finite = True
    else:
        decay_finite = bool(tail_vals[-1] <= tail_vals[0] * (1 + 1e-12)) and math.isfinite(decay_sup)

    decay_exact = None
    if pot.kind == "inverse_power":
        decay_exact = pot.C == 0 or 2 * pot.sigma > beta
    elif pot.kind == "zero":
        decay_exact = True

    return HypothesisReport(
        repulsive=bool(np.all(rdV <= 0)),
        nonnegative=bool(np.all(V >= 0)),
        decay_sup=decay_sup,
        decay_finite=decay_finite,
        decay_exact=decay_exact,
        max_rdV=float(np.max(rdV)),
        min_V=float(np.min(V)),
    )


@dataclass(frozen=True, eq=False)
class VirialPotentialDecomposition:
    """W = 4V + rV' split into positive and negative parts on the grid."""

    W: np.ndarray
    W_plus: np.ndarray
    W_minus: np.ndarray
    W_minus_LNover4: float
    # Weighting 2rV' + (p-1)N V used in the negative-energy blow-up argument.
    W_proof: np.ndarray
    W_proof_minus_LNover4: float

    def to_dict(self) -> dict:
        return {
            "W_minus_LNover4": self.W_minus_LNover4,
            "W_min": float(np.min(self.W)),
            "W_nonnegative": bool(np.all(self.W >= 0)),
            "W_proof_minus_LNover4": self.W_proof_minus_LNover4,
        }


def _quasi_norm(grid: RadialGrid, f: np.ndarray, q: float) -> float:
    total = float(integrate(grid, np.abs(f) ** q).real)
    return total ** (1.0 / q) if total > 0 else 0.0


def virial_decomposition(pot: Potential, params: ModelParams,
                         grid: RadialGrid) -> VirialPotentialDecomposition:
    r = grid.nodes
    V, dV = pot.eval(r)
    W = 4.0 * V + r * dV
    W_plus = np.maximum(W, 0.0)
    W_minus = np.maximum(-W, 0.0)
    q = params.N / 4
    W_proof = 2.0 * r * dV + (params.p - 1) * params.N * V
    return VirialPotentialDecomposition(
        W=W,
        W_plus=W_plus,
        W_minus=W_minus,
        W_minus_LNover4=_quasi_norm(grid, W_minus, q),
        W_proof=W_proof,
        W_proof_minus_LNover4=_quasi_norm(grid, np.maximum(-W_proof, 0.0), q),
    )
