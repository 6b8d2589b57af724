"""Truncated virial weight, localized virial M_R(u) and the bound on its time derivative."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from bnlsv.grid import Field, RadialGrid, integrate, radial_derivative
from bnlsv.model import ModelParams, Potential
from bnlsv import functionals as fn

# Taper of phi'(r) = r * s(r): s = 1 on [0, TAPER_START], 0 beyond TAPER_END.
TAPER_START = 1.0
TAPER_END = 9.0
SUPPORT = 10.0


def _bump(x):
    """exp(-1/x) for x > 0, else 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _step(x):
    """C-infinity monotone step: 0 for x <= 0, 1 for x >= 1, and its derivative."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    f, g = _bump(x), _bump(1.0 - x)
    tot = f + g
    val = f / tot
    with np.errstate(divide="ignore", invalid="ignore"):
        df = np.where(x > 0, f / np.where(x > 0, x, 1.0) ** 2, 0.0)
        dg = np.where(x < 1, g / np.where(x < 1, 1.0 - x, 1.0) ** 2, 0.0)
    dval = (df * g + f * dg) / tot**2
    return val, dval


def profile(r):
    """Unscaled weight: returns (phi, phi', phi'') at radii ``r``."""
    r = np.asarray(r, dtype=float)
    width = TAPER_END - TAPER_START
    s, ds_dx = _step((TAPER_END - r) / width)
    ds = -ds_dx / width
    dphi = r * s
    d2phi = s + r * ds
    return _phi_values(r), dphi, d2phi


_PHI_TABLE: dict = {}


def _phi_values(r):
    # phi = r^2/2 inside the unit ball; beyond, integrate phi' once on a fine
    # table. Hermite interpolation uses the exact phi' at the table nodes.
    if "spline" not in _PHI_TABLE:
        x = np.linspace(TAPER_START, TAPER_END, 40001)
        width = TAPER_END - TAPER_START
        s, _ = _step((TAPER_END - x) / width)
        tab = 0.5 + cumulative_simpson(x * s, x=x, initial=0.0)
        _PHI_TABLE["spline"] = CubicHermiteSpline(x, tab, x * s)
        _PHI_TABLE["end"] = tab[-1]
    spline = _PHI_TABLE["spline"]
    inner = 0.5 * r**2
    outer = np.where(r >= TAPER_END, _PHI_TABLE["end"],
                     spline(np.clip(r, TAPER_START, TAPER_END)))
    return np.where(r <= TAPER_START, inner, outer)


@dataclass(frozen=True, eq=False)
class VirialWeight:
    grid: RadialGrid
    R: float
    phi: np.ndarray = field(repr=False)
    dphi: np.ndarray = field(repr=False)
    d2phi: np.ndarray = field(repr=False)

    @property
    def laplacian(self) -> np.ndarray:
        """Delta phi_R = phi'' + (N-1) phi'/r."""
        return self.d2phi + (self.grid.N - 1) * self.dphi / self.grid.nodes

    def invariant_margins(self) -> dict:
        """Minimum over nodes of 1 - phi'', 1 - phi'/r and N - Delta phi."""
        r = self.grid.nodes
        return {
            "one_minus_d2phi": float(np.min(1.0 - self.d2phi)),
            "one_minus_dphi_over_r": float(np.min(1.0 - self.dphi / r)),
            "N_minus_lap_phi": float(np.min(self.grid.N - self.laplacian)),
        }


def make_virial_weight(grid: RadialGrid, R: float) -> VirialWeight:
    """phi_R(r) = R^2 phi(r/R) sampled at the nodes, with its invariants checked."""
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if SUPPORT * R > grid.r_max:
        raise ValueError(f"10R = {SUPPORT * R} exceeds r_max = {grid.r_max}")
    r = grid.nodes
    phi, dphi, d2phi = profile(r / R)
    w = VirialWeight(grid, float(R), R * R * phi, R * dphi, d2phi)

    inside = r <= R
    if not np.allclose(w.phi[inside], 0.5 * r[inside] ** 2, rtol=1e-14, atol=0):
        raise ValueError("phi_R != r^2/2 inside r <= R")
    if np.any(w.dphi[r >= SUPPORT * R] != 0):
        raise ValueError("phi_R' does not vanish beyond 10R")
    m = w.invariant_margins()
    if m["one_minus_d2phi"] < -1e-12 or m["one_minus_dphi_over_r"] < -1e-12 \
            or m["N_minus_lap_phi"] < -1e-10:
        raise ValueError(f"virial weight violates its pointwise bounds: {m}")
    return w


def localized_virial(u: Field, w: VirialWeight) -> float:
    """M_R(u) = 2 Im int u phi_R' d_r conj(u) dx."""
    if not u.grid.same_as(w.grid):
        raise ValueError("field and virial weight live on different grids")
    du = radial_derivative(u.grid, u)
    return float(2.0 * integrate(u.grid, u.values * w.dphi * np.conj(du)).imag)


def cauchy_schwarz_bound(u: Field, w: VirialWeight) -> float:
    """2 max(phi_R') ||u||_2 ||d_r u||_2, an upper bound for |M_R(u)|."""
    return 2.0 * float(np.max(w.dphi)) * math.sqrt(fn.mass(u) * fn.grad_sq(u))


@dataclass(frozen=True)
class VirialBound:
    main: float
    remainders: dict
    potential_term_8V: float
    potential_term_pNV: float

    @property
    def total(self) -> float:
        return self.main + sum(self.remainders.values())


def virial_rhs_bound(u: Field, pot: Potential, params: ModelParams, w: VirialWeight,
                     E0_initial: float) -> VirialBound:
    """Main terms and unit-constant remainders of the bound on d/dt M_R.

    Remainder keys: ``R_pow`` = R^-4, ``grad`` = R^-2 ||grad u||^2,
    ``grad_nonlinear`` = R^(-(N-1)(p-1)/2) ||grad u||^((p-1)/2) and
    ``outer_mass`` = ||u||^2 on |x| > R.

    ``potential_term_8V`` is int |u|^2 (2 r V' + 8 V) (the term in the main
    part); ``potential_term_pNV`` is the (p-1)N weighting from the negative
    energy argument, reported for comparison only.
    """
    N, p, R = params.N, params.p, w.R
    r = u.grid.nodes
    V, dV = pot.eval(r)
    dens = np.abs(u.values) ** 2
    pot8 = float(integrate(u.grid, dens * (2 * r * dV + 8 * V)).real)
    potN = float(integrate(u.grid, dens * (2 * r * dV + (p - 1) * N * V)).real)
    main = (2 * N * (p - 1) * E0_initial
            - ((p - 1) * N - 8) * fn.h_half_sq(u, pot) - pot8)
    g2 = fn.grad_sq(u)
    remainders = {
        "R_pow": R**-4,
        "grad": R**-2 * g2,
        "grad_nonlinear": R ** (-(N - 1) * (p - 1) / 2) * g2 ** ((p - 1) / 4),
        "outer_mass": fn.l2_outside(u, R),
    }
    return VirialBound(main, remainders, pot8, potN)


def virial_derivative_fd(times, values) -> np.ndarray:
    """Second-order finite-difference d/dt of M_R on a possibly uneven time series.

    Returns one value per interior record (endpoints dropped).
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(values, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 records for a centered derivative")
    return np.gradient(m, t)[1:-1]
