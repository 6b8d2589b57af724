"""Radial discretization of R^N and integrals in the measure r^(N-1) dr."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_NODES = 16


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^(N-1) in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centered uniform grid on (0, r_max] with midpoint weights.

    ``weights[i] = h * r_i**(N-1)`` so that ``omega * sum(w * f)`` approximates
    the integral of a radial function over the ball of radius ``r_max``.
    """

    N: int
    r_max: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    omega: float

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def faces(self) -> np.ndarray:
        """Cell faces r_{i+1/2}, i = -1..n-1 (length n + 1, starting at 0)."""
        return self.h * np.arange(self.n + 1)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.N == other.N and self.n == other.n and self.r_max == other.r_max
        )

    def sample(self, f, t: float = 0.0) -> "Field":
        """Field from a callable of r evaluated at the nodes."""
        return Field(self, np.asarray(f(self.nodes), dtype=complex), t)


def make_grid(N: int, r_max: float, n: int) -> RadialGrid:
    if int(N) != N or N < 1:
        raise ValueError(f"dimension N must be a positive integer, got {N!r}")
    if not (r_max > 0 and math.isfinite(r_max)):
        raise ValueError(f"r_max must be positive and finite, got {r_max!r}")
    if int(n) != n or n < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} nodes, got {n!r}")
    N, n = int(N), int(n)
    h = r_max / n
    nodes = (np.arange(n) + 0.5) * h
    weights = h * nodes ** (N - 1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(N=N, r_max=float(r_max), n=n, nodes=nodes, weights=weights,
                      omega=sphere_area(N))


@dataclass(eq=False)
class Field:
    """Complex radial profile sampled at the nodes of ``grid`` at time ``t``."""

    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"field has {self.values.shape} samples, grid has {self.grid.n} nodes"
            )

    @property
    def collapsed(self) -> bool:
        return not bool(np.all(np.isfinite(self.values)))

    def replace(self, values=None, t=None) -> "Field":
        return Field(self.grid, self.values if values is None else values,
                     self.t if t is None else t)

    def __mul__(self, c) -> "Field":
        return self.replace(values=c * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return self.replace(values=self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same(self.grid, other.grid)
        return self.replace(values=self.values - other.values)


def _check_same(a: RadialGrid, b: RadialGrid) -> None:
    if not a.same_as(b):
        raise ValueError("fields live on different grids")


def _samples(grid: RadialGrid, f) -> np.ndarray:
    vals = f.values if isinstance(f, Field) else np.asarray(f)
    if vals.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {vals.shape}")
    return vals


def integrate(grid: RadialGrid, f):
    """Integral over R^N (truncated at r_max) of radial samples ``f``."""
    vals = _samples(grid, f)
    return grid.omega * np.dot(grid.weights, vals)


def lp_norm(grid: RadialGrid, u, q: float) -> float:
    if q < 1:
        raise ValueError(f"L^q norm needs q >= 1, got {q}")
    vals = _samples(grid, u)
    if math.isinf(q):
        return float(np.max(np.abs(vals))) if vals.size else 0.0
    return float(integrate(grid, np.abs(vals) ** q).real) ** (1.0 / q)


def weighted_inner(grid: RadialGrid, u, v) -> complex:
    """<u, v> = integral of conj(u) v, conjugate-linear in the first slot."""
    if isinstance(u, Field):
        _check_same(grid, u.grid)
    if isinstance(v, Field):
        _check_same(grid, v.grid)
    return complex(integrate(grid, np.conj(_samples(grid, u)) * _samples(grid, v)))


def radial_derivative(grid: RadialGrid, u) -> np.ndarray:
    """Centered-difference d/dr; even reflection at r=0 and u=0 beyond r_max."""
    vals = _samples(grid, u)
    padded = np.concatenate(([vals[0]], vals, [0.0]))
    return (padded[2:] - padded[:-2]) / (2.0 * grid.h)


# --- CSV snapshot format -------------------------------------------------------

FIELD_HEADER = "r,re_u,im_u"


def write_field_csv(path, u: Field) -> None:
    g = u.grid
    lines = [
        f"# N={g.N},t={u.t:.17g},r_max={g.r_max:.17g},n={g.n}",
        FIELD_HEADER,
    ]
    lines += [f"{r:.17g},{z.real:.17g},{z.imag:.17g}" for r, z in zip(g.nodes, u.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> Field:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing metadata line")
    meta = dict(item.split("=") for item in text[0].lstrip("# ").split(","))
    if text[1].strip() != FIELD_HEADER:
        raise ValueError(f"{path}: unexpected header {text[1]!r}")
    data = np.loadtxt(text[2:], delimiter=",", ndmin=2)
    grid = make_grid(int(meta["N"]), float(meta["r_max"]), int(meta["n"]))
    if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.nodes, rtol=1e-14):
        raise ValueError(f"{path}: node column does not match the declared grid")
    return Field(grid, data[:, 1] + 1j * data[:, 2], float(meta["t"]))
