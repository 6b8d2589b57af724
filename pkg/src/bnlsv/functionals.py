"""Quadratic and nonlinear functionals of a radial field."""

from __future__ import annotations

import numpy as np

from bnlsv.grid import Field, integrate, lp_norm, radial_derivative
from bnlsv.model import ModelParams, Potential
from bnlsv.operators import laplacian_for


def mass(u: Field) -> float:
    return float(integrate(u.grid, np.abs(u.values) ** 2).real)


def delta_sq(u: Field) -> float:
    """||L u||^2, the discrete ||Delta u||_2^2."""
    Lu = laplacian_for(u.grid).matrix @ u.values
    return float(integrate(u.grid, np.abs(Lu) ** 2).real)


def potential_term(u: Field, pot: Potential) -> float:
    """Integral of V |u|^2."""
    V, _ = pot.eval(u.grid.nodes)
    return float(integrate(u.grid, V * np.abs(u.values) ** 2).real)


def h_half_sq(u: Field, pot: Potential) -> float:
    """<Hu, u> = ||H^(1/2) u||^2, evaluated as ||Lu||^2 + int V|u|^2.

    Same value as the quadratic form of ``H_for`` (L is weighted-symmetric) but
    free of the cancellation in L @ L for smooth fields.
    """
    return delta_sq(u) + (0.0 if pot.kind == "zero" else potential_term(u, pot))


def lp_power(u: Field, q: float) -> float:
    """Integral of |u|^q."""
    return float(integrate(u.grid, np.abs(u.values) ** q).real)


def energy(u: Field, pot: Potential, params: ModelParams) -> float:
    p = params.p
    return 0.5 * h_half_sq(u, pot) + params.lam / (p + 1) * lp_power(u, p + 1)


def grad_sq(u: Field) -> float:
    """||du/dr||^2 with centered differences."""
    return float(integrate(u.grid, np.abs(radial_derivative(u.grid, u)) ** 2).real)


def l2_outside(u: Field, R: float) -> float:
    """||u||^2 restricted to |x| > R."""
    mask = u.grid.nodes > R
    return float(integrate(u.grid, np.where(mask, np.abs(u.values) ** 2, 0.0)).real)


def kinetic_product(u: Field, pot: Potential, params: ModelParams) -> float:
    """||u||_2^((2-s_c)/s_c) * ||H^(1/2) u||_2."""
    return lp_norm(u.grid, u, 2) ** params.threshold_exponent * np.sqrt(max(h_half_sq(u, pot), 0.0))
