"""Below-ground-state functionals: Nehari ``K``, ``J``, ``Z``, modified energy and trapping.

With ``Z(u) = <udot, u> + alpha ||u||^2`` and ``Et = 2E + alpha Z`` a solution
of the damped equation satisfies exactly::

    dZ/dt  = ||udot||^2 - K(u) + alpha <u, udot>
    dEt/dt = -alpha ||udot||^2 - alpha K(u) + alpha^2 <u, udot>

The ``half`` variant ``Z = <udot, u> + (alpha/2) ||u||^2`` removes the cross
term: ``dEt/dt = -alpha ||udot||^2 - alpha K(u)``, which is ``<= 0`` while
``K >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
import functools

import numpy as np

from .bubbles import multibubble_profile
from .grid import FieldPair, gradient_sq, nonlinear_energy, potential_integral

__all__ = [
    "nehari_K",
    "kinetic_J",
    "z_functional",
    "etilde",
    "etilde_expanded",
    "etilde_rate",
    "TrapReport",
    "ground_state_levels",
    "trap_check",
    "TRAP_MARGIN",
]

TRAP_MARGIN = 1e-6


def nehari_K(grid, u):
    """``K(u) = ||grad u||^2 - ||u||_{p+1}^{p+1}``."""
    return gradient_sq(grid, u) - potential_integral(grid, u)


def kinetic_J(grid, u):
    """``J(u) = ½||grad u||^2 - ||u||_{p+1}^{p+1}/(p+1)``."""
    D = grid.D
    return 0.5 * gradient_sq(grid, u) - (D - 2) / (2.0 * D) * potential_integral(grid, u)


def _zcoef(alpha, variant):
    if variant == "full":
        return alpha
    if variant == "half":
        return alpha / 2.0
    raise ValueError(f"unknown variant {variant!r}")


def z_functional(grid, state, alpha, variant="full"):
    """``<udot, u> + a ||u||^2`` with ``a = alpha`` (``full``) or ``alpha/2`` (``half``)."""
    return grid.inner(state.udot, state.u) + _zcoef(alpha, variant) * grid.inner(state.u, state.u)


def etilde(grid, state, alpha, variant="full"):
    """``2 E(u, udot) + alpha Z(u, udot)``."""
    return 2.0 * nonlinear_energy(grid, state) + alpha * z_functional(grid, state, alpha, variant)


def etilde_expanded(grid, state, alpha):
    """``½(||udot||^2 + alpha^2||u||^2 + ||udot + alpha u||^2) + 2J(u)`` (``full`` variant)."""
    n = grid.inner
    u, v = state.u, state.udot
    w = v + alpha * u
    return 0.5 * (n(v, v) + alpha**2 * n(u, u) + n(w, w)) + 2.0 * kinetic_J(grid, u)


def etilde_rate(grid, state, alpha, variant="full"):
    """Exact ``dEt/dt`` along the flow (see module docstring)."""
    kin = grid.inner(state.udot, state.udot)
    K = nehari_K(grid, state.u)
    rate = -alpha * kin - alpha * K
    if variant == "full":
        rate += alpha**2 * grid.inner(state.u, state.udot)
    return rate


@dataclass(frozen=True)
class TrapReport:
    E_value: float
    grad_norm_sq: float
    gradW_norm_sq: float
    threshold: float
    inside_trap: bool
    K_value: float
    J_value: float
    Etilde_value: float


@functools.lru_cache(maxsize=16)
def _levels(D, faces_bytes):
    from .grid import RadialGrid
    grid = RadialGrid(D, np.frombuffer(faces_bytes, dtype=float))
    W = multibubble_profile(grid, (1,), (1.0,))
    return nonlinear_energy(grid, FieldPair.static(W)), gradient_sq(grid, W)


def ground_state_levels(grid):
    """``(E(W, 0), ||grad W||^2)`` on ``grid`` (cached per grid)."""
    return _levels(grid.D, grid.faces.tobytes())


def trap_check(grid, state, alpha, variant="full"):
    """Is ``state`` strictly below the ground state in energy and gradient norm?

    Both inequalities carry a relative margin ``TRAP_MARGIN``.  Inside the
    trap ``K(u) > 0`` is asserted.
    """
    EW, gW = ground_state_levels(grid)
    E = nonlinear_energy(grid, state)
    grad = gradient_sq(grid, state.u)
    inside = bool(E < EW - TRAP_MARGIN * abs(EW) and grad < gW * (1 - TRAP_MARGIN))
    K = nehari_K(grid, state.u)
    if inside and not K > 0:
        raise AssertionError(f"trapped state with K = {K:.3g} <= 0")
    return TrapReport(E, grad, gW, EW, inside, K, kinetic_J(grid, state.u),
                      etilde(grid, state, alpha, variant))
