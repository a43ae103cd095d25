"""Radial simulator and diagnostics for the damped energy-critical focusing wave equation

    u_tt - Lap u + alpha u_t = |u|^(4/(D-2)) u,   u = u(t, r).
"""
from .grid import (FieldPair, GridError, RadialGrid, energy_norm, laplacian_radial,
                   nonlinear_energy, radial_derivative)
from .bubbles import (BubbleFamily, ClosedFormConstants, fprime, ground_state,
                      interaction_term, lambda_W, lambda_generators, multibubble,
                      nonlinearity, closed_form_constants)

__version__ = "0.1.0"

__all__ = [
    "FieldPair", "GridError", "RadialGrid", "energy_norm", "laplacian_radial",
    "nonlinear_energy", "radial_derivative", "BubbleFamily", "ClosedFormConstants",
    "fprime", "ground_state", "interaction_term", "lambda_W", "lambda_generators",
    "multibubble", "nonlinearity", "closed_form_constants",
]
