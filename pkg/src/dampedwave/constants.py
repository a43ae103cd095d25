"""Closed-form constants against independent quadrature.

Every row compares a closed-form value with an adaptive quadrature of the
defining integral on ``(0, inf)`` in the radial measure ``r^(D-1) dr``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate

from .bubbles import (bracket_constant, dilation_W, dilation_dilation_W, fprime,
                      ground_state, lambda_w_l2sq_exact, lambda_w_l2sq_reduced,
                      truncated_lambda_w_l2sq)

__all__ = ["ConstantRow", "verify_constants", "format_table", "REL_TOL", "SUPPORTED_DIMS"]

REL_TOL = 1e-4
SUPPORTED_DIMS = (4, 5, 6, 7)
_BREAKS = [1.0, 10.0, 100.0, 1000.0]


@dataclass(frozen=True)
class ConstantRow:
    name: str
    closed_form: float
    quadrature: float
    error: float
    tolerance: float
    kind: str = "relative"

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)


def _radial_quad(fn, D):
    """``int_0^inf fn(r) r^(D-1) dr`` split at a few decades."""
    total = 0.0
    edges = [0.0] + _BREAKS + [np.inf]
    with warnings.catch_warnings():
        # the far tail is tiny; quad's roundoff notice there is harmless
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            total += integrate.quad(lambda r: fn(r) * r ** (D - 1), a, b, limit=400,
                                    epsabs=0.0, epsrel=1e-13)[0]
    return total


def _rel(a, b):
    return abs(a - b) / abs(b)


def _log_slope(D, radii=(1e3, 1e4, 1e5, 1e6)):
    vals = [truncated_lambda_w_l2sq(D, R) for R in radii]
    return float(np.polyfit(np.log(radii), vals, 1)[0])


def verify_constants(D):
    """Rows for the bracket constant, ``||Lambda W||^2``, ``omega^2`` and the
    ``<underline-Lambda Lambda W, Lambda W>`` pairing in dimension ``D``.

    ``||Lambda W||^2`` appears twice: the reduced closed form (missing a
    factor ``Gamma(1 + D/2)``) and the exact Beta-integral value.  For
    ``D = 4`` the norm diverges and is replaced by the slope of the truncated
    norm against ``log R``.
    """
    if D not in SUPPORTED_DIMS:
        raise ValueError(f"D must be one of {SUPPORTED_DIMS}")
    rows = []
    C = bracket_constant(D)
    C_q = -_radial_quad(lambda r: fprime(D, ground_state(D, r)) * dilation_W(D, r), D)
    rows.append(ConstantRow("bracket C_D", C, C_q, _rel(C_q, C), REL_TOL))

    lw2_q = None
    if D >= 5:
        lw2_q = _radial_quad(lambda r: dilation_W(D, r) ** 2, D)
        reduced = lambda_w_l2sq_reduced(D)
        exact = lambda_w_l2sq_exact(D)
        rows.append(ConstantRow("||LW||^2 (reduced)", reduced, lw2_q, _rel(lw2_q, reduced),
                                REL_TOL))
        rows.append(ConstantRow("||LW||^2 (exact)", exact, lw2_q, _rel(lw2_q, exact), REL_TOL))
        rows.append(ConstantRow("omega^2 (reduced)", C / reduced, C_q / lw2_q,
                                _rel(C_q / lw2_q, C / reduced), REL_TOL))
        rows.append(ConstantRow("omega^2 (exact)", C / exact, C_q / lw2_q,
                                _rel(C_q / lw2_q, C / exact), REL_TOL))
    else:
        slope = _log_slope(D)
        rows.append(ConstantRow("||LW||^2 log-slope", 16.0, slope, _rel(slope, 16.0), 0.05))

    pairing = _radial_quad(lambda r: dilation_dilation_W(D, r) * dilation_W(D, r), D)
    if D == 4:
        rows.append(ConstantRow("<LLW, LW>", 32.0, pairing, _rel(pairing, 32.0), 0.01))
    else:
        lw_norm = math.sqrt(lw2_q)
        llw_norm = math.sqrt(_radial_quad(lambda r: dilation_dilation_W(D, r) ** 2, D))
        rows.append(ConstantRow("<LLW, LW>", 0.0, pairing, abs(pairing),
                                REL_TOL * lw_norm * llw_norm, kind="absolute"))
    return rows


def format_table(D, rows):
    lines = [f"constants for D = {D}",
             f"{'quantity':<22}{'closed form':>18}{'quadrature':>18}{'error':>12}"
             f"{'tol':>10}  status"]
    for row in rows:
        lines.append(f"{row.name:<22}{row.closed_form:>18.10g}{row.quadrature:>18.10g}"
                     f"{row.error:>12.3e}{row.tolerance:>10.1e}  "
                     f"{'PASS' if row.passed else 'FAIL'}")
    return "\n".join(lines)
