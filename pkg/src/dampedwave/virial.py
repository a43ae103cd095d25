"""Cutoffs, the truncated potential q, localized virial operators and virial identities.

Virial functionals (``chi_rho = chi(r/rho)``)::

    V1 = <u_t | chi_rho r u_r>,   V2 = <u_t | chi_rho u>

obey, for a solution of the damped equation and a moving radius ``rho(t)``::

    V1' = -D/2 int u_t^2 chi + (D-2)/2 int (u_r^2 - |u|^(p+1)) chi - alpha V1 + Omega1
    V2' =      int u_t^2 chi -         int (u_r^2 - |u|^(p+1)) chi - alpha V2 + Omega2

with (``(r chi')`` evaluated at ``r/rho``)::

    Omega1 = -(rho'/rho) int u_t r u_r (r chi') - ½ int (u_t^2 + u_r^2)(r chi')
             - (D-2)/(2D) int |u|^(p+1) (r chi')
    Omega2 = -(rho'/rho) int u_t u (r chi') - int u_r (u/r) (r chi')

The combinations ``V1 + (D-2)/2 V2`` and ``V1 + D/2 V2`` follow.  With
``nonlinear=False`` the ``|u|^(p+1)`` terms are dropped (free flow).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .grid import radial_derivative

__all__ = [
    "Cutoff",
    "TruncatedQ",
    "QConstructionError",
    "build_q",
    "virial_ops",
    "VARIANTS",
    "virial_value",
    "virial_rhs",
    "omega_errors",
    "virial_identity_residual",
    "central_derivative",
]


# -- cutoff -----------------------------------------------------------------

def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _smoothstep5_d(x):
    x = np.clip(x, 0.0, 1.0)
    return 30.0 * x * x * (1.0 - x) ** 2


@dataclass(frozen=True)
class Cutoff:
    """``chi = 1`` on ``[0, 1]``, ``0`` on ``[2, inf)``, quintic (C^2) in between."""

    def chi(self, x):
        return 1.0 - _smoothstep5(np.asarray(x, dtype=float) - 1.0)

    def dchi(self, x):
        return -_smoothstep5_d(np.asarray(x, dtype=float) - 1.0)

    def rdchi(self, x):
        """``x chi'(x)``."""
        x = np.asarray(x, dtype=float)
        return x * self.dchi(x)

    def scaled(self, r, rho):
        """``(chi(r/rho), (r chi')(r/rho))``."""
        x = np.asarray(r) / rho
        return self.chi(x), self.rdchi(x)


CUTOFF = Cutoff()


# -- truncated q ------------------------------------------------------------

def _nonic(x):
    """C^4 smoothstep ``126x^5 - 420x^6 + 540x^7 - 315x^8 + 70x^9`` on [0, 1]."""
    x = np.clip(x, 0.0, 1.0)
    return x**5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))


def _nonic_derivs(x):
    """First three derivatives of :func:`_nonic` (zero outside [0, 1])."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.0)
    base = xi**2 * (1 - xi) ** 2
    d1 = 630.0 * base * xi**2 * (1 - xi) ** 2
    # d/dx of 630 x^4 (1-x)^4 = 2520 x^3 (1-x)^3 (1 - 2x)
    d2 = 2520.0 * xi**3 * (1 - xi) ** 3 * (1 - 2 * xi)
    # derivative of 2520 x^3(1-x)^3(1-2x)
    d3 = 2520.0 * xi**2 * (1 - xi) ** 2 * (3 * (1 - xi) * (1 - 2 * xi) - 3 * xi * (1 - 2 * xi)
                                           - 2 * xi * (1 - xi))
    return np.where(inside, d1, 0.0), np.where(inside, d2, 0.0), np.where(inside, d3, 0.0)


_GRID01 = np.linspace(0.0, 1.0, 20001)
_M = tuple(float(np.max(np.abs(d))) for d in _nonic_derivs(_GRID01))


class QConstructionError(ValueError):
    """A property of the truncated potential fails on the grid."""

    def __init__(self, index, detail):
        super().__init__(f"property ({index}) violated: {detail}")
        self.index = index


class TruncatedQ:
    """Truncation of ``r^2/2`` built from ``q'(r) = r s(log r)``.

    ``s = 1`` on ``[1/R, R]``, ``s = 0`` outside ``[1/Rt, Rt]`` with
    ``Rt = R exp(w)``; the transitions are the C^4 nonic smoothstep in ``log r``
    over width ``w = K/c``.  ``K`` is the smallest value for which the
    derivative bounds guarantee ``Delta q >= -c``, ``|Delta^2 q| <= c r^-2`` and
    ``|(q'/r)'| <= c/r``.
    """

    def __init__(self, D, c, R):
        if c <= 0 or R <= 1:
            raise ValueError("need c > 0 and R > 1")
        self.D, self.c, self.R = int(D), float(c), float(R)
        m1, m2, m3 = _M

        def excess(K):
            return D * (D - 2) * m1 / K + (2 * D - 2) * m2 * c / K**2 + m3 * c * c / K**3 - 1.0

        K = brentq(excess, 1e-6, 1e9)
        self.K = max(K, m1) * (1 + 1e-9)
        self.width = self.K / c
        self.log_R = math.log(R)
        self.log_R_tilde = self.log_R + self.width
        self.R_tilde = math.exp(self.log_R_tilde) if self.log_R_tilde < 700 else math.inf
        self._glx, self._glw = np.polynomial.legendre.leggauss(48)

    # s and its log-derivatives -------------------------------------------
    def _s_derivs(self, r):
        x = np.log(np.asarray(r, dtype=float))
        a, w = self.log_R, self.width
        up = (x - a) / w
        dn = (-a - x) / w
        s = 1.0 - _nonic(up) - _nonic(dn)
        u1, u2, u3 = _nonic_derivs(up)
        d1, d2, d3 = _nonic_derivs(dn)
        sx = -u1 / w + d1 / w
        sxx = -u2 / w**2 - d2 / w**2
        sxxx = -u3 / w**3 + d3 / w**3
        return s, sx, sxx, sxxx

    def dq(self, r):
        r = np.asarray(r, dtype=float)
        return r * self._s_derivs(r)[0]

    def d2q(self, r):
        s, sx, _, _ = self._s_derivs(r)
        return s + sx

    def lap(self, r):
        """``Delta q = D s + s_x``."""
        s, sx, _, _ = self._s_derivs(r)
        return self.D * s + sx

    def lap2(self, r):
        """``Delta^2 q = r^-2 (D(D-2) s_x + (2D-2) s_xx + s_xxx)``."""
        r = np.asarray(r, dtype=float)
        _, sx, sxx, sxxx = self._s_derivs(r)
        D = self.D
        return (D * (D - 2) * sx + (2 * D - 2) * sxx + sxxx) / r**2

    def dq_over_r_prime(self, r):
        """``(q'/r)' = s_x / r``."""
        r = np.asarray(r, dtype=float)
        return self._s_derivs(r)[1] / r

    def q(self, r):
        """``q`` with ``q = r^2/2`` on the plateau (Gauss-Legendre in ``log r``)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = 0.5 * r * r
        hi = r > self.R
        lo = r < 1.0 / self.R
        if hi.any():
            out[hi] = 0.5 * self.R**2 + self._int_log(self.log_R, np.log(r[hi]))
        if lo.any():
            out[lo] = 0.5 / self.R**2 - self._int_log(np.log(r[lo]), -self.log_R)
        return out

    def _int_log(self, a, b):
        # int_a^b e^{2x} s(e^x) dx, clipped to the support of s
        a = np.clip(np.broadcast_to(a, np.shape(b)), -self.log_R_tilde, self.log_R_tilde)
        b = np.clip(b, -self.log_R_tilde, self.log_R_tilde)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid[..., None] + half[..., None] * self._glx
        vals = np.exp(2 * x) * self._s_derivs(np.exp(x))[0]
        return half * np.sum(vals * self._glw, axis=-1)

    def samples(self, grid):
        r = grid.r
        return {"q": self.q(r), "dq": self.dq(r), "d2q": self.d2q(r),
                "lap": self.lap(r), "lap2": self.lap2(r)}

    def check(self, grid, tol=1e-9):
        """Assert properties (i)-(vi) on ``grid``; raise :class:`QConstructionError`."""
        r = grid.r
        c = self.c
        plateau = (r >= 1 / self.R) & (r <= self.R)
        if plateau.any():
            err = np.max(np.abs(self.q(r[plateau]) - 0.5 * r[plateau] ** 2))
            if err > tol * max(1.0, self.R**2):
                raise QConstructionError(1, f"q differs from r^2/2 by {err:.3g} on the plateau")
        outside = (r >= self.R_tilde) | (r <= 1 / self.R_tilde)
        if outside.any() and np.max(np.abs(self.dq(r[outside]))) > 0:
            raise QConstructionError(2, "q' nonzero beyond R_tilde")
        if np.any(np.abs(self.dq(r)) > r * (1 + tol)) or np.any(np.abs(self.d2q(r)) > 2.0):
            raise QConstructionError(3, "|q'| <= r or |q''| <= 2 fails")
        if np.min(self.lap(r)) < -c * (1 + tol):
            raise QConstructionError(4, f"min Delta q = {np.min(self.lap(r)):.3g} < -c")
        if np.any(np.abs(self.lap2(r)) * r**2 > c * (1 + tol)):
            raise QConstructionError(5, "|Delta^2 q| r^2 > c")
        if np.any(np.abs(self.dq_over_r_prime(r)) * r > c * (1 + tol)):
            raise QConstructionError(6, "|(q'/r)'| r > c")
        return True


def build_q(c, R, grid):
    """Construct :class:`TruncatedQ` for ``grid.D`` and check all properties on ``grid``."""
    tq = TruncatedQ(grid.D, c, R)
    tq.check(grid)
    return tq


def virial_ops(q, lam, grid, g, boundary_value=0.0):
    """``(A(lam) g, A_(lam) g)``.

    ``A g = q'(r/lam) g_r + (D-2)/(2D) (1/lam) Delta q(r/lam) g`` and the
    underlined operator uses ``1/(2 lam)`` in place of ``(D-2)/(2D lam)``.
    """
    g = np.asarray(g, dtype=float)
    x = grid.r / lam
    transport = q.dq(x) * radial_derivative(grid, g, boundary_value)
    lap = q.lap(x) * g / lam
    D = grid.D
    return transport + (D - 2) / (2 * D) * lap, transport + 0.5 * lap


# -- virial functionals -----------------------------------------------------

VARIANTS = {"V1": None, "V2": None, "identity3": "(D-2)/2", "identity4": "D/2"}


def _weight(D, variant):
    if variant == "identity3":
        return (D - 2) / 2.0
    if variant == "identity4":
        return D / 2.0
    raise ValueError(f"unknown virial variant {variant!r}")


def virial_value(grid, state, rho, variant="identity3", cutoff=CUTOFF,
                 alpha=0.0, t=None, T0=None):
    """``<u_t | chi_rho (r u_r + w u)>`` for the chosen ``variant``.

    ``V1``: ``w = 0`` with no ``u`` term; ``V2``: only the ``u`` term;
    ``identity3``: ``w = (D-2)/2``; ``identity4``: ``w = D/2``.  If ``T0`` is
    given the value is multiplied by ``exp(alpha (t - T0))``.
    """
    chi, _ = cutoff.scaled(grid.r, rho)
    ur = radial_derivative(grid, state.u)
    if variant == "V1":
        mult = grid.r * ur
    elif variant == "V2":
        mult = state.u
    else:
        mult = grid.r * ur + _weight(grid.D, variant) * state.u
    val = grid.integrate(state.udot * chi * mult)
    if T0 is not None:
        val *= math.exp(alpha * (t - T0))
    return val


def _pieces(grid, state, rho, rho_prime, cutoff, nonlinear):
    D = grid.D
    r = grid.r
    chi, rchi = cutoff.scaled(r, rho)
    u, ut = state.u, state.udot
    ur = radial_derivative(grid, u)
    pot = np.abs(u) ** (2.0 * D / (D - 2)) if nonlinear else np.zeros_like(u)
    I = grid.integrate
    kin = I(ut * ut * chi)
    grad = I(ur * ur * chi)
    P = I(pot * chi)
    rr = rho_prime / rho
    om1 = (-rr * I(ut * r * ur * rchi) - 0.5 * I((ut * ut + ur * ur) * rchi)
           - (D - 2) / (2.0 * D) * I(pot * rchi))
    om2 = -rr * I(ut * u * rchi) - I(ur * u / r * rchi)
    return kin, grad, P, om1, om2


def omega_errors(grid, state, rho, rho_prime=0.0, cutoff=CUTOFF, nonlinear=True):
    """``(Omega1, Omega2)`` for cutoff radius ``rho`` moving at ``rho_prime``."""
    _, _, _, om1, om2 = _pieces(grid, state, rho, rho_prime, cutoff, nonlinear)
    return om1, om2


def virial_rhs(grid, state, rho, rho_prime, variant, alpha, cutoff=CUTOFF, nonlinear=True):
    """Right-hand side of the identity for ``d/dt virial_value(variant)``."""
    D = grid.D
    kin, grad, P, om1, om2 = _pieces(grid, state, rho, rho_prime, cutoff, nonlinear)
    V = virial_value(grid, state, rho, variant, cutoff)
    if variant == "V1":
        return -D / 2 * kin + (D - 2) / 2 * (grad - P) - alpha * V + om1
    if variant == "V2":
        return kin - (grad - P) - alpha * V + om2
    if variant == "identity3":
        return -kin - alpha * V + om1 + (D - 2) / 2 * om2
    if variant == "identity4":
        return -(grad - P) - alpha * V + om1 + D / 2 * om2
    raise ValueError(f"unknown virial variant {variant!r}")


def central_derivative(times, values):
    """Fourth-order central differences on a uniform time grid (interior points)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    dt = t[1] - t[0]
    d = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    return t[2:-2], d


@dataclass
class VirialResidual:
    times: np.ndarray
    dVdt: np.ndarray
    rhs: np.ndarray
    V: np.ndarray

    @property
    def residual(self):
        return np.abs(self.dVdt - self.rhs)

    @property
    def relative(self):
        """``max |dV/dt - RHS| / max |V|``."""
        return float(self.residual.max() / np.max(np.abs(self.V)))


def virial_identity_residual(traj, rho, variant="identity3", rho_prime=None,
                             cutoff=CUTOFF, nonlinear=True):
    """Residual of a virial identity along a trajectory.

    ``rho`` is a number or a callable ``rho(t)``; ``rho_prime`` its derivative
    (defaults to 0 for a constant).  ``dV/dt`` uses fourth-order central
    differences at the sampling cadence.
    """
    rho_f = rho if callable(rho) else (lambda t, r0=float(rho): r0)
    if rho_prime is None:
        rho_prime = lambda t: 0.0  # noqa: E731
    grid, alpha = traj.grid, traj.alpha
    times = np.asarray(traj.times)
    V = np.array([virial_value(grid, st, rho_f(t), variant, cutoff) for t, st in traj.states()])
    tc, dV = central_derivative(times, V)
    rhs = np.array([virial_rhs(grid, traj.state(k), rho_f(times[k]), rho_prime(times[k]),
                               variant, alpha, cutoff, nonlinear)
                    for k in range(2, len(times) - 2)])
    return VirialResidual(tc, dV, rhs, V)
