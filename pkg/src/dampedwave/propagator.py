"""Exact free evolution of the damped linear wave equation.

Frequencies come from the eigendecomposition of the symmetrised grid Laplacian
(a discrete Hankel transform matched to the grid), so the evolution below is
the exact solution of the semi-discrete linear system.

With ``K(t, xi) = exp(-alpha t/2) L(t, xi)`` the solution of
``u_tt + alpha u_t - Lap u = 0`` is

    u_hat(t)    = dK/dt u0_hat + K (u1_hat + alpha u0_hat)
    udot_hat(t) = -xi^2 K u0_hat + dK/dt u1_hat
"""
from __future__ import annotations

from dataclasses import dataclass
import functools

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grid import FieldPair, GridError

__all__ = [
    "multiplier_L",
    "multiplier_K",
    "MultiplierEval",
    "RadialTransform",
    "transform_for",
    "AliasingError",
    "free_evolve",
    "low_frequency_cutoff",
    "DecayFit",
    "measure_decay",
]

SERIES_CUTOFF = 1e-3
TAIL_TOL = 1e-6


class AliasingError(GridError):
    """Too much of the data sits near the grid's highest frequencies."""


def _shc(z):
    """``(sinh(sqrt z)/sqrt z, cosh(sqrt z))`` continued to ``z < 0``."""
    z = np.asarray(z, dtype=float)
    S = np.empty_like(z)
    C = np.empty_like(z)
    small = np.abs(z) < SERIES_CUTOFF
    zs = z[small]
    S[small] = 1 + zs / 6 * (1 + zs / 20 * (1 + zs / 42 * (1 + zs / 72)))
    C[small] = 1 + zs / 2 * (1 + zs / 12 * (1 + zs / 30 * (1 + zs / 56)))
    pos = (~small) & (z > 0)
    neg = (~small) & (z < 0)
    sp = np.sqrt(z[pos])
    S[pos] = np.sinh(sp) / sp
    C[pos] = np.cosh(sp)
    sn = np.sqrt(-z[neg])
    S[neg] = np.sin(sn) / sn
    C[neg] = np.cos(sn)
    return S, C


def _damped_parts(alpha, t, xi):
    """``exp(-alpha t/2) * (L, dL/dt)`` evaluated without overflow."""
    alpha = float(alpha)
    t = np.asarray(t, dtype=float)
    xi = np.abs(np.asarray(xi, dtype=float))
    t, xi = np.broadcast_arrays(t, xi)
    s2 = alpha * alpha / 4.0 - xi * xi
    z = t * t * s2
    L = np.empty(z.shape)
    Ld = np.empty(z.shape)
    big = z > 4.0  # sinh branch far from the removable point
    sm = ~big
    S, C = _shc(z[sm])
    damp = np.exp(-alpha * t[sm] / 2.0)
    L[sm] = damp * t[sm] * S
    Ld[sm] = damp * C
    s = np.sqrt(s2[big])
    tb = t[big]
    ep = np.exp(tb * (s - alpha / 2.0))
    em = np.exp(-tb * (s + alpha / 2.0))
    L[big] = (ep - em) / (2.0 * s)
    Ld[big] = (ep + em) / 2.0
    return L, Ld


def multiplier_L(alpha, t, xi):
    """``L(t, xi)`` including the ``exp(-alpha t/2)`` prefactor (that is, ``K``).

    ``sinh(t s)/s`` with ``s = sqrt(alpha^2/4 - xi^2)`` below the branch point
    ``|xi| = alpha/2``, ``sin(t w)/w`` above it, and ``t`` on it.
    """
    return _damped_parts(alpha, t, xi)[0]


multiplier_K = multiplier_L


@dataclass(frozen=True)
class MultiplierEval:
    alpha: float
    t: float
    xi: float
    value: float
    dt_value: float

    @classmethod
    def at(cls, alpha, t, xi):
        L, Ld = _damped_parts(alpha, t, xi)
        K = float(L)
        return cls(alpha, t, xi, K, float(Ld) - alpha / 2.0 * K)


class RadialTransform:
    """Orthonormal eigenbasis of ``-Lap`` (Dirichlet at ``r_max``) on a grid.

    ``forward(u)`` gives coefficients ``Q^T V^(1/2) u``; ``xi = sqrt(eigenvalue)``.
    """

    def __init__(self, grid):
        self.grid = grid
        V = grid.weights
        A = np.append(grid.face_coeff, grid.outer_coeff)
        Am = np.concatenate(([0.0], grid.face_coeff))
        mu, Q = eigh_tridiagonal((A + Am) / V, -grid.face_coeff / np.sqrt(V[:-1] * V[1:]))
        self.mu = np.clip(mu, 0.0, None)
        self.xi = np.sqrt(self.mu)
        self.Q = Q
        self.sqrtV = np.sqrt(V)

    def forward(self, u):
        return self.Q.T @ (self.sqrtV * np.asarray(u, dtype=float))

    def inverse(self, c):
        return (self.Q @ c) / self.sqrtV

    def tail_fraction(self, f, frac=0.5):
        """Share of ``sum(mu u_hat^2 + udot_hat^2)`` above ``frac * xi_max``."""
        a, b = self.forward(f.u), self.forward(f.udot)
        dens = self.mu * a * a + b * b
        total = dens.sum()
        if total == 0.0:
            return 0.0
        return float(dens[self.xi > frac * self.xi[-1]].sum() / total)


@functools.lru_cache(maxsize=8)
def _cached_transform(D, faces_bytes, kind, params):
    from .grid import RadialGrid
    faces = np.frombuffer(faces_bytes, dtype=float)
    return RadialTransform(RadialGrid(D, faces, kind, dict(params)))


def transform_for(grid):
    """Shared :class:`RadialTransform` for ``grid`` (cached by grid content)."""
    return _cached_transform(grid.D, grid.faces.tobytes(), grid.kind,
                             tuple(sorted(grid.params.items())))


def free_evolve(grid, f, alpha, t, check_aliasing=True):
    """Evolve ``f`` by the free damped flow for time ``t``.

    Raises :class:`AliasingError` if more than ``1e-6`` of the data's energy
    sits in the upper half of the grid's frequency band.
    """
    tr = transform_for(grid)
    if check_aliasing and tr.tail_fraction(f) > TAIL_TOL:
        raise AliasingError("data not resolved: spectral tail above 1e-6 of total")
    a, b = tr.forward(f.u), tr.forward(f.udot)
    K, Ld = _damped_parts(alpha, t, tr.xi)
    Kd = Ld - alpha / 2.0 * K
    u_hat = Kd * a + K * (b + alpha * a)
    ud_hat = -tr.mu * K * a + Kd * b
    return FieldPair(tr.inverse(u_hat), tr.inverse(ud_hat))


def low_frequency_cutoff(grid, u, xi_max=1.0):
    """Apply a smooth cutoff equal to 1 for ``xi <= xi_max/2`` and 0 above ``xi_max``."""
    tr = transform_for(grid)
    x = np.clip((tr.xi - xi_max / 2.0) / (xi_max / 2.0), 0.0, 1.0)
    chi = 1.0 - x**3 * (10 - 15 * x + 6 * x * x)
    return tr.inverse(chi * tr.forward(u))


@dataclass
class DecayFit:
    slope: float
    residual: float
    times: np.ndarray
    norms: np.ndarray

    @property
    def reliable(self):
        return self.residual <= 0.1


def _lp_norm(grid, u, p):
    if np.isinf(p):
        return float(np.max(np.abs(u)))
    return float(grid.integrate(np.abs(u) ** p) ** (1.0 / p))


def measure_decay(grid, alpha, q, p, data, times=None, envelope=False):
    """Fit the slope of ``log ||D(t) g||_p / ||g||_q`` against ``log t``.

    ``D(t) g`` is the free solution with data ``(0, g)``.  With ``envelope``
    the fit is of ``log`` norm against ``t`` (exponential envelope) using the
    running maximum over the remaining times, which removes oscillation.
    Returns a :class:`DecayFit`; ``reliable`` is false when the rms residual
    of the fit exceeds 0.1.
    """
    if times is None:
        times = np.geomspace(10.0, 100.0, 24)
    times = np.asarray(times, dtype=float)
    tr = transform_for(grid)
    b = tr.forward(data)
    gq = _lp_norm(grid, data, q)
    K = multiplier_L(alpha, times[:, None], tr.xi[None, :])
    norms = np.array([_lp_norm(grid, tr.inverse(Kt * b), p) for Kt in K]) / gq
    if envelope:
        env = np.maximum.accumulate(norms[::-1])[::-1]
        x, y = times, np.log(env)
    else:
        x, y = np.log(times), np.log(norms)
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    return DecayFit(float(coef[0]), resid, times, norms)
