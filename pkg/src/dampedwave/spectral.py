"""Linearised operator about a bubble, its negative mode, and the forms built on it.

The discrete operator ``-Lap - f'(W_lam)`` is symmetric in the weighted inner
product, so ``V^(1/2) L V^(-1/2)`` is a symmetric tridiagonal matrix and the
low end of its spectrum comes from a banded eigensolver.
"""
from __future__ import annotations

from dataclasses import dataclass
import json
import math
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .bubbles import dilation_W, fprime, lambda_W, multibubble_profile
from .grid import FieldPair, GridError, RadialGrid, gradient_sq, laplacian_radial

__all__ = [
    "ResolutionError",
    "SpectralError",
    "LinearizedOperator",
    "linearized_operator",
    "negative_mode",
    "richardson",
    "SpectralPack",
    "build_pack",
    "load_or_build_pack",
    "alpha_forms",
    "choose_Z",
    "coercivity_form",
    "bump",
    "pair",
]

NEG_TOL = 1e-3          # eigenvalues below -NEG_TOL * kappa^2 count as negative
SPECTRAL_RMAX = 50.0


class ResolutionError(GridError):
    """The grid does not resolve the bubble scale."""


class SpectralError(RuntimeError):
    """The discrete spectrum is inconsistent with a single negative mode."""


class LinearizedOperator:
    """``L_lam = -Lap - f'(W_lam)`` on ``grid`` (Dirichlet at ``r_max``)."""

    def __init__(self, grid, lam=1.0, min_nodes_per_unit=8):
        if lam <= 0:
            raise ValueError("scale must be positive")
        core = grid.spacing[grid.r < 4.0 * lam]
        h_core = float(core.max()) if core.size else grid.h
        if h_core > lam / min_nodes_per_unit:
            raise ResolutionError(
                f"spacing {h_core:.3g} does not resolve scale {lam:g} "
                f"({min_nodes_per_unit} nodes per unit of lambda required)")
        self.grid = grid
        self.lam = float(lam)
        self.potential = fprime(grid.D, lambda_W(grid.D, lam, grid.r))
        V = grid.weights
        A = np.append(grid.face_coeff, grid.outer_coeff)
        Am = np.concatenate(([0.0], grid.face_coeff))
        self.diag = (A + Am) / V - self.potential
        self.off = -grid.face_coeff / np.sqrt(V[:-1] * V[1:])

    def __call__(self, u):
        return -laplacian_radial(self.grid, u) - self.potential * np.asarray(u)

    apply = __call__

    def lowest(self, k=2):
        """Lowest ``k`` eigenvalues and weighted-orthonormal eigenvectors."""
        w, v = eigh_tridiagonal(self.diag, self.off, select="i", select_range=(0, k - 1))
        return w, v / np.sqrt(self.grid.weights)[:, None]

    def count_below(self, level):
        w = eigh_tridiagonal(self.diag, self.off, eigvals_only=True,
                             select="v", select_range=(-np.inf, level))
        return int(w.size)


def linearized_operator(grid, lam=1.0, min_nodes_per_unit=8):
    return LinearizedOperator(grid, lam, min_nodes_per_unit)


def negative_mode(grid, lam=1.0):
    """``(kappa, Y)`` with ``L Y = -kappa^2 Y``, ``||Y|| = 1`` and ``Y(0) > 0``.

    Raises :class:`SpectralError` unless exactly one eigenvalue lies below
    ``-NEG_TOL * kappa^2`` or if ``Y`` fails to decay.
    """
    op = LinearizedOperator(grid, lam)
    w, v = op.lowest(2)
    if w[0] >= 0:
        raise SpectralError("no negative eigenvalue found")
    kappa = math.sqrt(-w[0])
    n_neg = op.count_below(-NEG_TOL * kappa**2)
    if n_neg != 1:
        raise SpectralError(f"{n_neg} negative eigenvalues; expected exactly one")
    Y = v[:, 0] * np.sign(v[0, 0])
    far = (grid.r > 10.0 * lam) & (np.abs(Y) > 1e-200)
    if far.sum() > 4:
        slope = np.polyfit(grid.r[far], np.log(np.abs(Y[far])), 1)[0]
        if slope >= 0:
            raise SpectralError("negative mode does not decay")
    return kappa, Y


def richardson(values, hs, order=2):
    """Extrapolate ``values(h) = v0 + c h^order`` from the last two entries."""
    (h1, h2), (v1, v2) = hs[-2:], values[-2:]
    q = (h1 / h2) ** order
    return (q * v2 - v1) / (q - 1.0)


def bump(r, a, b):
    """Smooth bump supported in ``[a, b]``, peak 1 at the midpoint."""
    r = np.asarray(r, dtype=float)
    x = (2.0 * r - a - b) / (b - a)
    out = np.zeros_like(r)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


Z_BUMPS = ((0.5, 3.0), (6.0, 12.0))


@dataclass
class SpectralPack:
    """Negative mode of ``L`` computed on a reference grid.

    ``Y`` is stored on ``r`` (with ``||Y|| = 1`` there) and evaluated elsewhere
    by a cubic spline, zero beyond the reference radius (``|Y| < 1e-10`` there).

    ``z_bumps`` are the supports of the two bumps forming ``Z`` for ``D <= 6``.
    The first sits where ``Lambda W > 0``, the second beyond its zero at
    ``sqrt(D(D-2))``, so the two contributions to ``<Z, Lambda W>`` add
    instead of cancelling (normalised pairing about 0.5 for ``D = 6``).
    """

    D: int
    kappa: float
    r: np.ndarray
    Y: np.ndarray
    grid_spec: dict
    z_bumps: tuple = Z_BUMPS

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        ext_r = np.concatenate(([-self.r[0]], self.r))
        ext_Y = np.concatenate(([self.Y[0]], self.Y))
        self._spline = CubicSpline(ext_r, ext_Y)

    # -- profiles ---------------------------------------------------------
    def Y_profile(self, r):
        r = np.asarray(r, dtype=float)
        out = self._spline(np.clip(r, 0.0, None))
        return np.where(r > self.r[-1], 0.0, out)

    def Y_on(self, grid, lam=1.0, l2=False):
        """``Y_lam`` (energy scaling) or, with ``l2``, the L2-invariant ``Y_lam``.

        Renormalised so that ``||Y_lam_|| = 1`` in the quadrature of ``grid``.
        """
        y = self.Y_profile(grid.r / lam)
        y = y / grid.norm_l2(y)
        return y if l2 else lam * y

    def Y_pairs(self, grid, lam=1.0):
        """``(Y^-_lam, Y^+_lam) = ((Y_lam/kappa, -Y_lam_), (Y_lam/kappa, Y_lam_))``."""
        y = self.Y_on(grid, lam) / self.kappa
        yl = self.Y_on(grid, lam, l2=True)
        return FieldPair(y, -yl), FieldPair(y, yl)

    def Z_profile_on(self, grid):
        """Unscaled ``Z`` on ``grid`` (see :func:`choose_Z`)."""
        return choose_Z(self.D, self, grid)

    def Z_on(self, grid, lam=1.0):
        """L2-scaled ``Z_lam_ = lam^(-D/2) Z(r/lam)``.

        Orthogonality to ``Y`` is imposed in the scaled frame on ``grid``.
        """
        D = self.D
        if D >= 7:
            return lam ** (-D / 2.0) * dilation_W(D, grid.r / lam)
        (a0, b0), (a1, b1) = self.z_bumps
        s = grid.r / lam
        z0, z1 = bump(s, a0, b0), bump(s, a1, b1)
        y = self.Y_profile(s)
        denom = grid.inner(z1, y)
        if denom == 0.0:
            raise ResolutionError(f"grid does not sample Z at scale {lam:g}")
        c = grid.inner(z0, y) / denom
        z = z0 - c * z1
        if grid.inner(z, dilation_W(D, s)) < 0:
            z = -z
        return lam ** (-D / 2.0) * z

    # -- persistence ------------------------------------------------------
    def to_json(self):
        return {"D": self.D, "kappa": self.kappa, "r": self.r.tolist(),
                "Y": self.Y.tolist(), "grid": self.grid_spec,
                "z_bumps": [list(b) for b in self.z_bumps]}

    @classmethod
    def from_json(cls, data):
        return cls(int(data["D"]), float(data["kappa"]), data["r"], data["Y"],
                   dict(data["grid"]), tuple(tuple(b) for b in data["z_bumps"]))


def build_pack(D, N=2048, r_max=SPECTRAL_RMAX):
    """Compute the negative mode on a uniform reference grid."""
    if D < 4:
        raise ValueError("the negative mode is computed for D >= 4")
    grid = RadialGrid.uniform(D, N, r_max)
    kappa, Y = negative_mode(grid)
    return SpectralPack(D, kappa, grid.r.copy(), Y, grid.spec())


def _cache_name(D, N, r_max):
    return f"spectral_D{D}_N{N}_R{r_max:g}.json"


def load_or_build_pack(D, N=2048, r_max=SPECTRAL_RMAX, cache_dir=None):
    """:func:`build_pack` with an optional JSON cache keyed by ``(D, N, r_max)``."""
    if cache_dir is None:
        return build_pack(D, N, r_max)
    path = Path(cache_dir) / _cache_name(D, N, r_max)
    if path.exists():
        return SpectralPack.from_json(json.loads(path.read_text()))
    pack = build_pack(D, N, r_max)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(pack.to_json()))
    return pack


def alpha_forms(pack, grid, lam=1.0):
    """``(alpha^-_lam, alpha^+_lam)`` as FieldPairs acting by the weighted pairing.

    ``alpha^-+ = ½((kappa/lam) Y_lam_, -+Y_lam_)``; the ``1/lam`` makes
    ``<alpha^-+_lam, Y^-+_lam> = 1`` at every scale.
    """
    yl = pack.Y_on(grid, lam, l2=True)
    first = 0.5 * pack.kappa / lam * yl
    return FieldPair(first, -0.5 * yl), FieldPair(first, 0.5 * yl)


def pair(grid, a, b):
    """``<a, b>`` for FieldPairs: sum of the weighted pairings of both slots."""
    return grid.inner(a.u, b.u) + grid.inner(a.udot, b.udot)


def choose_Z(D, pack, grid):
    """Orthogonality profile ``Z`` on ``grid``.

    ``D >= 7``: ``Lambda W``.  ``D <= 6``: ``Z0 - c Z1`` with smooth bumps on
    the supports ``pack.z_bumps``, ``c`` fixed by ``<Z, Y> = 0``, sign chosen
    so that ``<Z, Lambda W> > 0``.
    """
    z = pack.Z_on(grid, 1.0)
    if grid.inner(z, dilation_W(D, grid.r)) <= 0:
        raise ValueError("Z construction failed to pair positively with Lambda W")
    return z


def coercivity_form(grid, fam, g):
    """``int [gdot^2 + g_r^2 - f'(W(iota, lambda)) g^2] r^(D-1) dr``."""
    W = multibubble_profile(grid, fam.iotas, fam.lambdas, closure=False)
    return (grid.inner(g.udot, g.udot) + gradient_sq(grid, g.u)
            - grid.inner(fprime(grid.D, W) * g.u, g.u))
