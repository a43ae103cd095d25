"""Proximity to multi-bubbles, static modulation and the derived parameters.

For signs ``iota`` and scales ``lambda`` the residual is
``g = (u - sum iota_j W_{lambda_j}, udot)``.  Scales are fixed by
``<Z_{lambda_j_}, g> = 0`` (one equation per bubble, solved by Gauss-Newton
in ``log lambda``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.signal import find_peaks

from .bubbles import dilation_W, multibubble_profile, closed_form_constants, scale_h1
from .grid import FieldPair, energy_norm
from .spectral import alpha_forms, pair
from .virial import CUTOFF, TruncatedQ, virial_ops

__all__ = [
    "FitFailure",
    "DegenerateFit",
    "ModulationState",
    "ModulationTrack",
    "detect_scales",
    "fit_modulation",
    "components",
    "proximity",
    "refined_params",
    "track",
    "growth_rate",
]

MAX_ITER = 50
ORTH_TOL = 1e-8


class FitFailure(RuntimeError):
    """Gauss-Newton did not converge."""


class DegenerateFit(FitFailure):
    """The Jacobian is singular (bubbles collide)."""


@dataclass
class ModulationState:
    iotas: tuple
    lambdas: np.ndarray
    g: FieldPair
    a_minus: np.ndarray
    a_plus: np.ndarray
    beta: np.ndarray | None
    xi: np.ndarray | None
    g_norm: float
    d_value: float
    orthogonality: float
    iterations: int
    status: str = "ok"


def detect_scales(grid, state, max_bubbles=4, prominence=0.2):
    """Candidate ``(iotas, lambdas)`` from peaks of ``|u| r^((D-2)/2)``.

    For a single bubble the profile peaks at ``r = lambda sqrt(D(D-2))``.
    Peaks lower than ``prominence`` times the highest are ignored.
    """
    D = grid.D
    prof = np.abs(state.u) * grid.r ** ((D - 2) / 2.0)
    top = prof.max()
    if top <= 0.0:
        return (), ()
    padded = np.concatenate(([0.0], prof, [0.0]))
    peaks, props = find_peaks(padded, prominence=prominence * top)
    peaks = peaks - 1
    if peaks.size == 0:
        return (), ()
    keep = peaks[np.argsort(props["prominences"])[::-1][:max_bubbles]]
    keep = np.sort(keep)
    lambdas = tuple(float(grid.r[k] / math.sqrt(D * (D - 2))) for k in keep)
    iotas = tuple(int(np.sign(state.u[k]) or 1) for k in keep)
    return iotas, lambdas


def _residual(grid, state, iotas, lambdas):
    W = multibubble_profile(grid, iotas, lambdas)
    return FieldPair(state.u - W, state.udot)


def proximity(grid, g, lambdas, D=None):
    """``d = sqrt(||g||_E^2 + sum (lambda_j/lambda_{j+1})^((D-2)/2))``."""
    D = D or grid.D
    lam = np.asarray(lambdas, dtype=float)
    sep = np.sum((lam[:-1] / lam[1:]) ** ((D - 2) / 2.0)) if lam.size > 1 else 0.0
    return math.sqrt(energy_norm(grid, g) ** 2 + sep)


def fit_modulation(grid, state, iotas, lambdas_init, pack, q=None, L=32.0,
                   refined=True, max_step=0.05, anchor=None, max_change=None):
    """Solve ``<Z_{lambda_j_}, g> = 0`` for the scales and fill all components.

    Newton steps are capped at ``max_step`` in ``log lambda``: the equation
    has spurious roots away from the modulation neighbourhood, so small
    steps keep the iteration on the branch of the initial guess.
    ``anchor``/``max_change`` impose a trust region: every ``lambda_j`` must
    stay within ``max_change`` relative distance of ``anchor_j``.
    """
    D = grid.D
    iotas = tuple(int(i) for i in iotas)
    M = len(iotas)
    if M == 0:
        g = FieldPair(state.u.copy(), state.udot.copy())
        return ModulationState((), np.zeros(0), g, np.zeros(0), np.zeros(0), None, None,
                               energy_norm(grid, g), proximity(grid, g, []), 0.0, 0)
    x = np.log(np.asarray(lambdas_init, dtype=float))
    lw = lambda lam: scale_h1(D, lambda s: dilation_W(D, s), lam, grid.r)  # noqa: E731
    it = 0
    for it in range(1, MAX_ITER + 1):
        lam = np.exp(x)
        if np.any(np.diff(lam) <= 0):
            raise DegenerateFit("scales lost their ordering")
        g = _residual(grid, state, iotas, lam)
        try:
            Zs = [pack.Z_on(grid, l) for l in lam]
        except ValueError as exc:
            raise FitFailure(str(exc)) from exc
        F = np.array([grid.inner(z, g.u) for z in Zs])
        J = np.array([[iotas[k] * grid.inner(Zs[j], lw(lam[k])) for k in range(M)]
                      for j in range(M)])
        if np.linalg.cond(J) > 1e12:
            raise DegenerateFit("modulation Jacobian is singular")
        dx = -np.linalg.solve(J, F)
        scale = np.max(np.abs(dx))
        if scale > max_step:
            dx *= max_step / scale
        x = x + dx
        if np.max(np.abs(dx)) < 1e-13 or np.all(np.abs(F) <= 1e-14 * np.abs(np.diag(J))):
            break
    else:
        raise FitFailure(f"no convergence in {MAX_ITER} iterations")
    lam = np.exp(x)
    if anchor is not None and max_change is not None:
        if np.any(np.abs(lam / np.asarray(anchor) - 1.0) > max_change):
            raise FitFailure("scale change exceeds the trust region")
    g = _residual(grid, state, iotas, lam)
    Zs = [pack.Z_on(grid, l) for l in lam]
    gn = grid.norm_l2(g.u)
    orth = max(abs(grid.inner(z, g.u)) / (grid.norm_l2(z) * gn) if gn > 0 else 0.0
               for z in Zs)
    am, ap = components(grid, g, lam, pack)
    beta = xi = None
    if refined and D >= 6:
        xi, beta = refined_params(grid, g, iotas, lam, q=q, L=L)
    return ModulationState(iotas, lam, g, am, ap, beta, xi, energy_norm(grid, g),
                           proximity(grid, g, lam), orth, it)


def components(grid, g, lambdas, pack):
    """``(a^-_j, a^+_j) = (<alpha^-_{lambda_j}, g>, <alpha^+_{lambda_j}, g>)``."""
    am = np.empty(len(lambdas))
    ap = np.empty(len(lambdas))
    for j, lam in enumerate(lambdas):
        fm, fp = alpha_forms(pack, grid, lam)
        am[j] = pair(grid, fm, g)
        ap[j] = pair(grid, fp, g)
    return am, ap


def _default_q(D):
    return TruncatedQ(D, c=1.0, R=10.0)


def refined_params(grid, g, iotas, lambdas, q=None, L=32.0):
    """``(xi, beta)`` for ``D >= 6``.

    ``beta_j = -(iota_j/N) <Lambda W_{lambda_j_}, gdot> - (1/N) <A_(lambda_j) g, gdot>``
    with ``N = ||Lambda W||^2``; ``xi_j = lambda_j`` for ``D >= 7`` and, for
    ``D = 6``, ``lambda_j - (iota_j/N) <chi(./(L lambda_j)) Lambda W_{lambda_j_}, g>``.
    """
    D = grid.D
    if D < 6:
        raise ValueError("refined modulation parameters are defined for D >= 6 only")
    q = q or _default_q(D)
    norm = closed_form_constants(D).lambdaW_L2sq_exact
    lam = np.asarray(lambdas, dtype=float)
    beta = np.empty(lam.size)
    xi = lam.copy()
    for j, l in enumerate(lam):
        lwl = l ** (-D / 2.0) * dilation_W(D, grid.r / l)
        _, Ag = virial_ops(q, l, grid, g.u)
        beta[j] = (-iotas[j] * grid.inner(lwl, g.udot) - grid.inner(Ag, g.udot)) / norm
        if D == 6:
            chi = CUTOFF.chi(grid.r / (L * l))
            xi[j] = l - iotas[j] / norm * grid.inner(chi * lwl, g.u)
    return xi, beta


@dataclass
class ModulationTrack:
    """Per-sample modulation states with re-detection events."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def append(self, t, st):
        if self.times and t <= self.times[-1]:
            raise ValueError("times must be strictly increasing")
        self.times.append(float(t))
        self.states.append(st)

    def series(self, name):
        return np.array([getattr(s, name) for s in self.states])

    def columns(self):
        M = max((len(s.iotas) for s in self.states), default=0)
        cols = ["t"] + [f"lambda_{j + 1}" for j in range(M)]
        cols += [f"a_minus_{j + 1}" for j in range(M)] + [f"a_plus_{j + 1}" for j in range(M)]
        cols += [f"beta_{j + 1}" for j in range(M)] + [f"xi_{j + 1}" for j in range(M)]
        return cols + ["g_norm", "d", "status"], M

    def rows(self):
        cols, M = self.columns()
        out = []
        for t, s in zip(self.times, self.states):
            def vec(v):
                v = [] if v is None else list(v)
                return v + [math.nan] * (M - len(v))
            out.append([t] + vec(s.lambdas) + vec(s.a_minus) + vec(s.a_plus)
                       + vec(s.beta) + vec(s.xi) + [s.g_norm, s.d_value, s.status])
        return cols, out

    def to_csv(self, path):
        cols, rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([x if isinstance(x, str) else f"{x:.17g}" for x in row])


def _failed_state(iotas, lambdas, grid, state, reason):
    g = _residual(grid, state, iotas, lambdas)
    nan = np.full(len(iotas), math.nan)
    return ModulationState(tuple(iotas), np.asarray(lambdas, float), g, nan, nan, None, None,
                           energy_norm(grid, g), math.nan, math.nan, 0, status=f"fail:{reason}")


def track(traj, pack, iotas=None, lambdas=None, max_change=0.1, max_failures=10,
          max_bubbles=4, q=None, L=32.0, refined=True):
    """Fit every sample of ``traj``, warm-starting from the previous fit.

    Without ``iotas``/``lambdas`` the first sample is scanned with
    :func:`detect_scales`.  More than ``max_failures`` consecutive failures
    close the segment and trigger re-detection (logged in ``events``).
    """
    grid = traj.grid
    out = ModulationTrack()
    if iotas is None:
        iotas, lambdas = detect_scales(grid, traj.state(0), max_bubbles)
        out.events.append((traj.times[0], "detect", len(iotas)))
    cur = np.asarray(lambdas, dtype=float)
    fails = 0
    for t, st in traj.states():
        try:
            ms = fit_modulation(grid, st, iotas, cur, pack, q=q, L=L, refined=refined,
                                anchor=cur if out.states else None, max_change=max_change)
            cur = ms.lambdas
            fails = 0
        except FitFailure as exc:
            fails += 1
            ms = _failed_state(iotas, cur, grid, st, type(exc).__name__)
            if fails > max_failures:
                iotas, new = detect_scales(grid, st, max_bubbles)
                out.events.append((t, "redetect", len(iotas)))
                cur = np.asarray(new, dtype=float)
                fails = 0
        out.append(t, ms)
    return out


def growth_rate(times, values, t0, t1):
    """``log|v(t1)/v(t0)| / (t1 - t0)`` using the nearest samples."""
    times = np.asarray(times)
    i0 = int(np.argmin(np.abs(times - t0)))
    i1 = int(np.argmin(np.abs(times - t1)))
    return math.log(abs(values[i1] / values[i0])) / (times[i1] - times[i0])
