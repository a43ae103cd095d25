"""RK4 method-of-lines integration of the damped focusing wave equation.

The state is ``(u, udot)`` with ``udot' = Lap u - alpha udot + f(u)``.  The
accumulated dissipation ``Q(t) = alpha int_0^t int udot^2`` is integrated as
an extra RK4 component so the energy identity ``E(t) + Q(t) = E(0)`` can be
audited to the accuracy of the time stepper.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .bubbles import BubbleFamily, multibubble, nonlinearity
from .grid import (FieldPair, RadialGrid, energy_norm, gradient_sq, laplacian_radial,
                   nonlinear_energy)

__all__ = [
    "ConfigError",
    "RunConfig",
    "Trajectory",
    "rhs",
    "step",
    "initial_state",
    "support_radius",
    "run",
    "kinetic_time_average",
    "exterior_energy",
    "write_checkpoint",
    "read_checkpoint",
]

BLOWUP_FACTOR = 1e3
SUPPORT_TOL = 1e-3


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Parameters of one run.

    ``data`` is a dict with ``type`` one of ``multibubble``,
    ``multibubble+perturbation``, ``gaussian`` or ``samples`` (see
    :func:`initial_state`).  ``cadence`` is the diagnostic sampling interval.
    ``nonlinear=False`` drops ``f(u)`` (free damped flow).
    """

    D: int
    alpha: float
    dt: float
    t_end: float
    grid: dict
    data: dict
    cadence: float = 0.1
    nonlinear: bool = True

    def build_grid(self):
        spec = dict(self.grid)
        spec.setdefault("D", self.D)
        if spec["D"] != self.D:
            raise ConfigError("grid dimension differs from run dimension")
        return RadialGrid.from_spec(spec)

    def validate(self, grid=None, state=None):
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.t_end <= 0 or self.dt <= 0 or self.cadence <= 0:
            raise ConfigError("t_end, dt and cadence must be positive")
        grid = grid or self.build_grid()
        if self.dt > 0.5 * grid.h_min * (1 + 1e-12):
            raise ConfigError(f"CFL violated: dt={self.dt:g} > 0.5*h={0.5 * grid.h_min:g}")
        if state is not None:
            R = support_radius(grid, state)
            if self.t_end + R >= grid.r_max:
                raise ConfigError(
                    f"t_end + support radius = {self.t_end + R:g} reaches r_max={grid.r_max:g}")
        return grid

    def to_dict(self):
        return {"D": self.D, "alpha": self.alpha, "dt": self.dt, "t_end": self.t_end,
                "grid": dict(self.grid), "data": dict(self.data),
                "cadence": self.cadence, "nonlinear": self.nonlinear}


@dataclass
class Trajectory:
    """Sampled run output.

    ``status`` is ``ok``, ``blowup-candidate`` or ``nan``; ``dissipation[k]``
    is ``alpha int_0^{t_k} int udot^2``.
    """

    grid: RadialGrid
    alpha: float
    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    udot: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    sup_norm: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""
    last_good: tuple | None = None

    def state(self, k):
        return FieldPair(self.u[k], self.udot[k])

    def states(self):
        for k in range(len(self.times)):
            yield self.times[k], self.state(k)

    def __len__(self):
        return len(self.times)

    def arrays(self):
        return np.asarray(self.times), np.asarray(self.u), np.asarray(self.udot)


def rhs(grid, u, udot, alpha, nonlinear=True):
    """Time derivative of ``(u, udot)``."""
    acc = laplacian_radial(grid, u) - alpha * udot
    if nonlinear:
        acc = acc + nonlinearity(grid.D, u)
    return udot, acc


def _stage(grid, u, v, alpha, nonlinear, wV):
    du, dv = rhs(grid, u, v, alpha, nonlinear)
    return du, dv, alpha * float(np.dot(v * v, wV))


def _rk4(grid, u, v, q, dt, alpha, nonlinear):
    w = grid.weights
    k1 = _stage(grid, u, v, alpha, nonlinear, w)
    k2 = _stage(grid, u + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], alpha, nonlinear, w)
    k3 = _stage(grid, u + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], alpha, nonlinear, w)
    k4 = _stage(grid, u + dt * k3[0], v + dt * k3[1], alpha, nonlinear, w)
    c = dt / 6.0
    return (u + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            v + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            q + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]))


def step(grid, state, dt, alpha, nonlinear=True):
    """One classical RK4 step of the first-order system."""
    if dt > 0.5 * grid.h_min * (1 + 1e-12):
        raise ConfigError("CFL violated: dt > 0.5 h")
    u, v, _ = _rk4(grid, state.u, state.udot, 0.0, dt, alpha, nonlinear)
    return FieldPair(u, v)


def support_radius(grid, state, tol=SUPPORT_TOL):
    """Radius beyond which ``|u|`` and ``|udot|`` stay below ``tol`` times their sup."""
    amp = np.maximum(np.abs(state.u), np.abs(state.udot))
    top = amp.max()
    if top == 0.0:
        return 0.0
    big = np.nonzero(amp > tol * top)[0]
    return float(grid.faces[big[-1] + 1])


def initial_state(grid, data, pack=None):
    """Build initial data from a spec dict.

    ``multibubble``: ``iotas``, ``lambdas`` and optional ``scale`` (multiplies
    the whole configuration).  ``multibubble+perturbation`` adds
    ``perturbation``: either ``{"kind": "unstable_mode", "eps", "alpha",
    "bubble"}`` seeding ``eps (Y_lam, mu_+ Y_lam)`` or ``{"kind": "gaussian",
    "amp", "center", "width"}`` (added to ``u``, with optional ``vamp`` for
    ``udot``).  ``gaussian``: the same keys on zero background.  ``samples``:
    explicit ``u`` and ``udot`` lists.
    """
    kind = data.get("type")
    D = grid.D
    if kind in ("multibubble", "multibubble+perturbation"):
        fam = BubbleFamily(D, tuple(data["iotas"]), tuple(data["lambdas"]))
        base = multibubble(grid, fam) * float(data.get("scale", 1.0))
        if kind == "multibubble":
            return base
        return base + _perturbation(grid, data["perturbation"], fam, pack)
    if kind == "gaussian":
        return _perturbation(grid, dict(data, kind="gaussian"), None, pack)
    if kind == "samples":
        st = FieldPair(np.asarray(data["u"], float), np.asarray(data["udot"], float))
        if st.u.size != grid.N:
            raise ConfigError("sample count does not match grid")
        return st
    raise ConfigError(f"unknown initial data type {kind!r}")


def _perturbation(grid, p, fam, pack):
    kind = p.get("kind")
    if kind == "gaussian":
        shape = np.exp(-((grid.r - p.get("center", 0.0)) / p.get("width", 1.0)) ** 2)
        return FieldPair(p.get("amp", 0.0) * shape, p.get("vamp", 0.0) * shape)
    if kind == "unstable_mode":
        if pack is None:
            raise ConfigError("unstable-mode perturbation needs a spectral pack")
        j = int(p.get("bubble", 0))
        lam = fam.lambdas[j]
        alpha = float(p["alpha"])
        kap = pack.kappa / lam
        mu = (-alpha + math.sqrt(alpha * alpha + 4 * kap * kap)) / 2.0
        y = pack.Y_on(grid, lam)
        return FieldPair(p["eps"] * y, p["eps"] * mu * y)
    raise ConfigError(f"unknown perturbation kind {kind!r}")


def run(config, state=None, pack=None, hooks=()):
    """Integrate ``config`` and return a :class:`Trajectory`.

    ``hooks`` are callables ``hook(t, state)`` invoked at each diagnostic
    sample.  The run stops early with status ``blowup-candidate`` when the
    energy norm exceeds ``1e3`` times its initial value, or ``nan`` on
    non-finite values (``last_good`` then holds ``(t, state)``).
    """
    grid = config.build_grid()
    if state is None:
        state = initial_state(grid, config.data, pack)
    config.validate(grid, state)
    alpha, dt, nl = float(config.alpha), float(config.dt), bool(config.nonlinear)
    n_samples = int(round(config.t_end / config.cadence))
    sub = max(1, int(math.ceil(config.cadence / dt - 1e-9)))
    h = config.cadence / sub
    traj = Trajectory(grid, alpha)
    e0 = energy_norm(grid, state)
    u, v, q = state.u.copy(), state.udot.copy(), 0.0

    def record(t):
        st = FieldPair(u, v)
        traj.times.append(t)
        traj.u.append(u.copy())
        traj.udot.append(v.copy())
        traj.energy.append(nonlinear_energy(grid, st) if nl else _linear_energy(grid, st))
        traj.dissipation.append(q)
        traj.sup_norm.append(float(np.max(np.abs(u))))
        for hook in hooks:
            hook(t, st)

    record(0.0)
    for k in range(1, n_samples + 1):
        good = (traj.times[-1], FieldPair(u.copy(), v.copy()))
        for _ in range(sub):
            u, v, q = _rk4(grid, u, v, q, h, alpha, nl)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            traj.status, traj.message, traj.last_good = "nan", "non-finite state", good
            break
        t = k * config.cadence
        record(t)
        if e0 > 0 and energy_norm(grid, FieldPair(u, v)) > BLOWUP_FACTOR * e0:
            traj.status = "blowup-candidate"
            traj.message = f"energy norm exceeded {BLOWUP_FACTOR:g}x initial at t={t:g}"
            break
    return traj


def _linear_energy(grid, st):
    return 0.5 * (grid.inner(st.udot, st.udot) + gradient_sq(grid, st.u))


def kinetic_time_average(traj, window, r_hi=None):
    """``(1/|I|) int_I int udot^2`` over the samples in ``window`` (trapezoid).

    ``r_hi`` restricts the spatial integral to ``r <= r_hi``.
    """
    t0, t1 = window
    times = np.asarray(traj.times)
    sel = np.nonzero((times >= t0 - 1e-12) & (times <= t1 + 1e-12))[0]
    if sel.size < 2:
        raise ValueError("window does not cover two samples")
    g = traj.grid
    vals = np.array([g.integrate(traj.udot[k] ** 2, 0.0, r_hi) for k in sel])
    ts = times[sel]
    return float(trapezoid(vals, ts) / (ts[-1] - ts[0]))


def exterior_energy(grid, state, rho):
    """``||state||^2_{E(rho, r_max)}``; ``rho = 0`` gives the full squared norm."""
    if rho < 0 or rho >= grid.r_max:
        raise ValueError("rho must lie in [0, r_max)")
    return energy_norm(grid, state, rho, None) ** 2


def write_checkpoint(path, grid, t, state):
    """JSON checkpoint: ``{"format", "version", "t", "grid", "u", "udot"}``.

    Floats are written with ``repr`` precision so a round trip is exact.
    """
    doc = {"format": "dampedwave-checkpoint", "version": 1, "t": float(t),
           "grid": grid.spec(), "u": state.u.tolist(), "udot": state.udot.tolist()}
    Path(path).write_text(json.dumps(doc))


def read_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "dampedwave-checkpoint":
        raise ValueError("not a checkpoint file")
    grid = RadialGrid.from_spec(doc["grid"])
    return grid, doc["t"], FieldPair(np.array(doc["u"]), np.array(doc["udot"]))
