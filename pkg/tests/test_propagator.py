import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampedwave.evolve import RunConfig, run
from dampedwave.grid import FieldPair, RadialGrid, energy_norm
from dampedwave.propagator import (AliasingError, MultiplierEval, RadialTransform,
                                   free_evolve, low_frequency_cutoff, measure_decay,
                                   multiplier_L)


def test_undamped_multiplier_is_sine():
    xi = np.linspace(0.1, 5, 30)
    assert np.allclose(multiplier_L(0.0, 2.0, xi), np.sin(2 * xi) / xi, atol=1e-14)


def test_multiplier_initial_values():
    m = MultiplierEval.at(1.0, 0.0, 0.3)
    assert m.value == 0.0 and m.dt_value == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.05, 3.0), t=st.floats(0.0, 30.0), xi=st.floats(0.0, 4.0))
def test_multiplier_ode(alpha, t, xi):
    # K'' + alpha K' + xi^2 K = 0 checked by central differences
    h = 1e-4
    tt = max(t, 2 * h)
    k = [float(multiplier_L(alpha, tt + s * h, xi)) for s in (-1, 0, 1)]
    d2 = (k[0] - 2 * k[1] + k[2]) / h**2
    d1 = (k[2] - k[0]) / (2 * h)
    scale = 1 + abs(d2) + abs(d1) + xi * xi * abs(k[1])
    assert abs(d2 + alpha * d1 + xi * xi * k[1]) < 1e-4 * scale


def test_branch_point_continuity():
    alpha, t = 1.0, 3.0
    xs = 0.5 + np.array([-1e-7, 0.0, 1e-7])
    vals = multiplier_L(alpha, t, xs)
    assert np.ptp(vals) < 1e-6
    assert vals[1] == pytest.approx(t * np.exp(-alpha * t / 2), rel=1e-12)


def test_no_overflow_at_low_frequency():
    v = multiplier_L(2.0, 1e4, np.array([0.0, 1e-6]))
    assert np.all(np.isfinite(v))
    assert v[0] == pytest.approx(0.5, rel=1e-12)  # (1 - e^{-alpha t}) / alpha


def _bump(g, c=8.0, w=2.0):
    return np.exp(-((g.r - c) / w) ** 2)


def test_transform_is_orthonormal():
    g = RadialGrid.uniform(6, 300, 30.0)
    tr = RadialTransform(g)
    u = _bump(g)
    back = tr.inverse(tr.forward(u))
    assert g.norm_l2(back - u) < 1e-12 * g.norm_l2(u)
    assert np.sum(tr.forward(u) ** 2) == pytest.approx(g.inner(u, u), rel=1e-12)


def test_semigroup():
    g = RadialGrid.uniform(6, 1024, 100.0)
    f = FieldPair(_bump(g), 0.3 * _bump(g, 6.0))
    a = free_evolve(g, free_evolve(g, f, 0.7, 2.5), 0.7, 4.0)
    b = free_evolve(g, f, 0.7, 6.5)
    assert np.max(np.abs(a.u - b.u)) < 1e-10 * np.max(np.abs(b.u))


def test_matches_linear_time_stepping():
    N, R = 2048, 100.0
    cfg = RunConfig(6, 1.0, 0.5 * R / N, 10.0, {"kind": "uniform", "N": N, "r_max": R},
                    {"type": "gaussian", "amp": 1.0, "center": 5.0, "width": 1.5},
                    cadence=1.0, nonlinear=False)
    traj = run(cfg)
    exact = free_evolve(traj.grid, traj.state(0), 1.0, 10.0)
    assert np.max(np.abs(exact.u - traj.u[-1])) < 1e-7


def test_energy_decreases_under_damping():
    g = RadialGrid.uniform(6, 1024, 100.0)
    f = FieldPair(_bump(g), np.zeros(g.N))
    e = [energy_norm(g, free_evolve(g, f, 1.0, t)) for t in (0.0, 2.0, 4.0, 8.0)]
    assert all(b < a for a, b in zip(e, e[1:]))


def test_aliasing_guard():
    g = RadialGrid.uniform(6, 256, 20.0)
    noisy = FieldPair(np.cos(np.pi * np.arange(g.N)) * np.exp(-g.r), np.zeros(g.N))
    with pytest.raises(AliasingError):
        free_evolve(g, noisy, 1.0, 1.0)


def test_low_frequency_cutoff_removes_high_modes():
    g = RadialGrid.uniform(6, 1024, 100.0)
    tr = RadialTransform(g)
    out = tr.forward(low_frequency_cutoff(g, _bump(g, 10.0, 0.5), xi_max=1.0))
    assert np.max(np.abs(out[tr.xi > 1.0])) < 1e-12 * np.max(np.abs(out))


def test_damped_low_frequency_decay_slope_d6():
    g = RadialGrid.uniform(6, 2048, 200.0)
    data = low_frequency_cutoff(g, np.exp(-g.r**2))
    fit = measure_decay(g, 1.0, 1, np.inf, data)
    assert fit.slope == pytest.approx(-3.0, rel=0.15)
