import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampedwave.bubbles import dilation_W, ground_state
from dampedwave.evolve import RunConfig, run
from dampedwave.grid import FieldPair, RadialGrid
from dampedwave.virial import (CUTOFF, QConstructionError, TruncatedQ, build_q,
                               central_derivative, omega_errors, virial_identity_residual,
                               virial_ops, virial_value)


def test_cutoff_shape():
    x = np.linspace(0, 3, 301)
    chi = CUTOFF.chi(x)
    assert np.all(chi[x <= 1] == 1.0) and np.all(chi[x >= 2] == 0.0)
    assert np.all(np.diff(chi) <= 0)
    h = 1e-6
    num = (CUTOFF.chi(x + h) - CUTOFF.chi(x - h)) / (2 * h)
    assert np.allclose(num, CUTOFF.dchi(x), atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(0.2, 3.0), R=st.floats(2.0, 50.0))
def test_truncated_q_properties(c, R):
    q = TruncatedQ(6, c, R)
    r = np.geomspace(1e-4, 1e4, 4000)
    grid = RadialGrid(6, np.concatenate(([0.0], r)))
    assert q.check(grid)


def test_q_plateau_and_support():
    q = TruncatedQ(6, 1.0, 10.0)
    r = np.array([0.2, 1.0, 5.0, 10.0])
    assert np.allclose(q.q(r), 0.5 * r * r, rtol=1e-12)
    if np.isfinite(q.R_tilde):
        assert q.dq(np.array([q.R_tilde * 1.01]))[0] == 0.0
    assert np.all(np.diff(q.q(np.geomspace(10, 1e6, 50))) >= 0)


def test_q_check_reports_violations():
    q = TruncatedQ(6, 1.0, 10.0)
    q.c = 1e-6  # pretend a tighter constant than the one it was built for
    r = np.geomspace(1e-3, 1e6, 3000)
    with pytest.raises(QConstructionError) as exc:
        q.check(RadialGrid(6, np.concatenate(([0.0], r))))
    assert exc.value.index in (4, 5, 6)


def test_build_q_validates_on_grid():
    g = RadialGrid.uniform(6, 512, 50.0)
    assert build_q(0.5, 5.0, g).R == 5.0


def test_virial_ops_reduce_to_generators_on_plateau():
    g = RadialGrid.uniform(6, 4000, 40.0)
    q = TruncatedQ(6, 1.0, 20.0)
    W = ground_state(6, g.r)
    A, Abar = virial_ops(q, 1.0, g, W, boundary_value=float(ground_state(6, 40.0)))
    inner = (g.r > 0.1) & (g.r < 15)
    assert np.max(np.abs(A - dilation_W(6, g.r))[inner]) < 1e-4
    assert np.max(np.abs(Abar - A - W)[inner]) < 1e-12


def test_central_derivative_fourth_order():
    errs = []
    for n in (50, 100):
        t = np.linspace(0, 2, n + 1)
        tc, d = central_derivative(t, np.sin(t))
        errs.append(np.max(np.abs(d - np.cos(tc))))
    assert errs[0] / errs[1] > 12


def test_virial_values_of_static_state_vanish():
    g = RadialGrid.uniform(6, 512, 50.0)
    s = FieldPair.static(ground_state(6, g.r))
    assert virial_value(g, s, 5.0, "identity3") == 0.0


def test_omega_vanishes_without_cutoff_transition():
    g = RadialGrid.uniform(6, 512, 50.0)
    s = FieldPair(np.exp(-g.r**2), np.exp(-g.r**2))
    om1, om2 = omega_errors(g, s, rho=20.0)
    assert abs(om1) < 1e-30 and abs(om2) < 1e-30


@pytest.mark.parametrize("variant", ["V1", "V2", "identity3", "identity4"])
def test_identities_on_linear_run(variant):
    res = []
    for N in (1024, 2048):
        cfg = RunConfig(6, 1.0, 0.5 * 100.0 / N, 6.0, {"kind": "uniform", "N": N, "r_max": 100.0},
                        {"type": "gaussian", "amp": 1.0, "center": 20.0, "width": 3.0},
                        cadence=0.05, nonlinear=False)
        res.append(virial_identity_residual(run(cfg), 50.0, variant, nonlinear=False).relative)
    assert res[1] < 1e-2
    assert res[0] / res[1] > 3.5


def test_moving_radius_identity():
    cfg = RunConfig(6, 1.0, 0.5 * 100.0 / 2048, 6.0, {"kind": "uniform", "N": 2048, "r_max": 100.0},
                    {"type": "multibubble", "iotas": [1], "lambdas": [1.0], "scale": 0.5},
                    cadence=0.05)
    traj = run(cfg)
    res = virial_identity_residual(traj, lambda t: 3.0 + 0.5 * t, "identity3",
                                   rho_prime=lambda t: 0.5)
    assert res.relative < 1e-2
