import numpy as np
import pytest

from dampedwave.bubbles import multibubble_profile
from dampedwave.evolve import RunConfig, run
from dampedwave.grid import FieldPair, RadialGrid, gradient_sq, nonlinear_energy
from dampedwave.trapping import (etilde, etilde_expanded, etilde_rate, ground_state_levels,
                                 kinetic_J, nehari_K, trap_check, z_functional)


@pytest.fixture(scope="module")
def half_w_run():
    cfg = RunConfig(6, 1.0, 0.01, 2.0, {"kind": "uniform", "N": 4096, "r_max": 200.0},
                    {"type": "multibubble", "iotas": [1], "lambdas": [1.0], "scale": 0.5},
                    cadence=0.01)
    return run(cfg)


def test_ground_state_levels(grid6):
    EW, gW = ground_state_levels(grid6)
    assert EW == pytest.approx(38.4, rel=2e-3)
    assert gW == pytest.approx(230.4, rel=2e-3)


def test_nehari_vanishes_on_W(grid6):
    W = multibubble_profile(grid6, (1,), (1.0,))
    assert abs(nehari_K(grid6, W)) < 1e-3 * gradient_sq(grid6, W)


def test_half_w_is_trapped(grid6):
    st = FieldPair.static(0.5 * multibubble_profile(grid6, (1,), (1.0,)))
    rep = trap_check(grid6, st, 1.0)
    assert rep.inside_trap
    assert rep.E_value == pytest.approx(19.2, rel=2e-3)
    assert rep.K_value == pytest.approx(28.8, rel=2e-3)


def test_scaled_up_w_not_trapped(grid6):
    st = FieldPair.static(1.1 * multibubble_profile(grid6, (1,), (1.0,)))
    assert not trap_check(grid6, st, 1.0).inside_trap


def test_expanded_form_matches(grid6, rng):
    u = np.exp(-((grid6.r - 3) ** 2)) * rng.normal(1, 0.1)
    v = np.exp(-((grid6.r - 4) ** 2)) * rng.normal(0, 1)
    st = FieldPair(u, v)
    for alpha in (0.0, 0.5, 2.0):
        assert etilde_expanded(grid6, st, alpha) == pytest.approx(etilde(grid6, st, alpha),
                                                                  rel=1e-12)


def test_z_with_zero_velocity(grid6):
    u = np.exp(-grid6.r ** 2)
    st = FieldPair.static(u)
    assert z_functional(grid6, st, 0.7) == pytest.approx(0.7 * grid6.inner(u, u))
    assert z_functional(grid6, st, 0.7, "half") == pytest.approx(0.35 * grid6.inner(u, u))
    with pytest.raises(ValueError):
        z_functional(grid6, st, 0.7, "other")


def test_energy_identity_for_J(grid6):
    u = 0.3 * np.exp(-grid6.r ** 2)
    assert nonlinear_energy(grid6, FieldPair.static(u)) == pytest.approx(kinetic_J(grid6, u))


@pytest.mark.parametrize("variant", ["full", "half"])
def test_rate_matches_finite_difference(half_w_run, variant):
    traj = half_w_run
    g = traj.grid
    t = np.array(traj.times)
    Et = np.array([etilde(g, s, 1.0, variant) for _, s in traj.states()])
    rate = np.array([etilde_rate(g, s, 1.0, variant) for _, s in traj.states()])
    fd = np.gradient(Et, t, edge_order=2)
    assert np.max(np.abs(fd[2:-2] - rate[2:-2])) < 1e-3 * np.max(np.abs(rate))


def test_half_variant_monotone(half_w_run):
    g = half_w_run.grid
    Et = np.array([etilde(g, s, 1.0, "half") for _, s in half_w_run.states()])
    assert np.all(np.diff(Et) <= 1e-10 * abs(Et[0]))
