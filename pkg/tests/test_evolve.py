import numpy as np
import pytest

from dampedwave.evolve import (ConfigError, RunConfig, exterior_energy, initial_state,
                               kinetic_time_average, read_checkpoint, run, step,
                               support_radius, write_checkpoint)
from dampedwave.grid import FieldPair, RadialGrid, energy_norm

GRID = {"kind": "uniform", "N": 1024, "r_max": 100.0}
HALF_W = {"type": "multibubble", "iotas": [1], "lambdas": [1.0], "scale": 0.5}


def _cfg(**kw):
    base = dict(D=6, alpha=1.0, dt=0.04, t_end=5.0, grid=GRID, data=HALF_W, cadence=0.25)
    base.update(kw)
    return RunConfig(**base)


def test_energy_identity_short_run():
    traj = run(_cfg())
    E, Q = np.array(traj.energy), np.array(traj.dissipation)
    assert np.max(np.abs(E - E[0] + Q)) < 1e-6 * abs(E[0])
    assert np.all(np.diff(E) <= 1e-12)


def test_time_convergence_is_fourth_order():
    finals = []
    for dt in (0.04, 0.02, 0.01):
        traj = run(_cfg(dt=dt, t_end=2.0, cadence=0.5))
        finals.append(traj.state(len(traj) - 1))
    g = RadialGrid.from_spec(dict(GRID, D=6))
    e1 = energy_norm(g, finals[0] - finals[1])
    e2 = energy_norm(g, finals[1] - finals[2])
    assert e1 / e2 >= 12.0


def test_cfl_rejected():
    with pytest.raises(ConfigError):
        _cfg(dt=0.2).validate()
    g = RadialGrid.from_spec(dict(GRID, D=6))
    with pytest.raises(ConfigError):
        step(g, FieldPair.zeros(g), 0.2, 1.0)


def test_domain_too_small_rejected():
    cfg = _cfg(t_end=95.0)
    with pytest.raises(ConfigError):
        run(cfg)


def test_negative_damping_rejected():
    with pytest.raises(ConfigError):
        _cfg(alpha=-1.0).validate()


def test_blowup_candidate_flagged():
    cfg = _cfg(alpha=0.0, t_end=20.0, grid={"kind": "uniform", "N": 1024, "r_max": 200.0},
               data={"type": "multibubble", "iotas": [1], "lambdas": [1.0], "scale": 1.2},
               dt=0.05)
    traj = run(cfg)
    assert traj.status in ("blowup-candidate", "nan")
    assert traj.times[-1] < 20.0


def test_runs_are_deterministic():
    a, b = run(_cfg(t_end=1.0)), run(_cfg(t_end=1.0))
    assert all(np.array_equal(x, y) for x, y in zip(a.u, b.u))
    assert a.energy == b.energy


def test_hooks_see_every_sample():
    seen = []
    traj = run(_cfg(t_end=1.0), hooks=[lambda t, s: seen.append(t)])
    assert seen == traj.times


def test_initial_state_kinds(pack6):
    g = RadialGrid.from_spec(dict(GRID, D=6))
    s = initial_state(g, {"type": "gaussian", "amp": 2.0, "center": 3.0, "width": 1.0,
                          "vamp": 1.0})
    assert s.u.max() == pytest.approx(2.0, rel=1e-2) and s.udot.max() > 0
    p = initial_state(g, {"type": "multibubble+perturbation", "iotas": [1], "lambdas": [1.0],
                          "perturbation": {"kind": "unstable_mode", "eps": 1e-4, "alpha": 1.0}},
                      pack6)
    w = initial_state(g, {"type": "multibubble", "iotas": [1], "lambdas": [1.0]})
    diff = p - w
    core = g.r < 20
    assert np.allclose(diff.udot[core], diff.u[core] * diff.udot[0] / diff.u[0])
    assert diff.udot[0] / diff.u[0] == pytest.approx(
        (-1 + np.sqrt(1 + 4 * pack6.kappa**2)) / 2)
    with pytest.raises(ConfigError):
        initial_state(g, {"type": "nope"})
    with pytest.raises(ConfigError):
        initial_state(g, {"type": "samples", "u": [0.0], "udot": [0.0]})


def test_support_radius():
    g = RadialGrid.from_spec(dict(GRID, D=6))
    s = FieldPair.static(np.where(g.r < 10, 1.0, 0.0))
    assert support_radius(g, s) == pytest.approx(10.0, abs=0.2)


def test_checkpoint_round_trip(tmp_path):
    traj = run(_cfg(t_end=0.5))
    st = traj.state(len(traj) - 1)
    write_checkpoint(tmp_path / "c.json", traj.grid, traj.times[-1], st)
    g, t, back = read_checkpoint(tmp_path / "c.json")
    assert g.same_as(traj.grid) and t == traj.times[-1]
    assert np.array_equal(back.u, st.u) and np.array_equal(back.udot, st.udot)


def test_kinetic_average_and_exterior():
    traj = run(_cfg(t_end=2.0))
    avg = kinetic_time_average(traj, (0.0, 2.0))
    assert avg > 0
    assert kinetic_time_average(traj, (0.0, 2.0), r_hi=5.0) <= avg
    st = traj.state(len(traj) - 1)
    assert exterior_energy(traj.grid, st, 0.0) == pytest.approx(energy_norm(traj.grid, st) ** 2)
    assert exterior_energy(traj.grid, st, 10.0) < exterior_energy(traj.grid, st, 1.0)
    with pytest.raises(ValueError):
        kinetic_time_average(traj, (5.0, 6.0))
