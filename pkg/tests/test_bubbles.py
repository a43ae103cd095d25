import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampedwave.bubbles import (BubbleFamily, TailTruncationWarning, bracket_constant,
                                dilation_W, dilation_dilation_W, fprime, ground_state,
                                interaction_term, lambda_W, lambda_generators,
                                lambda_w_l2sq_exact, lambda_w_l2sq_reduced, multibubble,
                                multibubble_profile, nonlinearity, closed_form_constants,
                                scale_h1, scale_l2, truncated_lambda_w_l2sq)
from dampedwave.grid import RadialGrid, laplacian_radial


@pytest.mark.parametrize("D", [4, 5, 6, 7])
def test_ground_state_solves_stationary_equation(D):
    res = []
    for N in (1024, 2048):
        g = RadialGrid.uniform(D, N, 200.0)
        W = ground_state(D, g.r)
        lap = laplacian_radial(g, W, boundary_value=float(ground_state(D, 200.0)))
        res.append(g.norm_l2(lap + nonlinearity(D, W)) / g.norm_l2(nonlinearity(D, W)))
    assert res[1] < 2e-3
    assert res[0] / res[1] > 3.9


@pytest.mark.parametrize("D", [4, 5, 6, 7])
def test_dilation_closed_forms_match_generators(D):
    g = RadialGrid.uniform(D, 4000, 20.0)
    W = ground_state(D, g.r)
    bv = float(ground_state(D, 20.0))
    LW, _ = lambda_generators(g, W, bv)
    inner = g.r < 15
    assert np.max(np.abs(LW - dilation_W(D, g.r))[inner]) < 1e-4
    LWex = dilation_W(D, g.r)
    _, LLW = lambda_generators(g, LWex, float(dilation_W(D, 20.0)))
    assert np.max(np.abs(LLW - dilation_dilation_W(D, g.r))[inner]) < 1e-4


def test_dilation_is_scale_derivative():
    D, r, h = 6, np.linspace(0.1, 20, 50), 1e-6
    deriv = -(lambda_W(D, 1 + h, r) - lambda_W(D, 1 - h, r)) / (2 * h)
    assert np.allclose(deriv, dilation_W(D, r), atol=1e-8)


def test_lambda_w_zero_at_expected_radius():
    assert dilation_W(6, np.sqrt(24.0)) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.5, 4.0))
def test_l2_scaling_preserves_norm(lam):
    g = RadialGrid.uniform(6, 8000, 40.0)
    prof = lambda s: np.exp(-s * s)  # noqa: E731
    a = g.norm_l2(scale_l2(6, prof, 1.0, g.r))
    b = g.norm_l2(scale_l2(6, prof, lam, g.r))
    assert b == pytest.approx(a, rel=1e-4)


def test_h1_scaling_matches_lambda_W():
    r = np.linspace(0.01, 30, 40)
    assert np.allclose(scale_h1(6, lambda s: ground_state(6, s), 2.5, r), lambda_W(6, 2.5, r))


def test_fprime_is_derivative():
    u = np.concatenate((np.linspace(-2, -0.1, 20), np.linspace(0.1, 2, 20)))
    h = 1e-6
    for D in (5, 6, 7):
        num = (nonlinearity(D, u + h) - nonlinearity(D, u - h)) / (2 * h)
        assert np.allclose(num, fprime(D, u), atol=1e-5)


def test_family_validation():
    with pytest.raises(ValueError):
        BubbleFamily(6, (1, 1), (2.0, 1.0))
    with pytest.raises(ValueError):
        BubbleFamily(6, (1, 2), (1.0, 2.0))
    with pytest.raises(ValueError):
        BubbleFamily(6, (1,), (1.0, 2.0))
    fam = BubbleFamily(6, (1, -1), (1.0, 4.0))
    assert fam.M == 2 and fam.separation() == pytest.approx(1 / 16)


def test_closure_meets_dirichlet_value():
    g = RadialGrid.uniform(6, 512, 50.0)
    u = multibubble_profile(g, (1, -1), (1.0, 3.0))
    raw = multibubble_profile(g, (1, -1), (1.0, 3.0), closure=False)
    shift = lambda_W(6, 1.0, 50.0) - lambda_W(6, 3.0, 50.0)
    assert np.allclose(raw - u, shift)


def test_tail_warning():
    g = RadialGrid.uniform(6, 256, 20.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        multibubble(g, BubbleFamily(6, (1,), (1.0,)))
    assert any(issubclass(w.category, TailTruncationWarning) for w in rec)


def test_bracket_constant_values():
    assert bracket_constant(6) == pytest.approx(4608.0)
    assert bracket_constant(4) == pytest.approx(16.0)


def test_lambda_w_norms():
    assert lambda_w_l2sq_exact(6) == pytest.approx(3686.4, rel=1e-12)
    assert lambda_w_l2sq_reduced(6) == pytest.approx(614.4, rel=1e-12)
    assert truncated_lambda_w_l2sq(6, 1e5) == pytest.approx(3686.4, rel=1e-6)
    with pytest.raises(ValueError):
        lambda_w_l2sq_exact(4)


def test_closed_form_constants_table():
    c6 = closed_form_constants(6)
    assert c6.omega_sq_exact == pytest.approx(1.25)
    assert c6.omega_sq == pytest.approx(7.5)
    c4 = closed_form_constants(4)
    assert c4.lambdaW_L2sq is None and c4.lambda_bar_lambda_pairing == 32.0


@pytest.mark.parametrize("iotas,sign", [((1, 1), -1), ((1, -1), 1)])
def test_interaction_sign(iotas, sign):
    g = RadialGrid.stretched(6, 8192, 4000.0, 0.01)
    rep = interaction_term(g, BubbleFamily(6, iotas, (1.0, 64.0)))
    assert np.sign(rep.brackets[0]) == sign == np.sign(rep.predicted[0])
    assert rep.predicted[0] == pytest.approx(sign * 4608.0 / 64**2)
