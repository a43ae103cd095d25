"""Ground state, dilation generators, multi-bubble configurations and constants."""
from __future__ import annotations

from dataclasses import dataclass, field
import functools
import math
import warnings

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .grid import FieldPair, radial_derivative

__all__ = [
    "ground_state",
    "lambda_W",
    "dilation_W",
    "dilation_dilation_W",
    "scale_h1",
    "scale_l2",
    "lambda_generators",
    "BubbleFamily",
    "multibubble",
    "multibubble_profile",
    "nonlinearity",
    "fprime",
    "interaction_term",
    "InteractionReport",
    "ClosedFormConstants",
    "closed_form_constants",
    "bracket_constant",
    "lambda_w_l2sq_reduced",
    "lambda_w_l2sq_exact",
    "truncated_lambda_w_l2sq",
    "TailTruncationWarning",
]


class TailTruncationWarning(UserWarning):
    """A bubble's energy tail beyond ``r_max`` exceeds the tolerance."""


def _c(D):
    return D * (D - 2.0)


def ground_state(D, r):
    """``W(r) = (1 + r^2/(D(D-2)))^(-(D-2)/2)``."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / _c(D)) ** (-(D - 2) / 2.0)


def lambda_W(D, lam, r):
    """Energy-critical rescaling ``W_lam(r) = lam^(-(D-2)/2) W(r/lam)``."""
    return lam ** (-(D - 2) / 2.0) * ground_state(D, np.asarray(r) / lam)


def dilation_W(D, r):
    """Closed form of ``Lambda W = (r d_r + (D-2)/2) W``.

    Derived from the generator: ``((D-2)/2 - r^2/(2D)) (1 + r^2/(D(D-2)))^(-D/2)``.
    """
    r = np.asarray(r, dtype=float)
    return ((D - 2) / 2.0 - r * r / (2.0 * D)) * (1.0 + r * r / _c(D)) ** (-D / 2.0)


def dilation_dilation_W(D, r):
    """Closed form of ``(r d_r + D/2) Lambda W``."""
    r = np.asarray(r, dtype=float)
    s = r * r / _c(D)
    base = (1.0 + s) ** (-D / 2.0)
    rdr = (D - 2) * s * (-base - (D / 2.0) * (1.0 - s) * base / (1.0 + s))
    return rdr + (D / 2.0) * ((D - 2) / 2.0) * (1.0 - s) * base


def scale_h1(D, profile, lam, r):
    """``lam^(-(D-2)/2) profile(r/lam)`` for a callable profile."""
    return lam ** (-(D - 2) / 2.0) * profile(np.asarray(r) / lam)


def scale_l2(D, profile, lam, r):
    """``lam^(-D/2) profile(r/lam)`` (the underlined, L2-invariant scaling)."""
    return lam ** (-D / 2.0) * profile(np.asarray(r) / lam)


def lambda_generators(grid, f, boundary_value=0.0):
    """Return ``(Lambda f, underline-Lambda f)`` with a second-order ``d_r``."""
    f = np.asarray(f, dtype=float)
    rdr = grid.r * radial_derivative(grid, f, boundary_value)
    D = grid.D
    return rdr + (D - 2) / 2.0 * f, rdr + D / 2.0 * f


@dataclass(frozen=True)
class BubbleFamily:
    """Signs and strictly increasing scales of a multi-bubble configuration."""

    D: int
    iotas: tuple = ()
    lambdas: tuple = ()

    def __post_init__(self):
        iotas = tuple(int(i) for i in self.iotas)
        lambdas = tuple(float(x) for x in self.lambdas)
        if len(iotas) != len(lambdas):
            raise ValueError("iotas and lambdas must have the same length")
        if any(i not in (-1, 1) for i in iotas):
            raise ValueError("signs must be +1 or -1")
        if any(x <= 0 for x in lambdas):
            raise ValueError("scales must be positive")
        if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
            raise ValueError("scales must be strictly increasing")
        object.__setattr__(self, "iotas", iotas)
        object.__setattr__(self, "lambdas", lambdas)

    @property
    def M(self):
        return len(self.iotas)

    def ratios(self):
        """``lambda_j / lambda_{j+1}``, all in (0, 1)."""
        lam = np.asarray(self.lambdas)
        return lam[:-1] / lam[1:]

    def separation(self):
        """``sum_j (lambda_j/lambda_{j+1})^((D-2)/2)``."""
        return float(np.sum(self.ratios() ** ((self.D - 2) / 2.0)))


def _tail_energy_fraction(D, lam, r_max):
    # W_lam ~ c lam^((D-2)/2) r^(2-D) beyond r_max; gradient + Hardy tail vs ||W||_E^2
    c = _c(D) ** ((D - 2) / 2.0)
    tail = ((D - 2) ** 2 + 1) * c**2 * lam ** (D - 2) * r_max ** (2 - D) / (D - 2)
    return tail / _energy_norm_sq_W(D)


@functools.lru_cache(maxsize=None)
def _energy_norm_sq_W(D):
    val, _ = integrate.quad(
        lambda r: (_dW(D, r) ** 2 + ground_state(D, r) ** 2 / r**2) * r ** (D - 1),
        0.0, np.inf, limit=400)
    return val


def _dW(D, r):
    return -(r / D) * (1.0 + r * r / _c(D)) ** (-D / 2.0)


def multibubble_profile(grid, iotas, lambdas, closure=True):
    """Samples of ``sum_j iota_j W_{lambda_j}``.

    With ``closure`` the value at ``r_max`` is subtracted so the profile meets
    the Dirichlet condition; gradients (and hence the Laplacian) are unchanged.
    """
    u = np.zeros(grid.N)
    D = grid.D
    for io, lam in zip(iotas, lambdas):
        u += io * lambda_W(D, lam, grid.r)
        if closure:
            u -= io * float(lambda_W(D, lam, grid.r_max))
    return u


def multibubble(grid, fam, tail_tol=1e-6):
    """The configuration ``(sum_j iota_j W_{lambda_j}, 0)`` on ``grid``.

    Warns with :class:`TailTruncationWarning` when the energy of a bubble
    beyond ``r_max`` exceeds ``tail_tol`` relative to ``||(W, 0)||_E^2``.
    """
    if fam.D != grid.D:
        raise ValueError("family and grid dimensions differ")
    for lam in fam.lambdas:
        frac = _tail_energy_fraction(fam.D, lam, grid.r_max)
        if frac > tail_tol:
            warnings.warn(
                f"bubble at scale {lam:g} loses {frac:.2e} of its energy beyond "
                f"r_max={grid.r_max:g}", TailTruncationWarning, stacklevel=2)
    return FieldPair.static(multibubble_profile(grid, fam.iotas, fam.lambdas))


def nonlinearity(D, u):
    """``f(u) = |u|^(4/(D-2)) u``."""
    u = np.asarray(u, dtype=float)
    return np.abs(u) ** (4.0 / (D - 2)) * u


def fprime(D, u):
    """``f'(u) = (D+2)/(D-2) |u|^(4/(D-2))``."""
    u = np.asarray(u, dtype=float)
    return (D + 2.0) / (D - 2.0) * np.abs(u) ** (4.0 / (D - 2))


def bracket_constant(D):
    """``(D-2)/(2D) (D(D-2))^(D/2)``: the interaction coefficient."""
    return (D - 2) / (2.0 * D) * _c(D) ** (D / 2.0)


@dataclass
class InteractionReport:
    """Interaction term ``f_i`` and its pairings with ``Lambda W_{lambda_j}``."""

    f_i: np.ndarray
    brackets: np.ndarray
    predicted: np.ndarray
    tail_bound: float

    def relative_errors(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.brackets - self.predicted) / np.abs(self.predicted)


def interaction_term(grid, fam):
    """``f_i = f(W(iota, lambda)) - sum_j iota_j f(W_{lambda_j})`` and brackets.

    ``brackets[j] = <Lambda W_{lambda_j} | f_i>`` (grid quadrature) next to the
    leading-order prediction
    ``iota_{j-1} C (l_{j-1}/l_j)^((D-2)/2) - iota_{j+1} C (l_j/l_{j+1})^((D-2)/2)``.
    ``tail_bound`` bounds the neglected integral beyond ``r_max``.
    """
    D = grid.D
    M = fam.M
    r = grid.r
    if M == 0:
        return InteractionReport(np.zeros(grid.N), np.zeros(0), np.zeros(0), 0.0)
    total = multibubble_profile(grid, fam.iotas, fam.lambdas, closure=False)
    fi = nonlinearity(D, total)
    for io, lam in zip(fam.iotas, fam.lambdas):
        fi -= io * nonlinearity(D, lambda_W(D, lam, r))
    C = bracket_constant(D)
    p = (D - 2) / 2.0
    brackets = np.empty(M)
    predicted = np.zeros(M)
    for j, lam in enumerate(fam.lambdas):
        lw = scale_h1(D, lambda q: dilation_W(D, q), lam, r)
        brackets[j] = grid.integrate(lw * fi, high_order=True)
        if j > 0:
            predicted[j] += fam.iotas[j - 1] * C * (fam.lambdas[j - 1] / lam) ** p
        if j < M - 1:
            predicted[j] -= fam.iotas[j + 1] * C * (lam / fam.lambdas[j + 1]) ** p
    # beyond r_max every bubble is ~ amp r^(2-D), so |Lambda W_lam f_i| <= K r^(-2D)
    lam_max = max(fam.lambdas)
    amp = _c(D) ** ((D - 2) / 2.0) * lam_max ** ((D - 2) / 2.0)
    K = (D + 2) / (D - 2) * M ** ((D + 2) / (D - 2)) * amp ** ((D + 2) / (D - 2)) * amp
    tail = K * grid.r_max ** (-D) / D
    return InteractionReport(fi, brackets, predicted, float(tail))


# -- constants --------------------------------------------------------------

def lambda_w_l2sq_reduced(D):
    """``2(D^2-4)(D(D-2))^(D/2) / (D^2 (D-4)) * Gamma(1+D/2)/Gamma(D)``, the reduced form.

    This expression is smaller than the actual integral by ``Gamma(1+D/2)``;
    see :func:`lambda_w_l2sq_exact`.
    """
    if D <= 4:
        raise ValueError("||Lambda W||_L2 diverges for D <= 4 (logarithmically at D = 4)")
    return (2.0 * (D * D - 4) * _c(D) ** (D / 2.0) / (D * D * (D - 4))
            * math.exp(gammaln(1 + D / 2.0) - gammaln(D)))


def lambda_w_l2sq_exact(D):
    """``int (Lambda W)^2 r^(D-1) dr`` in closed form (Beta integrals).

    ``(D-2)(D+2)/(2(D-4)) (D(D-2))^(D/2) Gamma(D/2)^2 / Gamma(D)``.
    """
    if D <= 4:
        raise ValueError("||Lambda W||_L2 diverges for D <= 4 (logarithmically at D = 4)")
    return ((D - 2) * (D + 2) / (2.0 * (D - 4)) * _c(D) ** (D / 2.0)
            * math.exp(2 * gammaln(D / 2.0) - gammaln(D)))


def truncated_lambda_w_l2sq(D, R):
    """``int_0^R (Lambda W)^2 r^(D-1) dr`` by adaptive quadrature."""
    pts = [p for p in (1.0, 10.0, 100.0, 1000.0) if p < R]
    val, _ = integrate.quad(lambda r: dilation_W(D, r) ** 2 * r ** (D - 1), 0.0, R,
                            points=pts or None, limit=500, epsabs=0, epsrel=1e-12)
    return val


@dataclass(frozen=True)
class ClosedFormConstants:
    """Closed-form constants for dimension ``D``.

    ``lambdaW_L2sq`` and ``omega_sq`` follow the reduced closed form;
    ``lambdaW_L2sq_exact`` and ``omega_sq_exact`` use the true integral and
    are what the modulation code normalises with.  ``None`` where the
    quantity diverges (``D = 4``).
    """

    D: int
    bracket_const: float
    lambdaW_L2sq: float | None
    omega_sq: float | None
    lambdaW_L2sq_exact: float | None
    omega_sq_exact: float | None
    lambda_bar_lambda_pairing: float = field(default=0.0)


def closed_form_constants(D):
    C = bracket_constant(D)
    pairing = 32.0 if D == 4 else 0.0
    if D <= 4:
        return ClosedFormConstants(D, C, None, None, None, None, pairing)
    reduced = lambda_w_l2sq_reduced(D)
    exact = lambda_w_l2sq_exact(D)
    return ClosedFormConstants(D, C, reduced, C / reduced, exact, C / exact, pairing)
