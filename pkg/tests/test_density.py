import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import radial_quad_normalizer
from ggmink.density import (LogProfile, Params, ball_mass, ball_radius_for_mass, bracket,
                            classify_log_profile, density_at, displayed_partition_constant, normalizer,
                            omega, sphere_area, support_cutoff)
from ggmink.errors import DomainError

# (alpha, q) pairs covering q < 0, q = 0 and 0 < q < alpha/n
GRID = [(a, q) for a in (0.5, 1.0, 1.5, 2.0, 3.0) for q in (-1.0, -0.3, 0.0, 0.2, 0.45)]


def test_params_validation():
    with pytest.raises(DomainError):
        Params(1, 2.0, 0.0)
    with pytest.raises(DomainError):
        Params(2, -1.0, 0.0)
    with pytest.raises(DomainError):
        Params(2, 2.0, 1.0)  # q must be < alpha/n = 1


def test_flags():
    assert Params(2, 2.0, 0.4).q_subcritical
    assert not Params(2, 2.0, 0.6).q_subcritical
    assert Params(2, 2.0, -0.5, -1.0).p_negative_admissible  # alpha/q - alpha = -6
    assert not Params(2, 2.0, -0.5, -7.0).p_negative_admissible
    assert Params(2, 2.0, 0.2, -3.0).p_negative_admissible
    assert not Params(2, 2.0, 0.6, -1.0).p_negative_admissible
    assert not Params(2, 2.0, 0.0, 1.0).p_negative_admissible


def test_gaussian_normalizer_is_two_pi():
    P = Params(2, 2.0, 0.0)
    oracle = integrate.dblquad(lambda y, x: math.exp(-(x * x + y * y) / 2), -12, 12, -12, 12,
                               epsabs=1e-13)[0]
    assert normalizer(P) == pytest.approx(2 * math.pi, rel=1e-13)
    assert normalizer(P) == pytest.approx(oracle, abs=1e-8)
    assert density_at(P, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-13)


def test_displayed_constant_is_reciprocal():
    for a, q in GRID:
        for n in (2, 3):
            if q >= a / n:
                continue
            P = Params(n, a, q)
            assert displayed_partition_constant(P) * normalizer(P) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("alpha,q", GRID)
def test_normalizer_against_quadrature(n, alpha, q):
    if q >= alpha / n:
        pytest.skip("outside the parameter domain")
    P = Params(n, alpha, q)
    assert normalizer(P) == pytest.approx(radial_quad_normalizer(P), rel=1e-8)


def test_q_to_zero_continuity():
    base = normalizer(Params(2, 2.0, 0.0))
    for q in (1e-2, 1e-3, 1e-4):
        assert abs(normalizer(Params(2, 2.0, q)) - base) / base < 20 * q
    # the gap is O(q); a quadratic fit through the sweep extrapolates to q = 0
    qs = np.array([1e-2, 1e-3, 1e-4])
    zs = np.array([normalizer(Params(2, 2.0, q)) for q in qs])
    limit = np.polyval(np.polyfit(qs, zs, 2), 0.0)
    assert abs(limit - base) / base < 1e-6


def test_density_values_and_cutoff():
    P = Params(2, 2.0, 0.5)
    assert support_cutoff(P) == pytest.approx(2.0)
    assert density_at(P, 2.0) == 0.0
    assert density_at(P, 3.0) == 0.0
    assert density_at(P, 0.0) == pytest.approx(1 / normalizer(P))
    assert support_cutoff(Params(2, 1.0, 0.25)) == pytest.approx(4.0)
    assert support_cutoff(Params(2, 2.0, 0.0)) is None
    assert support_cutoff(Params(2, 2.0, -1.0)) is None
    with pytest.raises(DomainError):
        density_at(P, -0.1)


def test_ball_mass_closed_forms():
    P = Params(2, 2.0, 0.0)
    assert ball_mass(P, 0.0) == 0.0
    assert ball_mass(P, 1.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-14)
    assert ball_mass(P, np.inf) == pytest.approx(1.0, abs=1e-14)
    Q = Params(3, 1.5, 0.3)
    assert ball_mass(Q, support_cutoff(Q)) == pytest.approx(1.0, abs=1e-12)
    assert ball_mass(Q, 10 * support_cutoff(Q)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        ball_mass(P, -1.0)


@pytest.mark.parametrize("alpha,q", [(0.5, -1.0), (1.0, 0.2), (3.0, 0.45), (2.0, -0.3)])
def test_ball_mass_against_quadrature(alpha, q):
    P = Params(3, alpha, q)
    Z = normalizer(P)
    for rho in (0.3, 1.0, 2.5):
        # r = s^2 removes the sqrt-type endpoint behaviour of r^alpha at alpha = 1/2
        num = integrate.quad(lambda s: float(bracket(P, s * s)) * s**5 * 2, 0, math.sqrt(rho), epsrel=1e-13)[0]
        assert ball_mass(P, rho) == pytest.approx(sphere_area(3) * num / Z, abs=1e-10)


def test_ball_mass_monotone_and_inverse():
    P = Params(2, 1.0, 0.3)
    r = np.linspace(0, support_cutoff(P) * 0.999, 500)
    assert np.all(np.diff(ball_mass(P, r)) > 0)
    for c in (0.1, 0.5, 0.9):
        assert ball_mass(P, ball_radius_for_mass(P, c)) == pytest.approx(c, abs=1e-12)


def test_classification_examples():
    assert classify_log_profile(Params(2, 2.0, 0.0)) is LogProfile.LOG_CONCAVE
    assert classify_log_profile(Params(2, 1.0, -1.0)) is LogProfile.LOG_CONVEX
    assert classify_log_profile(Params(2, 2.0, -1.0)) is LogProfile.UNCLASSIFIED
    assert classify_log_profile(Params(2, 2.0, 0.6)) is LogProfile.LOG_CONVEX
    assert classify_log_profile(Params(2, 0.5, 0.1)) is LogProfile.POINCARE_RANGE
    assert classify_log_profile(Params(2, 0.5, 0.21)) is LogProfile.UNCLASSIFIED
    assert LogProfile.LOG_CONCAVE.value == "LogConcave"


@pytest.mark.parametrize("alpha,q", [(a, q) for a, q in GRID if q < a / (2 + a)])
def test_omega_convex_in_log_and_monotone(alpha, q):
    P = Params(2, alpha, q)
    cut = support_cutoff(P)
    hi = math.log(cut) - 1e-3 if cut is not None else 3.0
    s = np.linspace(-4.0, hi, 1000)
    w = omega(P, np.exp(s))
    assert np.all(np.diff(w, 2) >= -1e-10)
    assert np.all(np.diff(w) >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(-2.0, 0.99, allow_subnormal=False), st.integers(2, 3), st.floats(0.0, 5.0))
def test_density_nonnegative_and_bounded(alpha, qfrac, n, r):
    q = qfrac * alpha / n
    P = Params(n, alpha, q)
    v = density_at(P, r)
    assert v >= 0.0
    if q <= 0 or (1 / q - n / alpha - 1) >= 0:
        assert v <= density_at(P, 0.0) * (1 + 1e-12)
