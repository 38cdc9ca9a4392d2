import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as sp_gamma

from polaronlab.errors import DivergenceError, DomainError
from polaronlab.special_math import (
    I0_PRINTED,
    I_PREFACTOR,
    OccupationProfile,
    QuadratureSpec,
    g_moment,
    g_profile,
    g_times_a2,
    gamma,
    i0_closed_form,
    i0_quadrature,
    i_epsilon,
    i_integrand,
)


def test_gamma_against_scipy():
    for z in (0.25, 0.5, 0.75, 1.0, 1.25, 2.5, 7.3, -0.5, -1.5):
        assert gamma(z) == pytest.approx(sp_gamma(z), rel=1e-13)


def test_gamma_poles():
    for z in (0.0, -1.0, -3.0):
        with pytest.raises(DomainError):
            gamma(z)


def test_gamma_recurrence_cross_check():
    assert gamma(0.75) / gamma(1.25) == pytest.approx(4.0 * gamma(0.75) / gamma(0.25), rel=1e-14)


def test_g_at_one():
    assert g_profile(1.0) == pytest.approx(1.0 / math.sqrt(3.0) - 0.5, rel=1e-14)
    assert g_profile(1.0) == pytest.approx(0.0773503, abs=1e-7)


def test_g_large_a_asymptote():
    for a in (10.0, 100.0):
        assert g_profile(a) * a**8 == pytest.approx(0.25, rel=2.0 / a**4)


def test_g_small_a():
    assert g_profile(0.1) == pytest.approx(34.858, abs=1e-3)
    assert g_profile(1e-4) * 1e-8 == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)), rel=1e-7)
    assert g_times_a2(0.0) == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)), rel=1e-15)


def test_g_stable_form_matches_textbook_where_safe():
    a = np.linspace(0.2, 2.0, 50)
    raw = 0.5 * ((a**4 + 1) / np.sqrt(a**4 * (a**4 + 2)) - 1)
    assert np.allclose(g_profile(a), raw, rtol=1e-11)


def test_g_domain():
    with pytest.raises(DomainError):
        g_profile(0.0)
    with pytest.raises(DomainError):
        g_profile(np.array([1.0, -1.0]))


def test_g_strictly_decreasing():
    a = np.geomspace(1e-3, 1e3, 2000)
    assert np.all(np.diff(g_profile(a)) < 0)


def test_i_integrand_stable_at_large_a():
    a = 100.0
    assert i_integrand(a) * a**4 == pytest.approx(0.5, rel=1e-7)


def test_i0_gamma_vs_quadrature():
    assert abs(i0_closed_form() - i0_quadrature()) <= 1e-10
    assert i0_closed_form() == pytest.approx(0.4830507200711962, rel=1e-14)


def test_i0_independent_quadrature():
    # raw scipy quad over (0, inf) in the stable form, no tail model
    val = quad(lambda a: 1.0 / (a**4 + 1 + a * a * math.sqrt(a**4 + 2)), 0, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    assert I_PREFACTOR * val == pytest.approx(i0_closed_form(), rel=1e-11)


def test_printed_value_relation():
    # the printed decimal is I0 * 2^{1/3} to four digits, not I0 itself
    assert abs(I0_PRINTED - i0_closed_form()) > 0.1
    assert I0_PRINTED == pytest.approx(i0_closed_form() * 2 ** (1 / 3), rel=2e-4)


def test_i_epsilon_zero_and_small():
    assert i_epsilon(0.0) == i0_quadrature()
    d = i0_closed_form() - i_epsilon(0.01)
    assert d == pytest.approx(I_PREFACTOR * 0.01, rel=0.02)
    assert 0 <= d <= I_PREFACTOR * 0.01


def test_i_epsilon_tail():
    v = i_epsilon(10.0)
    assert 0 < v <= I_PREFACTOR / (6 * 1000.0) * 1.0001


def test_i_epsilon_slope():
    r = [(i0_closed_form() - i_epsilon(e)) / e for e in (1e-2, 1e-3)]
    assert abs(r[1] - I_PREFACTOR) < abs(r[0] - I_PREFACTOR)
    assert r[1] == pytest.approx(I_PREFACTOR, rel=1e-3)


def test_i_epsilon_domain():
    with pytest.raises(DomainError):
        i_epsilon(-1e-3)


def test_halving_tolerance_within_error_estimate():
    spec = QuadratureSpec()
    res = i_epsilon(0.3, spec, full_output=True)
    finer = i_epsilon(0.3, spec.halved())
    assert abs(res.value - finer) <= res.error + 1e-15


def test_quadrature_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(epsabs=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(cutoff=-1.0)
    with pytest.raises(DomainError):
        QuadratureSpec(limit=0)
    with pytest.raises(DomainError):
        i_epsilon(0.0, QuadratureSpec(cutoff=1.0, epsabs=1e-15))


def test_moments_finite_and_divergent():
    assert 0 < g_moment(2, 1, 0.0) < np.inf
    assert 0 < g_moment(4, 2, 0.0) < np.inf
    with pytest.raises(DivergenceError):
        g_moment(2, 2, 0.0)


def test_moment_against_direct_quad():
    direct = quad(lambda a: a**4 * g_profile(a) ** 2, 0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    assert g_moment(4, 2, 0.0) == pytest.approx(direct, rel=1e-8)
    direct = quad(lambda a: g_times_a2(a), 0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    assert g_moment(2, 1, 0.0) == pytest.approx(direct, rel=1e-8)


def test_m22_inverse_eps_rate():
    vals = [eps * g_moment(2, 2, eps) for eps in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
    assert all(v <= 0.125 for v in vals)
    assert vals[-1] == pytest.approx(0.125, rel=1e-2)
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])


def test_occupation_profile_cache():
    prof = OccupationProfile(0.1)
    a = prof.moment(2, 2)
    assert prof.moment(2, 2) == a
