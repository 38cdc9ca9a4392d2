import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import dawsn

from polaronlab.errors import ConfigurationError, DivergenceError, DomainError, ResolutionError
from polaronlab.special_math import g_moment
from polaronlab.trial_budget import (
    M22_BOUND,
    TRACE_PREFACTOR,
    TRACE_PREFACTOR_ALT,
    CoherentLatticeProbe,
    assemble_budget,
    budget_exponents,
    coherent_kernel_probe,
    gamma_square_trace,
    gamma_trace,
    parse_fraction,
    pekar_shape_constants,
    power_law_slope,
    sector_tail_check,
    zero_mode_average,
)

F = Fraction


@pytest.fixture(scope="module")
def shape():
    return pekar_shape_constants()


def test_parse_fraction():
    assert parse_fraction("4/15") == F(4, 15)
    assert parse_fraction(F(2, 7)) == F(2, 7)
    assert parse_fraction("2/5-2/35") == F(12, 35)
    with pytest.raises((ConfigurationError, DomainError, ValueError)):
        parse_fraction("four")


def test_default_exponents():
    ex = budget_exponents()
    assert ex["trace_gamma"] == F(3, 5)
    assert ex["trace_gamma_sq"] == F(13, 15)
    assert ex["r_main"] == F(7, 5) - F(4, 15)
    assert ex["r_loc"] == F(7, 5) - F(4, 35)
    assert ex["r_int"] == F(7, 5) - F(1, 35)
    assert ex["r_xc_momentum"] == F(7, 5) - F(4, 15)
    assert ex["r_xc_localization"] == F(127, 105)
    assert ex["kinetic_gamma_sq"] == F(163, 105)
    assert ex["relative_deficit"] == F(-1, 35)
    assert ex["deficit"] == F(48, 35)


@pytest.mark.parametrize("name", ["trace_gamma", "trace_gamma_sq", "r_main", "r_loc", "r_int"])
def test_term_slopes_match_exponents(shape, name):
    f = lambda n: assemble_budget(n, shape=shape).terms[name]
    ex = budget_exponents()[name]
    assert power_law_slope(f, 1e6, 1e8) == pytest.approx(float(ex), abs=1e-10)


@pytest.mark.parametrize("name", ["r_xc_momentum", "r_xc_localization"])
def test_xc_split_slopes(shape, name):
    f = lambda n: assemble_budget(n, shape=shape).values[name]
    assert power_law_slope(f, 1e6, 1e8) == pytest.approx(float(budget_exponents()[name]), abs=1e-10)


def test_kinetic_trace_slope_approaches_leading_monomial(shape):
    f = lambda n: assemble_budget(n, shape=shape).terms["kinetic_gamma_sq"]
    target = float(budget_exponents()["kinetic_gamma_sq"])
    s1, s2 = power_law_slope(f, 1e6, 1e8), power_law_slope(f, 1e40, 1e42)
    assert 7 / 5 < s1 < s2 < target
    assert s2 == pytest.approx(target, abs=1e-3)


def test_xc_bounded_by_split(shape):
    for n in (1e3, 1e6, 1e9):
        r = assemble_budget(n, shape=shape)
        assert r.r_xc <= r.values["r_xc_momentum"] + r.values["r_xc_localization"] + 1e-12 * r.r_xc
        assert r.r_xc >= max(r.values["r_xc_momentum"], r.values["r_xc_localization"])


def test_relative_deficit_exponent_large_cint(shape):
    f = lambda n: assemble_budget(n, C_int=1e14, shape=shape).relative_deficit
    assert power_law_slope(f, 1e6, 1e8) == pytest.approx(-1 / 35, abs=1e-10)


def test_relative_deficit_positive_and_decaying(shape):
    d = [assemble_budget(n, shape=shape).relative_deficit for n in (1e4, 1e8, 1e12)]
    assert all(x > 0 for x in d)
    assert d[0] > d[1] > d[2]


def test_exact_values_below_bounds(shape):
    r = assemble_budget(1e6, shape=shape)
    assert r.values["trace_gamma_exact"] <= r.trace_gamma * (1 + 1e-12)
    assert r.values["trace_gamma_sq_exact"] <= r.trace_gamma_sq * (1 + 1e-12)
    assert r.values["r_main_exact"] <= r.r_main * (1 + 1e-12)
    assert r.values["r_xc_exact"] <= r.r_xc * (1 + 1e-12)
    assert r.values["r_loc_exact"] <= r.r_loc * (1 + 1e-12)


def test_prefactor_ratio(shape):
    assert TRACE_PREFACTOR_ALT / TRACE_PREFACTOR == pytest.approx(math.sqrt(4 * math.pi), rel=1e-15)
    r = assemble_budget(1e6, shape=shape)
    assert r.values["trace_gamma_alt_prefactor"] / r.values["trace_gamma_exact"] == pytest.approx(
        math.sqrt(4 * math.pi), rel=1e-14
    )


def test_traces_in_eps(shape):
    eps = [0.0, 1e-3, 1e-2, 0.1, 0.5]
    t1 = [gamma_trace(1e4, e, shape.Q) for e in eps]
    assert all(a >= b for a, b in zip(t1, t1[1:]))
    t2 = [gamma_square_trace(1e4, e, shape.Q) for e in eps[1:]]
    assert all(a > b for a, b in zip(t2, t2[1:]))
    for e in eps[1:]:
        assert e * g_moment(2, 2, e) <= M22_BOUND
    with pytest.raises(DivergenceError):
        gamma_square_trace(1e4, 0.0, shape.Q)
    with pytest.raises(DomainError):
        gamma_trace(0.0, 0.1, shape.Q)


def test_mean_and_variance(shape):
    r = assemble_budget(1e6, shape=shape)
    assert r.mean_N == pytest.approx(1e6 + r.trace_gamma, rel=1e-15)
    # the variance bound dominates the excess of the mean
    assert r.variance_bound - r.n >= r.mean_N - r.n
    assert 2 * r.trace_gamma <= r.variance_bound - r.n
    ex = r.exponents
    assert ex["variance_excess"] >= ex["mean_excess"]


def test_budget_domain(shape):
    with pytest.raises(DomainError):
        assemble_budget(0.5, shape=shape)
    with pytest.raises(DomainError):
        assemble_budget(1e200, shape=shape)


def test_to_dict_serialisable(shape):
    import json

    d = assemble_budget(1e6, shape=shape).to_dict()
    json.dumps(d)
    assert d["exponents"]["r_int"] == "48/35"


# ---------------------------------------------------------------------------
# sector tails


def test_sector_tail_point_mass():
    w = np.zeros(50)
    w[20] = 1.0
    out = sector_tail_check(w, 1.0)
    assert out["lhs"] == 0.0 and out["variance"] == 0.0 and out["holds"]


def test_sector_tail_two_point():
    w = np.zeros(101)
    w[0] = w[100] = 0.5
    out = sector_tail_check(w, 10.0)
    assert out["mean"] == 50.0 and out["variance"] == 2500.0
    assert out["lhs"] == pytest.approx(0.5 * 100**1.4)
    assert out["holds"]


def test_sector_tail_ten_twenty():
    w = np.zeros(21)
    w[10] = w[20] = 0.5
    out = sector_tail_check(w, 3.0)
    assert out["lhs"] == pytest.approx(0.5 * 20**1.4)
    assert out["lhs"] <= out["middle"] <= out["rhs"] and out["holds"]


def test_sector_tail_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        w = rng.random(rng.integers(2, 200)) ** 4
        w /= w.sum()
        M = float(rng.uniform(0.1, 50))
        assert sector_tail_check(w, M)["holds"]


def test_sector_tail_domain():
    with pytest.raises(DomainError):
        sector_tail_check([0.5, 0.6], 1.0)
    with pytest.raises(DomainError):
        sector_tail_check([0.5, 0.5], 0.0)


# ---------------------------------------------------------------------------
# coherent-kernel probe


def _dawson_reference(ell, p, s=0.1):
    # Gaussian h = phi G: |h^|^2 is Gaussian with variance b per axis and
    # E|k + p|^-2 = sqrt2 D(p / sqrt(2b)) / (sqrt(b) p)
    b = 1 / s**2 + 1 / ell**2
    h2 = (2 / (math.pi * s * s)) ** 1.5 * (2 / (math.pi * ell * ell)) ** 1.5 * (math.pi / (2 * b)) ** 1.5
    return 4 * math.pi * h2 * math.sqrt(2) / (math.sqrt(b) * p) * dawsn(p / math.sqrt(2 * b))


def test_zero_mode_average():
    # independent midpoint sum; the 1/|u|^2 singularity limits it to percent level
    m = 120
    u = (np.arange(m) + 0.5) / m - 0.5
    U2 = u[:, None, None] ** 2 + u[None, :, None] ** 2 + u[None, None, :] ** 2
    assert zero_mode_average() == pytest.approx(np.mean(1 / U2), rel=2e-2)


def test_probe_gap_decreases():
    gaps = [coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=l))["gap"] for l in (0.4, 0.2, 0.1)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_probe_matches_continuum_at_large_p():
    for ell in (0.4, 0.2, 0.1):
        s = coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=ell, p=(45.0, 0, 0)))["sandwich"]
        assert s == pytest.approx(_dawson_reference(ell, 45.0), rel=2e-3)


def test_probe_box_refinement():
    ref = _dawson_reference(0.2, 15.0)
    errs = [
        abs(coherent_kernel_probe(CoherentLatticeProbe(box=L, cells=c, ell=0.2, p=(15.0, 0, 0)))["sandwich"] / ref - 1)
        for L, c in ((1.6, 64), (2.4, 96), (3.2, 128))
    ]
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_probe_spacing_refinement_converged():
    a = coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=0.2, p=(15.0, 0, 0)))["sandwich"]
    b = coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=96, ell=0.2, p=(15.0, 0, 0)))["sandwich"]
    assert a == pytest.approx(b, rel=1e-12)


def test_probe_direction_invariance():
    a = coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=0.2, p=(30.0, 0, 0)))["sandwich"]
    b = coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=0.2, p=(0, 0, -30.0)))["sandwich"]
    assert a == pytest.approx(b, rel=1e-12)


def test_probe_resolution_errors():
    with pytest.raises(ResolutionError):
        coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=32, ell=0.2))
    with pytest.raises(ResolutionError):
        coherent_kernel_probe(CoherentLatticeProbe(box=1.6, cells=64, ell=0.2, p=(100.0, 0, 0)))
    with pytest.raises(ResolutionError):
        coherent_kernel_probe(CoherentLatticeProbe(box=0.6, cells=64, ell=0.4, phi_width=0.15))
