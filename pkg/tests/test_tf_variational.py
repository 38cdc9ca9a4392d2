import math
from fractions import Fraction

import numpy as np
import pytest

from polaronlab.errors import ConfigurationError, DomainError
from polaronlab.radial_field import RadialGrid, integrate
from polaronlab.records import fit_exponent
from polaronlab.tf_variational import (
    KAPPA,
    bathtub_kinetic,
    bathtub_lattice,
    bathtub_occupation,
    edge_exponent,
    fermion_lower_budget,
    lane_emden,
    minimize_tf,
    tf_energy,
    tf_lane_emden,
)
from polaronlab.trial_budget import power_law_slope

# frozen from the Lane-Emden shooting oracle
E0_TF = -0.029916925955


def test_bathtub_closed_form():
    assert bathtub_kinetic(0.0) == 0.0
    assert bathtub_kinetic(1.0) == pytest.approx(0.6 * (6 * math.pi**2) ** (2 / 3), rel=1e-15)
    rho = np.array([0.0, 0.3, 2.0])
    np.testing.assert_allclose(bathtub_kinetic(rho), 0.6 * KAPPA * rho ** (5 / 3), rtol=1e-15)
    with pytest.raises(DomainError):
        bathtub_kinetic(-1e-3)


def test_bathtub_occupation_is_fermi_ball():
    rho = 0.7
    m = bathtub_occupation(rho)
    pf = (6 * math.pi**2 * rho) ** (1 / 3)
    assert m(0.999 * pf) == 1.0 and m(1.001 * pf) == 0.0
    # phase-space mass and kinetic energy of the indicator
    p = np.linspace(0, 2 * pf, 20001)
    w = 4 * math.pi * p**2 / (2 * math.pi) ** 3
    from scipy.integrate import trapezoid

    assert trapezoid(w * m(p), p) == pytest.approx(rho, rel=1e-3)
    assert trapezoid(w * p**2 * m(p), p) == pytest.approx(bathtub_kinetic(rho), rel=1e-3)


def test_bathtub_lattice_converges():
    # greedy fill on spacing*Z^3; lattice-point counting gives an erratic error inside an s^2 envelope
    exact = bathtub_kinetic(1.0)
    spacings = (0.8, 0.4, 0.2, 0.1, 0.05)
    errs = [abs(bathtub_lattice(1.0, s) / exact - 1) for s in spacings]
    for s, e in zip(spacings, errs):
        assert e <= 0.01 * s**2
    assert errs[-1] < 1e-7


def test_bathtub_lattice_never_beats_continuum_by_much():
    # sites minimise sum p^2 m, so the lattice value tracks the closed form from either side
    for rho in (0.2, 1.0, 3.0):
        assert bathtub_lattice(rho, 0.1) == pytest.approx(bathtub_kinetic(rho), rel=1e-4)
    assert bathtub_lattice(0.0, 0.1) == 0.0
    with pytest.raises(DomainError):
        bathtub_lattice(-1.0, 0.1)


def test_lane_emden_standard_values():
    le = lane_emden()
    assert le.xi1 == pytest.approx(3.65375, abs=1e-5)
    assert le.omega == pytest.approx(2.71406, abs=1e-5)


def test_reduced_energy_constant(tf_results):
    e = [r.reduced_energy for r in tf_results.values()]
    assert max(e) - min(e) <= 1e-5 * abs(np.mean(e))
    assert np.mean(e) == pytest.approx(E0_TF, rel=1e-6)


def test_lane_emden_agreement(tf_results):
    for U, r in tf_results.items():
        ref = tf_lane_emden(U)
        assert r.energy == pytest.approx(ref["energy"], rel=1e-6)
        assert r.multiplier == pytest.approx(ref["mu"], rel=1e-6)
        assert r.support_radius == pytest.approx(ref["support_radius"], rel=1e-5)


def test_lane_emden_scaling():
    e0 = tf_lane_emden(0.0)["energy"]
    for U in (0.1, 0.5, 0.9):
        assert tf_lane_emden(U)["energy"] == pytest.approx((1 - U) ** 2 * e0, rel=1e-12)


def test_virial_and_mass(tf_results):
    for U, r in tf_results.items():
        assert r.converged
        assert r.virial_residual <= 1e-6
        assert 2 * r.kinetic == pytest.approx((1 - U) * r.coulomb, rel=1e-6)
        assert integrate(r.density.values, r.density.grid) == pytest.approx(1.0, abs=1e-12)
        E, K, D = tf_energy(r.density, U)
        assert E == pytest.approx(r.energy, rel=1e-12)


def test_energy_history_monotone(tf_results):
    for r in tf_results.values():
        assert np.all(np.diff(r.energy_history) <= 1e-15)


def test_compact_support_and_edge(tf_results):
    for r in tf_results.values():
        rho = r.density.values
        assert np.all(rho >= 0)
        assert np.all(rho[r.density.r > r.support_radius * 1.001] == 0)
        assert edge_exponent(r) == pytest.approx(1.5, abs=0.05)


def test_tf_domain():
    with pytest.raises(DomainError):
        minimize_tf(1.0)
    with pytest.raises(DomainError):
        minimize_tf(-0.1)
    with pytest.raises(DomainError):
        tf_lane_emden(1.0)


def test_tf_grid_too_coarse():
    with pytest.raises(ConfigurationError):
        minimize_tf(0.5, grid=RadialGrid.uniform(5000.0, 16))


def test_fermion_exponents():
    rep = fermion_lower_budget(1e6, 0.5)
    assert rep.exponents["deficit"] == Fraction(7, 3) - Fraction(2, 33)
    assert rep.exponents["main"] == Fraction(7, 3) - Fraction(2, 33)
    assert rep.exponents["rep"] == Fraction(7, 3) - Fraction(2, 33)
    assert rep.exponents["xc"] == 1 + Fraction(2, 33)


def test_fermion_slopes_exact():
    Ns = [10.0**k for k in range(4, 13)]
    reps = [fermion_lower_budget(N, 0.5) for N in Ns]
    for name in ("main", "rep", "xc"):
        ys = [r.terms[name] for r in reps]
        target = float(reps[0].exponents[name])
        f = lambda N, name=name: fermion_lower_budget(N, 0.5).terms[name]
        assert power_law_slope(f, Ns[0], Ns[-1]) == pytest.approx(target, abs=1e-12)
        assert fit_exponent(Ns, ys)["slope"] == pytest.approx(target, abs=1e-10)
    total = [r.terms["main"] + r.terms["rep"] + r.terms["xc"] for r in reps]
    assert fit_exponent(Ns[-2:], total[-2:])["slope"] == pytest.approx(25 / 11, abs=1e-3)


def test_fermion_u_dependence():
    r1 = fermion_lower_budget(1e8, 1e-3)
    r2 = fermion_lower_budget(1e8, 2e-3)
    assert r2.terms["xc"] / r1.terms["xc"] == pytest.approx(4.0, rel=1e-12)
    assert fermion_lower_budget(1e8, 1e-12).terms["xc"] < 1e-15 * fermion_lower_budget(1e8, 1e-12).terms["main"]
    # main and rep carry (1-U)^2
    a, b = fermion_lower_budget(1e8, 0.2), fermion_lower_budget(1e8, 0.6)
    assert b.terms["main"] / a.terms["main"] == pytest.approx((0.4 / 0.8) ** 2, rel=1e-12)
    assert b.terms["rep"] / a.terms["rep"] == pytest.approx((0.4 / 0.8) ** 2, rel=1e-12)


def test_fermion_constants_reported_and_domain():
    r = fermion_lower_budget(100.0, 0.5, K=2.5)
    assert r.constants["K_lieb_thirring"] == 2.5
    assert r.leading == pytest.approx(100.0 ** (7 / 3) * 0.25 * E0_TF, rel=1e-9)
    for bad in ({"N": 1.0, "U": 0.5}, {"N": 10.0, "U": 0.0}, {"N": 10.0, "U": 1.0}, {"N": 10.0, "U": 0.5, "K": 0.0}):
        with pytest.raises(DomainError):
            fermion_lower_budget(**bad)
