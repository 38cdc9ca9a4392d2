"""
Exact energies of symmetric product states ``psi = prod_j phi(x_j)`` and the
structural identities that connect them to the two-component Coulomb gas.

For a unit-mass radial orbital ``phi`` write ``T = ||grad phi||^2`` and
``D = D(phi^2, phi^2)`` with ``D(f, g) = 1/2 iint f(x) g(y) / |x - y|``.
Then, for ``N`` particles with repulsion ``U``,

    E = N T + (U N (N - 1) - N^2) D

since the pair repulsion contributes ``C(N, 2) * 2 D`` per unit ``U`` and
the self-attraction of the density ``N phi^2`` is ``N^2 D``.  All checks in
this module are evaluated from ``T``, ``D`` and radial Coulomb integrals on
the orbital's grid; there is no sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, ConvergenceError, DomainError, LemmaViolation
from .radial_field import (
    RadialField,
    RadialGrid,
    apply_laplacian,
    coulomb_energy,
    gaussian,
    integrate,
    kinetic_energy,
    laplacian_bands,
    lp_norm,
    newton_potential,
    radial_convolve,
)
from .records import SweepRecord, fit_exponent
from .tf_variational import COULOMB_LEMMA_CONSTANT

__all__ = [
    "ProductState",
    "HartreeResult",
    "CrossoverScan",
    "orbital_integrals",
    "product_energy",
    "optimal_dilation",
    "linearization_gap",
    "doubling_charge_sum",
    "doubling_identity_check",
    "smoothing_deficit",
    "smoothing_exponent",
    "single_polaron",
    "crossover_scan",
    "random_signed_field",
    "random_density",
    "identity_suite",
]

MASS_TOL = 1e-8


@dataclass(frozen=True)
class ProductState:
    """Symmetric product ``prod_j phi(x_j)`` of a unit-mass radial orbital."""

    orbital: RadialField
    N: int
    U: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("N must be a positive integer")
        if not self.U >= 0:
            raise DomainError("U must be non-negative")
        m = integrate(self.orbital.values**2, self.orbital.grid)
        if abs(m - 1.0) > MASS_TOL:
            raise DomainError(f"orbital must have unit L2 mass, got {m:.12g}")

    @classmethod
    def normalized(cls, orbital: RadialField, N: int, U: float = 1.0) -> "ProductState":
        """Rescale ``orbital`` to unit mass first."""
        m = integrate(orbital.values**2, orbital.grid)
        if not m > 0:
            raise DomainError("orbital vanishes")
        return cls(orbital.with_values(orbital.values / math.sqrt(m)), int(N), float(U))

    @property
    def density(self) -> RadialField:
        """One-particle density ``N phi^2``."""
        return RadialField(self.orbital.grid, self.N * self.orbital.values**2, role="density")


def _orbital_density(phi: RadialField) -> RadialField:
    return RadialField(phi.grid, phi.values**2, role="density")


def orbital_integrals(phi: RadialField) -> tuple[float, float]:
    """``(T, D)`` of the orbital: kinetic energy and ``D(phi^2, phi^2)``."""
    rho = _orbital_density(phi)
    return kinetic_energy(phi), coulomb_energy(rho, rho)


def product_energy(s: ProductState) -> float:
    """Energy of the symmetric product state, ``N T + (U N (N-1) - N^2) D``."""
    T, D = orbital_integrals(s.orbital)
    N = s.N
    return N * T + (s.U * N * (N - 1) - N * N) * D


def optimal_dilation(T: float, coefficient: float, N: int) -> tuple[float, float]:
    """Best dilation ``phi -> lam^{3/2} phi(lam x)`` of ``N T lam^2 + coefficient D lam``.

    Takes the Coulomb coefficient already multiplied by ``D``.  Returns
    ``(lam, energy)``; with a non-negative coefficient the infimum is 0 at
    ``lam -> 0``.
    """
    if coefficient >= 0:
        return 0.0, 0.0
    lam = -coefficient / (2.0 * N * T)
    return lam, -coefficient**2 / (4.0 * N * T)


def linearization_gap(s: ProductState, sigma: RadialField) -> dict:
    """Excess of the linearised Hamiltonian over the energy functional.

    For ``U = 1``, ``(psi, H_sigma psi) = N T - 2 N D(sigma, phi^2)
    + N (N-1) D + D(sigma, sigma)`` and subtracting the functional leaves
    ``D(sigma - N phi^2, sigma - N phi^2)``.  Both the difference and the
    direct Coulomb energy are returned; ``gap`` is the difference.

    Raises
    ------
    LemmaViolation
        If the gap is negative beyond rounding.
    """
    if s.U != 1.0:
        raise DomainError("the linearisation identity is stated for U = 1")
    phi = s.orbital
    if sigma.grid is not phi.grid and not np.array_equal(sigma.grid.nodes, phi.grid.nodes):
        raise ConfigurationError("sigma must live on the orbital's grid")
    N = s.N
    T, D = orbital_integrals(phi)
    rho = _orbital_density(phi)
    sig = RadialField(phi.grid, sigma.values, role="signed")
    d_cross = coulomb_energy(sig, rho)
    d_sigma = coulomb_energy(sig, sig)
    expectation = N * T - 2.0 * N * d_cross + N * (N - 1) * D + d_sigma
    functional = product_energy(s)
    gap = expectation - functional
    diff = RadialField(phi.grid, sigma.values - N * phi.values**2, role="signed")
    direct = coulomb_energy(diff, diff)
    scale = max(abs(expectation), abs(functional), d_sigma, N * N * D)
    if gap < -1e-12 * scale:
        raise LemmaViolation(f"linearisation gap {gap:.3e} is negative")
    return {
        "expectation": expectation,
        "functional": functional,
        "gap": gap,
        "direct": direct,
        "residual": abs(gap - direct) / scale,
    }


def doubling_charge_sum(N: int) -> int:
    """``sum_{i<j} e_i e_j`` for ``e = (+1)^N (-1)^N``, by enumerating pairs."""
    e = np.concatenate((np.ones(N, dtype=np.int64), -np.ones(N, dtype=np.int64)))
    prod = np.outer(e, e)
    return int(np.triu(prod, k=1).sum())


def doubling_identity_check(s: ProductState) -> dict:
    """Two-component doubling on ``psi (x) psi`` with charges ``(+1)^N (-1)^N``.

    ``lhs`` is the expectation of the neutral ``2N``-body Hamiltonian,
    ``2 N T + 2 D * sum_{i<j} e_i e_j`` with the charge sum enumerated;
    ``rhs = 2 E`` from :func:`product_energy`.
    """
    if s.U != 1.0:
        raise DomainError("the doubling identity is stated for U = 1")
    N = s.N
    T, D = orbital_integrals(s.orbital)
    charges = doubling_charge_sum(N)
    counted = 2 * math.comb(N, 2) - N * N
    lhs = 2.0 * N * T + 2.0 * D * charges
    rhs = 2.0 * product_energy(s)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs) / max(1.0, abs(rhs)),
        "charge_sum": charges,
        "charge_count": counted,
    }


def smoothing_deficit(rho: RadialField, sigma: RadialField, constant: float = COULOMB_LEMMA_CONSTANT) -> dict:
    """Loss of Coulomb self-energy under smearing by a mollifier of support ``R``.

    ``deficit = D(rho, rho) - D(rho*sigma, rho*sigma)`` and
    ``ratio = deficit / (||rho||_1 ||rho||_{5/3})``, compared with
    ``constant * R^{1/5}`` (``bound``) and, for reference, ``constant * R^{1/10}``.

    Raises
    ------
    LemmaViolation
        If the deficit is negative or the ratio exceeds ``bound``.
    """
    if sigma.support_radius is None:
        raise ConfigurationError("mollifier needs a declared support radius")
    R = float(sigma.support_radius)
    smeared = radial_convolve(rho, sigma)
    rs = RadialField(rho.grid, rho.values, role="signed")
    ss = RadialField(rho.grid, smeared.values, role="signed")
    d0 = coulomb_energy(rs, rs)
    d1 = coulomb_energy(ss, ss)
    deficit = d0 - d1
    norm = lp_norm(rho, 1.0) * lp_norm(rho, 5.0 / 3.0)
    ratio = deficit / norm
    bound = constant * R**0.2
    out = {
        "deficit": deficit,
        "ratio": ratio,
        "R": R,
        "bound": bound,
        "bound_tenth": constant * R**0.1,
        "self_energy": d0,
    }
    if deficit < -1e-12 * d0:
        raise LemmaViolation(f"smoothing deficit {deficit:.3e} is negative at R={R:g}")
    if ratio > bound:
        raise LemmaViolation(f"smoothing ratio {ratio:.3e} exceeds {bound:.3e} at R={R:g}")
    return out


def smoothing_exponent(rho: RadialField, radii: Sequence[float] = (0.2, 0.1, 0.05, 0.025), mollifier=None) -> dict:
    """Fit ``deficit ~ R^s`` over a ladder of support radii."""
    from .radial_field import uniform_ball

    make = uniform_ball if mollifier is None else mollifier
    rows = [smoothing_deficit(rho, make(R, rho.grid)) for R in radii]
    fit = fit_exponent([r["R"] for r in rows], [r["deficit"] for r in rows])
    return {"rows": rows, **fit}


# ---------------------------------------------------------------------------
# product baseline


@dataclass
class HartreeResult:
    """Minimiser of ``T - D(phi^2, phi^2)`` at unit mass."""

    orbital: RadialField
    energy: float
    kinetic: float
    coulomb: float
    multiplier: float
    virial_residual: float
    iterations: int

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "kinetic": self.kinetic,
            "coulomb": self.coulomb,
            "multiplier": self.multiplier,
            "virial_residual": self.virial_residual,
            "iterations": self.iterations,
        }


def single_polaron(grid: Optional[RadialGrid] = None, tol: float = 1e-12, max_iter: int = 500) -> HartreeResult:
    """Single-polaron energy ``min T - D(phi^2, phi^2)`` by self-consistent inverse iteration.

    Each step freezes the Hartree potential ``V = |x|^-1 * phi^2`` and takes
    one shifted inverse-iteration step for the lowest state of ``-Delta - V``
    on ``u = r phi``.  The default grid is uniform to ``r = 160`` with 2048
    nodes, about 45 decay lengths.

    Raises
    ------
    ConvergenceError
        If the orbital update does not fall below ``tol``.
    """
    grid = RadialGrid.uniform(160.0, 2048) if grid is None else grid
    r = grid.nodes
    ab = laplacian_bands(grid)
    # the optimal Gaussian, width 6 sqrt(pi), is the seed
    u = r * gaussian(grid, 6.0 * math.sqrt(math.pi)).values
    d = math.inf
    for it in range(1, max_iter + 1):
        V = newton_potential(RadialField(grid, (u / r) ** 2, role="density")).values
        mu = np.dot(u, apply_laplacian(grid, u) - V * u) / np.dot(u, u)
        a = ab.copy()
        a[2] -= V + mu - 0.5 * abs(mu)
        new = solve_banded((2, 2), a, u)
        new = np.abs(new) / math.sqrt(integrate((new / r) ** 2, grid))
        d = math.sqrt(integrate(((new - u) / r) ** 2, grid))
        u = new
        if d < tol:
            break
    else:
        raise ConvergenceError(f"Hartree iteration stopped at update {d:.3e}", residual=d, iterations=max_iter)
    phi = RadialField(grid, u / r)
    T, D = orbital_integrals(phi)
    return HartreeResult(
        orbital=phi,
        energy=T - D,
        kinetic=T,
        coulomb=D,
        multiplier=float(mu),
        virial_residual=abs(2.0 * T - D) / D,
        iterations=it,
    )


@dataclass
class CrossoverScan:
    """Product baseline against the correlated upper bound over ``n``."""

    records: list
    crossover: Optional[float]
    leading_crossover: float
    single_polaron_energy: float
    A: float
    extra: dict = field(default_factory=dict)


def crossover_scan(n_values: Sequence[float], C_int: float = 1.0, baseline: Optional[HartreeResult] = None) -> CrossoverScan:
    """Compare ``n e_1`` (best product state at ``U = 1``) with the coherent-state bound.

    The product energy at ``U = 1`` is ``n (T - D)``, minimised by the
    single-polaron orbital for every ``n``.  The correlated value is the total
    of :func:`assemble_budget` at the default exponents.  ``crossover`` is the
    first listed ``n`` where the correlated bound lies strictly below the
    product energy; ``leading_crossover`` solves ``A n^{7/5} = |e_1| n``.
    """
    from .trial_budget import assemble_budget, pekar_shape_constants

    baseline = single_polaron() if baseline is None else baseline
    shape = pekar_shape_constants()
    e1 = baseline.energy
    records = []
    crossover = None
    for n in n_values:
        b = assemble_budget(float(n), C_int=C_int, shape=shape)
        product = n * e1
        wins = b.total < product
        if wins and crossover is None:
            crossover = float(n)
        records.append(
            SweepRecord(
                kind="crossover",
                inputs={"n": float(n), "C_int": C_int},
                outputs={
                    "product_energy": product,
                    "correlated_bound": b.total,
                    "correlated_leading": b.leading,
                    "correlated_wins": float(wins),
                },
            )
        )
    return CrossoverScan(
        records=records,
        crossover=crossover,
        leading_crossover=(abs(e1) / shape.A) ** 2.5,
        single_polaron_energy=e1,
        A=shape.A,
    )


# ---------------------------------------------------------------------------
# identity suite


def random_signed_field(grid: RadialGrid, rng: np.random.Generator, terms: int = 3) -> RadialField:
    """Sum of a few signed Gaussian shells with random centres and widths."""
    r = grid.nodes
    vals = np.zeros_like(r)
    for _ in range(terms):
        c = rng.uniform(0.0, 0.2 * grid.r_max)
        w = rng.uniform(0.3, 3.0)
        vals += rng.normal() * np.exp(-(((r - c) / w) ** 2))
    return RadialField(grid, vals, role="signed")


def random_density(grid: RadialGrid, rng: np.random.Generator, terms: int = 3) -> RadialField:
    """Non-negative mixture of Gaussian shells."""
    r = grid.nodes
    vals = np.zeros_like(r)
    for _ in range(terms):
        c = rng.uniform(0.0, 0.2 * grid.r_max)
        w = rng.uniform(0.3, 3.0)
        vals += rng.uniform(0.1, 2.0) * np.exp(-(((r - c) / w) ** 2))
    return RadialField(grid, vals, role="density")


def identity_suite(
    seed: int = 0,
    n_sigma: int = 50,
    doubling_N: Sequence[int] = (1, 2, 5, 20),
    n_tail: int = 1000,
    n_smoothing: int = 100,
    radii: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
    tol: float = 1e-10,
    min_slope: float = 0.15,
) -> dict:
    """Run every product-state identity on seeded random inputs.

    Returns ``{name: {passed, ...}}`` plus an overall ``passed`` flag.
    """
    from .radial_field import smooth_bump, uniform_ball
    from .trial_budget import sector_tail_check

    rng = np.random.default_rng(seed)
    grid = RadialGrid.uniform(30.0, 1024)
    phi = gaussian(grid, 1.5)
    out = {}

    s = ProductState.normalized(phi, 5, 1.0)
    worst = 0.0
    negative = 0
    for _ in range(n_sigma):
        try:
            res = linearization_gap(s, random_signed_field(grid, rng))
        except LemmaViolation:
            negative += 1
            continue
        worst = max(worst, res["residual"])
    out["linearization"] = {"passed": worst <= tol and negative == 0, "max_residual": worst, "count": n_sigma}

    worst = 0.0
    for N in doubling_N:
        res = doubling_identity_check(ProductState.normalized(phi, N, 1.0))
        worst = max(worst, res["residual"])
        if res["charge_sum"] != res["charge_count"]:
            worst = math.inf
    out["doubling"] = {"passed": worst <= tol, "max_residual": worst, "N": list(doubling_N)}

    failures = 0
    for _ in range(n_tail):
        size = int(rng.integers(2, 200))
        w = rng.random(size) ** rng.uniform(0.5, 8.0)
        w /= w.sum()
        res = sector_tail_check(w, M=float(rng.uniform(0.1, 50.0)))
        failures += not res["holds"]
    out["sector_tail"] = {"passed": failures == 0, "failures": failures, "count": n_tail}

    fine = RadialGrid.uniform(12.0, 2048)
    worst_ratio = 0.0
    failures = 0
    for _ in range(n_smoothing):
        rho = random_density(fine, rng)
        R = float(rng.uniform(0.05, 1.0))
        sigma = uniform_ball(R, fine) if rng.random() < 0.5 else smooth_bump(R, fine)
        try:
            res = smoothing_deficit(rho, sigma)
        except LemmaViolation:
            failures += 1
            continue
        worst_ratio = max(worst_ratio, res["ratio"] / res["bound"])
    out["smoothing_sign"] = {"passed": failures == 0, "failures": failures, "max_ratio_over_bound": worst_ratio}

    rho = gaussian(fine, 1.0, norm="l1", role="density")
    fit = smoothing_exponent(rho, radii)
    out["smoothing_exponent"] = {"passed": fit["slope"] >= min_slope, "slope": fit["slope"], "radii": list(radii)}

    out["passed"] = all(v["passed"] for v in out.values())
    return out
