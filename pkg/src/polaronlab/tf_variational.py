"""
Fermionic Thomas-Fermi problem with self-attraction

    E_U[rho] = (3/5) kappa int rho^{5/3} - (1 - U) D(rho, rho),
    kappa = (6 pi^2)^{2/3},   int rho = 1,  rho >= 0,

its bathtub origin, a Lane-Emden reference solution and the lower-bound
error budget for ``N`` fermions.

The Euler-Lagrange relation ``kappa rho^{2/3} = ((1-U) Phi_rho - mu)_+`` makes
``psi = (1-U) Phi - mu`` a polytrope of index 3/2:
``-Delta psi = c psi_+^{3/2}`` with ``c = 2(1-U)/(3 pi)``.  Dilations give
``e_U = (1-U)^2 e_0`` and the virial relation ``2 K = (1-U) D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ConfigurationError, ConvergenceError, DomainError
from .radial_field import RadialField, RadialGrid, coulomb_energy, integrate, newton_potential
from .trial_budget import BudgetReport

__all__ = [
    "KAPPA",
    "LIEB_OXFORD",
    "COULOMB_LEMMA_CONSTANT",
    "TfResult",
    "LaneEmden",
    "bathtub_kinetic",
    "bathtub_occupation",
    "bathtub_lattice",
    "tf_energy",
    "default_tf_grid",
    "minimize_tf",
    "lane_emden",
    "tf_lane_emden",
    "edge_exponent",
    "fermion_lower_budget",
]

KAPPA = (6.0 * math.pi**2) ** (2.0 / 3.0)
LIEB_OXFORD = 1.68
# deficit <= (8 pi)^{2/5} R^{1/5} ||rho||_1 ||rho||_{5/3} for a mollifier of support R
COULOMB_LEMMA_CONSTANT = (8.0 * math.pi) ** 0.4


# ---------------------------------------------------------------------------
# bathtub


def bathtub_kinetic(rho):
    """``(3/5) kappa rho^{5/3}``: least ``int p^2 m dp/(2pi)^3`` with ``0 <= m <= 1`` and mass ``rho``."""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise DomainError("density must be non-negative")
    out = 0.6 * KAPPA * r ** (5.0 / 3.0)
    return float(out) if out.ndim == 0 else out


def bathtub_occupation(rho: float):
    """The optimal occupation, the indicator of ``p^2 < (6 pi^2 rho)^{2/3}``."""
    if rho < 0:
        raise DomainError("density must be non-negative")
    pf2 = (6.0 * math.pi**2 * rho) ** (2.0 / 3.0)
    return lambda p: (np.asarray(p, dtype=float) ** 2 < pf2).astype(float)


def bathtub_lattice(rho: float, spacing: float) -> float:
    """Greedy bathtub on the momentum lattice ``spacing * Z^3``.

    Each site carries phase-space weight ``spacing^3 / (2 pi)^3``; sites are
    filled in order of increasing ``p^2`` (the last one fractionally) until
    the occupied weight equals ``rho``.
    """
    if rho < 0:
        raise DomainError("density must be non-negative")
    if rho == 0:
        return 0.0
    cell = spacing**3 / (2.0 * math.pi) ** 3
    pf = (6.0 * math.pi**2 * rho) ** (1.0 / 3.0)
    k = int(math.ceil(pf / spacing)) + 2
    ax = spacing * np.arange(-k, k + 1)
    p2 = np.sort((ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2).ravel())
    sites = rho / cell
    full = int(math.floor(sites))
    if full + 1 > p2.size:
        raise ConfigurationError("lattice box too small for the requested density")
    energy = p2[:full].sum() + (sites - full) * p2[full]
    return float(cell * energy)


# ---------------------------------------------------------------------------
# solver


@dataclass
class TfResult:
    density: RadialField
    energy: float
    multiplier: float
    support_radius: float
    U: float
    kinetic: float = float("nan")
    coulomb: float = float("nan")
    virial_residual: float = float("nan")
    fixed_point_residual: float = float("nan")
    iterations: int = 0
    polish_steps: int = 0
    converged: bool = False
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def reduced_energy(self) -> float:
        """``e_U / (1-U)^2``, independent of ``U``."""
        return self.energy / (1.0 - self.U) ** 2

    def summary(self) -> dict:
        return {
            "U": self.U,
            "e_U": self.energy,
            "e_U_over_1mU2": self.reduced_energy,
            "mu": self.multiplier,
            "support_radius": self.support_radius,
            "kinetic": self.kinetic,
            "coulomb": self.coulomb,
            "virial_residual": self.virial_residual,
            "fixed_point_residual": self.fixed_point_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def tf_energy(rho: RadialField, U: float) -> tuple[float, float, float]:
    """``(E, K, D)`` with ``K = (3/5) kappa int rho^{5/3}`` and ``D = D(rho, rho)``."""
    K = 0.6 * KAPPA * integrate(np.maximum(rho.values, 0.0) ** (5.0 / 3.0), rho.grid)
    D = coulomb_energy(rho, rho)
    return K - (1.0 - U) * D, K, D


def _ball_radius(U):
    # best uniform ball: K = (3/5) kappa (3/4pi)^{2/3} b^-2, D = 3/(5b)
    return 2.0 * KAPPA * (0.75 / math.pi) ** (2.0 / 3.0) / (1.0 - U)


def default_tf_grid(U: float, n_nodes: int = 2048, extent: float = 1.6) -> RadialGrid:
    """Uniform grid on ``[0, extent * b]`` with ``b`` the optimal uniform-ball radius.

    ``b`` scales as ``1/(1-U)``, so grids for different ``U`` are dilations
    of each other and the discrete problem inherits the exact scaling law.
    """
    return RadialGrid.uniform(extent * _ball_radius(U), n_nodes)


def _solve_mu(Phi, grid, U):
    """Chemical potential giving unit mass for the bathtub density in potential ``(1-U) Phi``."""
    V = (1.0 - U) * Phi

    def excess(mu):
        return integrate(np.maximum(V - mu, 0.0) ** 1.5, grid) / KAPPA**1.5 - 1.0

    hi = float(V.max())
    lo = min(0.0, hi) - 1.0
    while excess(lo) < 0:
        lo = hi - 2.0 * (hi - lo)
        if lo < -1e12:
            raise ConvergenceError("mass bracket for the chemical potential not found")
    mu = brentq(excess, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=500)
    new = np.maximum(V - mu, 0.0) ** 1.5 / KAPPA**1.5
    return mu, new / integrate(new, grid)


def _support(psi, r):
    pos = np.nonzero(psi > 0)[0]
    if pos.size == 0:
        return 0.0
    i = pos[-1]
    if i == r.size - 1:
        return math.inf
    return float(r[i] + (r[i + 1] - r[i]) * psi[i] / (psi[i] - psi[i + 1]))


def minimize_tf(
    U: float,
    grid: Optional[RadialGrid] = None,
    tol: float = 1e-11,
    max_iter: int = 2000,
    stall_tol: float = 1e-4,
    n_nodes: int = 2048,
) -> TfResult:
    """Unit-mass minimiser of ``E_U`` by damped fixed-point iteration.

    Each step computes the Newton potential of the current density, picks
    ``mu`` by root bracketing so the bathtub density has unit mass, and mixes
    it in with a factor ``theta``.  A mix is accepted only if the energy does
    not increase; otherwise ``theta`` is halved.  The iteration stops when the
    map is a fixed point to ``tol``.  Once no positive ``theta`` lowers the
    energy (it is then stationary to the discretisation's consistency
    level) the remaining contraction is done by undamped polish steps,
    which are not part of ``energy_history``.

    Parameters
    ----------
    U : float
        Repulsion strength in (0, 1); 0 is accepted as the purely attractive limit.
    grid : RadialGrid, optional
        Defaults to :func:`default_tf_grid`; enlarged automatically if the
        support reaches ``r_max``.
    tol : float
        Fixed-point tolerance on ``max|rho_new - rho| / max rho``.
    stall_tol : float
        Largest fixed-point residual still accepted when the energy has
        become stationary.

    Raises
    ------
    ConvergenceError
        On a damping-schedule failure far from the solution or when
        ``max_iter`` is exhausted.
    """
    if not 0 <= U < 1:
        raise DomainError("U must lie in [0, 1)")
    grid = default_tf_grid(U, n_nodes) if grid is None else grid
    for _ in range(6):
        res = _iterate(U, grid, tol, max_iter, stall_tol)
        if math.isfinite(res.support_radius):
            return res
        grid = RadialGrid.uniform(2.0 * grid.r_max, len(grid))
    raise ConvergenceError("density support keeps reaching the grid boundary")


def _iterate(U, grid, tol, max_iter, stall_tol):
    r = grid.nodes
    b = _ball_radius(U)
    rho = np.where(r < min(b, 0.9 * grid.r_max), 1.0, 0.0)
    if not rho.any():
        raise ConfigurationError("grid does not resolve the initial ball")
    rho /= integrate(rho, grid)
    field = RadialField(grid, rho, role="density")
    E = tf_energy(field, U)[0]
    history = [E]
    theta = 0.5
    d = math.inf
    stalled = False
    it = 0
    mu = float("nan")
    for it in range(1, max_iter + 1):
        Phi = newton_potential(field).values
        mu, new = _solve_mu(Phi, grid, U)
        d = float(np.max(np.abs(new - field.values)) / field.values.max())
        if d < tol:
            break
        while True:
            cand = RadialField(grid, (1.0 - theta) * field.values + theta * new, role="density")
            Ec = tf_energy(cand, U)[0]
            if Ec <= E:
                break
            theta *= 0.5
            if theta < 1e-8:
                stalled = True
                break
        if stalled:
            break
        field, E = cand, Ec
        history.append(E)
        theta = min(1.0, 2.0 * theta)
    else:
        raise ConvergenceError(f"TF iteration did not converge in {max_iter} steps", residual=d, iterations=it)
    if stalled and d > stall_tol:
        raise ConvergenceError(
            f"damping schedule exhausted at fixed-point residual {d:.3e}", residual=d, iterations=it
        )
    polish = 0
    if stalled:
        # the energy is stationary to the level at which the Simpson potential
        # and the trapezoidal energy disagree; plain iterations of the map
        # now contract to its fixed point without moving the energy
        while d >= tol and polish < max_iter:
            polish += 1
            field = RadialField(grid, new, role="density")
            mu, new = _solve_mu(newton_potential(field).values, grid, U)
            d = float(np.max(np.abs(new - field.values)) / field.values.max())
        if d >= tol:
            raise ConvergenceError(f"fixed-point polish stopped at residual {d:.3e}", residual=d, iterations=it)
    E, K, D = tf_energy(field, U)
    Phi = newton_potential(field).values
    mu, _ = _solve_mu(Phi, grid, U)
    R = _support((1.0 - U) * Phi - mu, r)
    return TfResult(
        density=field,
        energy=E,
        multiplier=mu,
        support_radius=R,
        U=U,
        kinetic=K,
        coulomb=D,
        virial_residual=abs(2.0 * K - (1.0 - U) * D) / (2.0 * K),
        fixed_point_residual=d,
        iterations=it,
        polish_steps=polish,
        converged=True,
        energy_history=history,
    )


def edge_exponent(res: TfResult, window=(0.002, 0.05)) -> float:
    """Log-log slope of ``rho`` against ``R - r`` just inside the support edge."""
    r = res.density.r
    R = res.support_radius
    x = (R - r) / R
    sel = (x > window[0]) & (x < window[1]) & (res.density.values > 0)
    if sel.sum() < 5:
        raise ConfigurationError("edge window holds too few grid nodes")
    return float(np.polyfit(np.log(x[sel]), np.log(res.density.values[sel]), 1)[0])


# ---------------------------------------------------------------------------
# Lane-Emden reference


@dataclass(frozen=True)
class LaneEmden:
    """Index-3/2 polytrope ``theta'' + 2 theta'/xi = -theta^{3/2}``, ``theta(0) = 1``.

    ``xi1`` is the first zero, ``omega = -xi1^2 theta'(xi1) = int xi^2 theta^{3/2}``
    and ``J = int_0^xi1 xi^2 theta^{5/2}``.
    """

    xi1: float
    omega: float
    J: float


@lru_cache(maxsize=None)
def lane_emden() -> LaneEmden:
    def rhs(x, y):
        t = max(y[0], 0.0)
        return [y[1], -2.0 * y[1] / x - t**1.5, x * x * t**2.5]

    def zero(x, y):
        return y[0]

    zero.terminal = True
    zero.direction = -1
    x0 = 1e-6
    y0 = [1.0 - x0**2 / 6.0, -x0 / 3.0, 0.0]
    sol = solve_ivp(rhs, (x0, 10.0), y0, events=zero, method="DOP853", rtol=1e-13, atol=1e-16)
    xi1 = float(sol.t_events[0][0])
    y1 = sol.y_events[0][0]
    return LaneEmden(xi1=xi1, omega=float(-xi1**2 * y1[1]), J=float(y1[2]))


def tf_lane_emden(U: float) -> dict:
    """Energy, chemical potential and support radius of the TF minimiser from the polytrope.

    With ``psi = psi_c theta(r/a)``: ``a^2 = 1/(c psi_c^{1/2})``, unit mass
    fixes ``psi_c^{3/4} = 6 pi^2 c^{3/2} / (4 pi omega)``, the virial relation
    gives ``E = -K`` and ``mu = (1-U)/R`` with ``R = a xi1``.
    """
    if not 0 <= U < 1:
        raise DomainError("U must lie in [0, 1)")
    le = lane_emden()
    c = 2.0 * (1.0 - U) / (3.0 * math.pi)
    psi_c = (6.0 * math.pi**2 * c**1.5 / (4.0 * math.pi * le.omega)) ** (4.0 / 3.0)
    a = (1.0 / (c * math.sqrt(psi_c))) ** 0.5
    K = 0.6 / (6.0 * math.pi**2) * 4.0 * math.pi * psi_c**2.5 * a**3 * le.J
    R = a * le.xi1
    return {"energy": -K, "kinetic": K, "mu": (1.0 - U) / R, "support_radius": R, "psi_c": psi_c, "a": a}


# ---------------------------------------------------------------------------
# lower-bound budget


def _min_power_difference(b, p, a, q):
    """``min_{x > 0} b x^p - a x^q`` for ``p > q > 0``; returns the (negative) minimum."""
    x = (q * a / (p * b)) ** (1.0 / (p - q))
    return -a * x**q * (1.0 - q / p)


def _min_power_sum(alpha, p, beta, q):
    """``min_{l > 0} alpha l^-p + beta l^q`` and its minimiser."""
    ell = (p * alpha / (q * beta)) ** (1.0 / (p + q))
    return alpha * ell**-p * (1.0 + p / q), ell


def fermion_lower_budget(
    N: float,
    U: float,
    K: float = 1.0,
    e0: Optional[float] = None,
    grad_g_sq: float = math.pi**2,
    lemma_constant: float = COULOMB_LEMMA_CONSTANT,
    lieb_oxford: float = LIEB_OXFORD,
    eps_exp: Fraction = Fraction(2, 33),
) -> BudgetReport:
    """Remainders of the ``N``-fermion lower bound at ``eps = N^{-eps_exp}``.

    The three terms are

    * ``main = 2 eps |e_0| (1-U)^2 N^{7/3}``, the bound on
      ``eps/(1-eps) N^{7/3} |e_U|`` valid for ``eps <= 1/2``;
    * ``rep  = -min_x [(eps K/2) x^{5/3} - a x^{10/11}]`` where
      ``a N x^{10/11}`` is the localisation/repulsion balance
      ``min_l [N ||grad g||^2 l^-2 + (1-U) C_L l^{1/5} N x]`` (``x = ||rho||_{5/3}``);
    * ``xc   = -min_x [(eps K/2) x^{5/3} - 1.68 U N^{1/2} x^{5/6}]``.

    For fixed constants they scale as ``eps (1-U)^2 N^{7/3}``,
    ``eps^{-6/5} (1-U)^2 N^{11/5}`` and ``eps^{-1} U^2 N``.  The Lieb-Thirring
    constant ``K`` is not known exactly and is always reported.
    """
    if not N >= 2:
        raise DomainError("N must be at least 2")
    if not 0 < U < 1:
        raise DomainError("U must lie in (0, 1)")
    if not K > 0:
        raise DomainError("Lieb-Thirring constant K must be positive")
    e0 = tf_lane_emden(0.0)["energy"] if e0 is None else e0
    eps = N ** -float(eps_exp)
    e_U = (1.0 - U) ** 2 * e0
    leading = N ** (7.0 / 3.0) * e_U
    main = 2.0 * eps * abs(e0) * (1.0 - U) ** 2 * N ** (7.0 / 3.0)
    # balance in l at unit x: value = coef * x^{10/11}
    coef, _ = _min_power_sum(N * grad_g_sq, 2.0, (1.0 - U) * lemma_constant * N, 0.2)
    rep = -_min_power_difference(0.5 * eps * K, 5.0 / 3.0, coef, 10.0 / 11.0)
    xc = -_min_power_difference(0.5 * eps * K, 5.0 / 3.0, lieb_oxford * U * math.sqrt(N), 5.0 / 6.0)
    e = eps_exp
    exps = {
        "main": Fraction(7, 3) - e,
        "rep": Fraction(11, 5) + Fraction(6, 5) * e,
        "xc": 1 + e,
    }
    exps["deficit"] = max(exps.values())
    exps["leading"] = Fraction(7, 3)
    terms = {"main": main, "rep": rep, "xc": xc}
    deficit = main + rep + xc
    return BudgetReport(
        kind="fermion-lower",
        n=float(N),
        eps=eps,
        ell=float("nan"),
        leading=leading,
        terms=terms,
        exponents=exps,
        total=leading - deficit,
        constants={
            "U": U,
            "K_lieb_thirring": K,
            "e0": e0,
            "grad_g_sq": grad_g_sq,
            "lemma_constant": lemma_constant,
            "lieb_oxford": lieb_oxford,
            "eps_exp": str(eps_exp),
        },
    )
