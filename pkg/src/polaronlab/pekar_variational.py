"""
Ground state of the radial functional

    E[phi] = ||grad phi||^2 - I int |phi|^{5/2}     subject to    int phi^2 = n.

The solver works with the reduced function ``u = r phi`` on a uniform grid,
where ``-Delta`` becomes the pentadiagonal operator of
:func:`~polaronlab.radial_field.laplacian_bands`.  The discrete energy is

    T_h = 4 pi h u.(L u),   P_h = 4 pi sum_i w_i r_i^{-1/2} u_i^{5/2},
    M_h = 4 pi sum_i w_i u_i^2,

with ``w_i`` the trapezoidal weights, so that the discrete Euler-Lagrange
residual below is exactly the gradient of ``T_h - I P_h + mu M_h``.

Two stages:

1. normalised semi-implicit gradient flow from the best Gaussian, with an
   adaptive time step that backtracks whenever the energy would increase;
2. Newton polish of the bordered system ``(F(u, mu), M_h(u) - n) = 0``.

An independent reference is :func:`soliton_oracle`, which shoots the scale
free problem ``-Delta u + u = u^{3/2}`` and maps its integrals back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .errors import ConfigurationError, ConvergenceError, DomainError, InitializationError
from .radial_field import (
    FOUR_PI,
    RadialField,
    RadialGrid,
    apply_laplacian,
    decay_rate,
    integrate,
    kinetic_energy,
    laplacian_bands,
    lp_norm,
    rescale,
)
from .special_math import i0_closed_form

__all__ = [
    "VariationalResult",
    "SolitonOracle",
    "ShapeIntegrals",
    "gaussian_seed_width",
    "default_grid",
    "pekar_energy",
    "el_residual",
    "minimize_pekar",
    "soliton_oracle",
    "rescale_minimizer",
    "shape_integrals",
]

# P for the unit-mass Gaussian of width 1: (2/pi)^{15/8} (2 pi / 5)^{3/2}
_GAUSS_P = (2.0 / math.pi) ** 1.875 * (0.4 * math.pi) ** 1.5


@dataclass
class VariationalResult:
    """Outcome of a constrained minimisation.

    ``energy_history`` holds the accepted gradient-flow energies only; the
    Newton polish is reported separately through ``newton_steps``.
    """

    minimizer: RadialField
    energy: float
    multiplier: float
    virial_residual: float
    iterations: int
    converged: bool
    kinetic: float = float("nan")
    potential: float = float("nan")
    mass: float = float("nan")
    coupling: float = float("nan")
    residual: float = float("nan")
    newton_steps: int = 0
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def A(self) -> float:
        """``-energy / n^{7/5}``, the mass-independent constant."""
        return -self.energy / self.mass**1.4

    def summary(self) -> dict:
        Q = integrate(self.minimizer.values**1.5, self.minimizer.grid)
        return {
            "A": self.A,
            "energy": self.energy,
            "T": self.kinetic,
            "P": self.potential,
            "Q": Q,
            "mu": self.multiplier,
            "mass": self.mass,
            "I": self.coupling,
            "virial_residual": self.virial_residual,
            "residual": self.residual,
            "iterations": self.iterations,
            "newton_steps": self.newton_steps,
            "converged": self.converged,
        }


class ShapeIntegrals(NamedTuple):
    P: float
    Q: float
    T: float
    decay_rate: float


# ---------------------------------------------------------------------------
# Gaussian family and grid sizing


def gaussian_seed_width(n: float, I: float) -> float:
    """Width ``l`` of the best ``sqrt(n)``-normalised Gaussian ``exp(-r^2/l^2)``.

    On that family ``T = 3 n / l^2`` and ``P = c n^{5/4} l^{-3/4}``, so the
    energy is stationary at ``l^{5/4} = 8 / (I c n^{1/4})``.
    """
    return (8.0 / (I * _GAUSS_P * n**0.25)) ** 0.8


def _gaussian_mu(n, I):
    ell = gaussian_seed_width(n, I)
    T = 3.0 * n / ell**2
    P = _GAUSS_P * n**1.25 * ell**-0.75
    return (1.25 * I * P - T) / n


def default_grid(n: float = 1.0, I: Optional[float] = None, n_nodes: int = 1024, decay_lengths: float = 32.0) -> RadialGrid:
    """Uniform grid reaching ``decay_lengths / sqrt(mu)`` with ``mu`` from the Gaussian seed."""
    I = i0_closed_form() if I is None else I
    return RadialGrid.uniform(decay_lengths / math.sqrt(_gaussian_mu(n, I)), n_nodes)


# ---------------------------------------------------------------------------
# discrete functional


def pekar_energy(phi: RadialField, I: float) -> float:
    """``||grad phi||^2 - I ||phi||_{5/2}^{5/2}``."""
    return kinetic_energy(phi) - I * lp_norm(phi, 2.5) ** 2.5


class _Problem:
    """Arrays shared by the flow and the Newton stage."""

    def __init__(self, grid: RadialGrid, n: float, I: float):
        if grid.scheme != "uniform":
            raise ConfigurationError("the Pekar solver needs a uniform grid")
        self.grid = grid
        self.n = n
        self.I = I
        self.h = grid.spacing
        self.r = grid.nodes
        self.w = grid.weights
        self.c = self.w / self.h  # 1 except 1/2 at r_max
        self.s = self.c / np.sqrt(self.r)
        self.bands = laplacian_bands(grid)

    def mass(self, u):
        return FOUR_PI * np.dot(self.w, u * u)

    def parts(self, u):
        T = FOUR_PI * self.h * np.dot(u, apply_laplacian(self.grid, u))
        P = FOUR_PI * self.h * np.dot(self.s, np.maximum(u, 0.0) ** 2.5)
        return T, P

    def energy(self, u):
        T, P = self.parts(u)
        return T - self.I * P

    def force(self, u):
        return 1.25 * self.I * self.s * np.maximum(u, 0.0) ** 1.5

    def multiplier(self, u):
        # Rayleigh quotient: u.F = 0 solved for mu
        Lu = apply_laplacian(self.grid, u)
        return (np.dot(u, self.force(u)) - np.dot(u, Lu)) / np.dot(self.c * u, u)

    def residual(self, u, mu):
        Lu = apply_laplacian(self.grid, u)
        F = Lu - self.force(u) + mu * self.c * u
        return F, float(np.linalg.norm(F) / (abs(mu) * np.linalg.norm(self.c * u)))

    def normalize(self, u):
        m = self.mass(u)
        if not m > 0:
            raise InitializationError("iterate collapsed to the zero field")
        return u * math.sqrt(self.n / m)

    def field(self, u):
        return RadialField(self.grid, u / self.r, role="amplitude")


def el_residual(phi: RadialField, I: float, mu: Optional[float] = None) -> tuple[np.ndarray, float]:
    """Discrete residual of ``-Delta phi - (5/4) I phi^{3/2} + mu phi = 0`` in reduced form.

    Returns the residual vector (for ``u = r phi``, already divided by
    ``8 pi h``) and its norm relative to ``|mu| ||u||``.  ``mu`` defaults to
    the Rayleigh quotient.
    """
    prob = _Problem(phi.grid, 1.0, I)
    u = phi.r * phi.values
    mu = prob.multiplier(u) if mu is None else mu
    return prob.residual(u, mu)


# ---------------------------------------------------------------------------
# solver


def _flow(prob: _Problem, u, tol, max_iter, dt, dt_max):
    E = prob.energy(u)
    history = [E]
    it = 0
    res = math.inf
    while it < max_iter:
        it += 1
        # the current multiplier is treated implicitly: as dt grows the step
        # tends to the shifted fixed-point map u <- (L + mu)^{-1} f(u)
        mu = max(prob.multiplier(u), 0.0)
        rhs = prob.c * u + dt * prob.force(u)
        ab = dt * prob.bands
        ab[2] += prob.c * (1.0 + dt * mu)
        trial = prob.normalize(np.maximum(solve_banded((2, 2), ab, rhs), 0.0))
        E_new = prob.energy(trial)
        if E_new > E:
            dt *= 0.5
            if dt < 1e-12:
                # energy is stationary to rounding; the residual decides convergence
                break
            continue
        u, E = trial, E_new
        history.append(E)
        dt = min(dt * 1.5, dt_max)
        res = prob.residual(u, prob.multiplier(u))[1]
        if res < tol:
            break
    return u, history, it, res


def _newton(prob: _Problem, u, tol, max_steps):
    mu = prob.multiplier(u)
    F, res = prob.residual(u, mu)
    steps = 0
    while res > tol and steps < max_steps:
        steps += 1
        G = prob.mass(u) - prob.n
        ab = prob.bands.copy()
        ab[2] += mu * prob.c - 1.875 * prob.I * prob.s * np.sqrt(np.maximum(u, 0.0))
        rhs = np.column_stack((F, prob.c * u))
        sol = solve_banded((2, 2), ab, rhs)
        a, b = sol[:, 0], sol[:, 1]
        wu = FOUR_PI * 2.0 * prob.w * u
        dmu = (G - np.dot(wu, a)) / np.dot(wu, b)
        du = -a - dmu * b
        # damped step: accept the first fraction that lowers the residual
        lam = 1.0
        while True:
            u_new = u + lam * du
            mu_new = mu + lam * dmu
            if np.all(u_new >= 0):
                F_new, res_new = prob.residual(u_new, mu_new)
                if res_new < res:
                    break
            lam *= 0.5
            if lam < 1e-4:
                return u, mu, res, steps
        u, mu, F, res = u_new, mu_new, F_new, res_new
    return u, mu, res, steps


def minimize_pekar(
    mass: float = 1.0,
    I: Optional[float] = None,
    grid: Optional[RadialGrid] = None,
    tol: float = 1e-10,
    max_iter: int = 5000,
    flow_tol: float = 1e-4,
    polish: bool = True,
    seed: Optional[RadialField] = None,
) -> VariationalResult:
    """Minimise ``||grad phi||^2 - I int phi^{5/2}`` with ``int phi^2 = mass``.

    Parameters
    ----------
    mass, I : float
        Constraint value ``n > 0`` and coupling ``I > 0`` (default ``I_0``).
    grid : RadialGrid, optional
        Uniform grid; :func:`default_grid` otherwise.
    tol : float
        Target relative Euler-Lagrange residual.
    flow_tol : float
        Residual at which the gradient flow hands over to Newton.
    polish : bool
        If False the flow runs all the way to ``tol`` (slow, but every step
        is energy decreasing).
    seed : RadialField, optional
        Starting amplitude; the optimal Gaussian otherwise.

    Raises
    ------
    ConvergenceError
        If ``tol`` is not met; carries the last residual.
    InitializationError
        If the iterate collapses to zero.
    """
    I = i0_closed_form() if I is None else float(I)
    if not mass > 0:
        raise DomainError("mass must be positive")
    if not I > 0:
        raise DomainError("coupling I must be positive")
    grid = default_grid(mass, I) if grid is None else grid
    prob = _Problem(grid, float(mass), I)

    if seed is None:
        ell = gaussian_seed_width(mass, I)
        phi0 = math.sqrt(mass) * (2.0 / (math.pi * ell**2)) ** 0.75 * np.exp(-(prob.r / ell) ** 2)
    else:
        phi0 = np.maximum(np.asarray(seed.values, dtype=float), 0.0)
    u = prob.normalize(prob.r * phi0)

    mu0 = _gaussian_mu(mass, I)
    dt_max = 1e3 / mu0
    u, history, iters, res = _flow(prob, u, flow_tol if polish else tol, max_iter, 1.0 / mu0, dt_max)
    steps = 0
    if polish:
        u, mu, res, steps = _newton(prob, u, tol, 50)
    else:
        mu = prob.multiplier(u)
    u = np.maximum(u, 0.0)
    T, P = prob.parts(u)
    E = T - I * P
    vir = abs(T - 0.375 * I * P) / T
    converged = res <= tol
    result = VariationalResult(
        minimizer=prob.field(u),
        energy=E,
        multiplier=float(mu),
        virial_residual=vir,
        iterations=iters,
        converged=converged,
        kinetic=T,
        potential=P,
        mass=prob.mass(u),
        coupling=I,
        residual=res,
        newton_steps=steps,
        energy_history=history,
    )
    if not converged:
        raise ConvergenceError(f"Pekar solver stopped at residual {res:.3e} > {tol:.1e}", residual=res, iterations=iters)
    return result


# ---------------------------------------------------------------------------
# shooting oracle


@dataclass(frozen=True)
class SolitonOracle:
    """Ground state of ``-Delta u + u = u^{3/2}`` and its image for given ``(n, I)``.

    The map ``phi(r) = alpha u(beta r)`` with ``alpha = 16 beta^4 / (25 I^2)``
    turns the scale-free equation into the constrained Euler-Lagrange
    equation with ``mu = beta^2``; ``beta`` is fixed by the mass.
    """

    u0: float
    N_u: float
    T_u: float
    P_u: float
    alpha: float
    beta: float
    kinetic: float
    potential: float
    energy: float
    multiplier: float

    def profile(self, r):
        """``phi(r)`` by re-integrating the soliton (for plots and spot checks)."""
        sol = _shoot(self.u0, dense=True)
        rs = np.asarray(r, dtype=float) * self.beta
        end = sol.t[-1]
        out = np.where(rs <= end, sol.sol(np.minimum(rs, end))[0], 0.0)
        return self.alpha * np.maximum(out, 0.0)


def _soliton_rhs(r, y):
    u, v = y[0], y[1]
    up = max(u, 0.0)
    r2 = FOUR_PI * r * r
    return [v, -2.0 * v / r + u - up**1.5, r2 * u * u, r2 * v * v, r2 * up**2.5]


def _cross(r, y):
    return y[0]


_cross.terminal = True
_cross.direction = -1


def _turn(r, y):
    return y[1]


_turn.terminal = True
_turn.direction = 1


def _shoot(u0, r_end=80.0, dense=False):
    r0 = 1e-6
    a = (u0 - u0**1.5) / 6.0  # u = u0 + a r^2 + O(r^4)
    y0 = [u0 + a * r0**2, 2.0 * a * r0, 0.0, 0.0, 0.0]
    return solve_ivp(
        _soliton_rhs, (r0, r_end), y0, method="DOP853", events=[_cross, _turn],
        rtol=1e-12, atol=1e-16, dense_output=dense,
    )


def soliton_oracle(I: Optional[float] = None, n: float = 1.0, bracket=(1.0, 5.0)) -> SolitonOracle:
    """Shooting solution of ``u'' + 2u'/r - u + u^{3/2} = 0`` mapped to ``(n, I)``.

    The central value ``u(0)`` is bisected to machine precision: too large a
    value drives ``u`` through zero, too small a value turns it back up.
    The integrals ``N_u, T_u, P_u`` are carried along as extra ODE
    components up to the point where the shot departs from the bound state;
    the neglected tail is of relative size ``exp(-2 r_stop)``.
    """
    I = i0_closed_form() if I is None else float(I)
    lo, hi = bracket
    if _shoot(lo).t_events[0].size or not _shoot(hi).t_events[0].size:
        raise ConfigurationError("shooting bracket does not enclose the ground state")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _shoot(mid).t_events[0].size:
            hi = mid
        else:
            lo = mid
    sol = _shoot(lo)
    N_u, T_u, P_u = (float(x) for x in sol.y[2:, -1])
    beta = (625.0 * I**4 * n / (256.0 * N_u)) ** 0.2
    alpha = 16.0 * beta**4 / (25.0 * I**2)
    T = alpha**2 / beta * T_u
    P = alpha**2.5 / beta**3 * P_u
    return SolitonOracle(
        u0=lo, N_u=N_u, T_u=T_u, P_u=P_u, alpha=alpha, beta=beta,
        kinetic=T, potential=P, energy=T - I * P, multiplier=beta**2,
    )


# ---------------------------------------------------------------------------
# mass scaling and shape constants


def rescale_minimizer(Phi: RadialField, n: float) -> RadialField:
    """``phi_*(x) = n^{4/5} Phi(n^{1/5} x)``, represented exactly on the grid ``r / n^{1/5}``.

    Mass scales by ``n`` and both ``||grad .||^2`` and ``int |.|^{5/2}`` by
    ``n^{7/5}``; the discrete integrals inherit these factors up to rounding
    because the grid is rescaled together with the samples.
    """
    if not n > 0:
        raise DomainError("mass must be positive")
    return rescale(Phi, n**0.2, 4.0)


def shape_integrals(Phi: RadialField) -> ShapeIntegrals:
    """``P = int Phi^{5/2}``, ``Q = int Phi^{3/2}``, ``T = ||grad Phi||^2`` and the tail decay rate.

    Raises
    ------
    ResolutionError
        If no positive exponential decay can be fitted (``Q`` would be
        unreliable); enlarge ``r_max``.
    """
    k = decay_rate(Phi)
    P = lp_norm(Phi, 2.5) ** 2.5
    Q = integrate(np.abs(Phi.values) ** 1.5, Phi.grid)
    return ShapeIntegrals(P=P, Q=Q, T=kinetic_energy(Phi), decay_rate=k)
