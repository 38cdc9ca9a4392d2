"""
Coherent-state upper bound for ``n`` bosonic polarons: phase-space traces,
the four remainders, particle-number statistics and their exponents in ``n``.

Notation.  ``Phi`` is the unit-mass minimiser with ``P = int Phi^{5/2}``,
``Q = int Phi^{3/2}``; ``phi_* = n^{4/5} Phi(n^{1/5} x)``.  The occupation
``M(p, q) = g_eps(|p| / ((4 pi)^{1/4} phi_*(q)^{1/2}))`` separates after the
substitution ``p = (4 pi)^{1/4} phi^{1/2} a``, so every phase-space integral
is a shape constant times a moment ``m_kj(eps) = int_eps^inf a^k g^j da``:

    tr gamma      = c34 Q n^{3/5} m21(eps),            c34 = (4 pi)^{3/4} / (2 pi^2)
    int M^2       = c34 Q n^{3/5} m22(eps)
    int p^2 M^2   = c54 P n^{7/5} m42(eps),            c54 = (4 pi)^{5/4} / (2 pi^2)

Each reported remainder is the explicit bound used in the proof.  With
``eps = n^{-e}`` and ``l = n^{-lam}`` these are exact monomials (or sums of
monomials) in ``n``; the exponents are carried as :class:`fractions.Fraction`
and never fitted.  ``eps``-independent bounds use ``m21(eps) <= m21(0)``,
``eps m22(eps) <= 1/8`` (from ``a^2 g(a) <= 1/(2 sqrt 2)``),
``m42(eps) <= m42(0)`` and ``I_0 - I_eps <= sqrt2 pi^{-3/4} eps``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DivergenceError, DomainError, ResolutionError
from .special_math import I_PREFACTOR, g_moment, i0_closed_form, i_epsilon

__all__ = [
    "TRACE_PREFACTOR",
    "TRACE_PREFACTOR_ALT",
    "KINETIC_PREFACTOR",
    "M22_BOUND",
    "BudgetReport",
    "ShapeConstants",
    "CoherentLatticeProbe",
    "parse_fraction",
    "power_law_slope",
    "pekar_shape_constants",
    "gamma_trace",
    "gamma_square_trace",
    "remainder_terms",
    "budget_exponents",
    "assemble_budget",
    "sector_tail_check",
    "coherent_kernel_probe",
    "zero_mode_average",
]

TRACE_PREFACTOR = (4.0 * math.pi) ** 0.75 / (2.0 * math.pi**2)
TRACE_PREFACTOR_ALT = (4.0 * math.pi) ** 1.25 / (2.0 * math.pi**2)
KINETIC_PREFACTOR = (4.0 * math.pi) ** 1.25 / (2.0 * math.pi**2)
M22_BOUND = 0.125  # sup_eps eps * m22(eps)

DEFAULT_EPS_EXP = Fraction(4, 15)
DEFAULT_ELL_EXP = Fraction(2, 5) - Fraction(2, 35)


def parse_fraction(text) -> Fraction:
    """Parse ``"4/15"``, ``"2/5-2/35"``, ``"0.25"`` or a number into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, (int, float)):
        return Fraction(text).limit_denominator(10**9)
    s = str(text).replace(" ", "")
    if not s:
        raise ConfigurationError("empty exponent")
    parts = re.findall(r"[+-]?[^+-]+", s)
    if "".join(parts) != s:
        raise ConfigurationError(f"cannot parse exponent {text!r}")
    try:
        return sum((Fraction(p) for p in parts), Fraction(0))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse exponent {text!r}") from exc


def power_law_slope(f: Callable[[float], float], n1: float, n2: float) -> float:
    """``log(f(n2)/f(n1)) / log(n2/n1)``."""
    return math.log(f(n2) / f(n1)) / math.log(n2 / n1)


# ---------------------------------------------------------------------------
# data types


@dataclass
class BudgetReport:
    """Values and exact exponents of an energy budget.

    ``terms`` holds the (non-negative) bound values that enter ``total``;
    ``values`` holds exact, ``eps``-dependent companions where they differ.
    ``exponents`` maps term names to rational powers of ``n`` (or ``N``).
    """

    kind: str
    n: float
    eps: float
    ell: float
    leading: float
    terms: dict
    exponents: dict
    total: float
    values: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def __getattr__(self, name):
        # r_main, r_loc, ... read through to the term/value tables
        terms = self.__dict__.get("terms", {})
        values = self.__dict__.get("values", {})
        if name in terms:
            return terms[name]
        if name in values:
            return values[name]
        raise AttributeError(name)

    @property
    def total_upper_bound(self) -> float:
        return self.total

    @property
    def relative_deficit(self) -> float:
        return (self.total - self.leading) / abs(self.leading)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "eps": self.eps,
            "ell": self.ell,
            "leading": self.leading,
            "terms": dict(self.terms),
            "values": dict(self.values),
            "total": self.total,
            "relative_deficit": self.relative_deficit,
            "exponents": {k: str(v) for k, v in self.exponents.items()},
            "constants": dict(self.constants),
        }


@dataclass(frozen=True)
class ShapeConstants:
    """Scale-free data of the unit-mass minimiser."""

    A: float
    P: float
    Q: float
    T: float


@lru_cache(maxsize=8)
def pekar_shape_constants(n_nodes: int = 1024) -> ShapeConstants:
    """Solve the unit-mass problem at ``I_0`` once and cache ``A, P, Q, T``."""
    from .pekar_variational import default_grid, minimize_pekar, shape_integrals

    res = minimize_pekar(1.0, grid=default_grid(n_nodes=n_nodes))
    s = shape_integrals(res.minimizer)
    return ShapeConstants(A=res.A, P=s.P, Q=s.Q, T=s.T)


# ---------------------------------------------------------------------------
# traces


def gamma_trace(n: float, eps: float, Q: float, prefactor: float = TRACE_PREFACTOR) -> float:
    """``tr gamma = c34 Q n^{3/5} m21(eps)``; bounded by its ``eps = 0`` value."""
    if not n > 0:
        raise DomainError("n must be positive")
    if eps < 0:
        raise DomainError("eps must be non-negative")
    value = prefactor * Q * n**0.6 * g_moment(2, 1, eps)
    assert value <= prefactor * Q * n**0.6 * g_moment(2, 1, 0.0) * (1 + 1e-12)
    return value


def gamma_square_trace(n: float, eps: float, Q: float, prefactor: float = TRACE_PREFACTOR) -> float:
    """``int M^2 = c34 Q n^{3/5} m22(eps)``, an upper bound for ``tr gamma^2``; at most ``c34 Q n^{3/5} / (8 eps)``."""
    if not n > 0:
        raise DomainError("n must be positive")
    if eps <= 0:
        raise DivergenceError("tr gamma^2 diverges at eps = 0: g(a) ~ a^-2/(2 sqrt 2) as a -> 0")
    value = prefactor * Q * n**0.6 * g_moment(2, 2, eps)
    assert value <= prefactor * Q * n**0.6 * M22_BOUND / eps * (1 + 1e-12)
    return value


# ---------------------------------------------------------------------------
# remainders


def remainder_terms(
    n: float,
    eps: float,
    ell: float,
    shape: ShapeConstants,
    C_int: float = 1.0,
) -> tuple[dict, dict]:
    """Bound values ``(terms, values)`` of the four remainders and the traces.

    ``terms`` are the ``eps``-uniform monomial bounds; ``values`` are the
    exact phase-space expressions at this ``eps``.

    * ``r_main = (I_0 - I_eps) n^{7/5} P <= sqrt2 pi^{-3/4} eps n^{7/5} P``
    * ``r_loc = ||grad G||^2 tr gamma`` with ``||grad G||^2 = 3/l^2``
    * ``r_int = C_int n^{7/5} ((n^{2/5} l)^{-1/2} + (n^{2/5} l)^3 n^{-1/5})``
    * ``r_xc = 2 * [2 sqrt(tr gamma^2) sqrt(tr(-Delta) gamma^2)]``, the
      kinetic trace bounded by ``int M^2 (p^2 + ||grad G||^2)``

    ``values`` also splits ``r_xc`` along ``sqrt(a + b) <= sqrt a + sqrt b``:
    ``r_xc_momentum`` (the ``p^2`` part, ``n^{(3/5 + e + 7/5)/2}``) and
    ``r_xc_localization`` (the ``||grad G||^2`` part, ``n^{3/5 + e + lam}``).
    """
    if not n > 0:
        raise DomainError("n must be positive")
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if not ell > 0:
        raise DomainError("ell must be positive")
    grad_G = 3.0 / ell**2
    n35, n75 = n**0.6, n**1.4
    m21_0 = g_moment(2, 1, 0.0)
    m42_0 = g_moment(4, 2, 0.0)

    tr1 = TRACE_PREFACTOR * shape.Q * n35 * m21_0
    tr2 = TRACE_PREFACTOR * shape.Q * n35 * M22_BOUND / eps
    kin2 = KINETIC_PREFACTOR * shape.P * n75 * m42_0 + grad_G * tr2
    x = n**0.4 * ell
    terms = {
        "trace_gamma": tr1,
        "trace_gamma_sq": tr2,
        "kinetic_gamma_sq": kin2,
        "r_main": I_PREFACTOR * eps * n75 * shape.P,
        "r_loc": grad_G * tr1,
        "r_int": C_int * n75 * (x**-0.5 + x**3 * n**-0.2),
        "r_xc": 2.0 * (2.0 * math.sqrt(tr2) * math.sqrt(kin2)),
    }
    kin_p = KINETIC_PREFACTOR * shape.P * n75 * m42_0

    v1 = gamma_trace(n, eps, shape.Q)
    v2 = gamma_square_trace(n, eps, shape.Q)
    vk = KINETIC_PREFACTOR * shape.P * n75 * g_moment(4, 2, eps) + grad_G * v2
    values = {
        "trace_gamma_exact": v1,
        "trace_gamma_alt_prefactor": v1 * TRACE_PREFACTOR_ALT / TRACE_PREFACTOR,
        "trace_gamma_sq_exact": v2,
        "kinetic_gamma_sq_exact": vk,
        "r_main_exact": (i0_closed_form() - i_epsilon(eps)) * n75 * shape.P,
        "r_loc_exact": grad_G * v1,
        "r_xc_exact": 2.0 * (2.0 * math.sqrt(v2) * math.sqrt(vk)),
        # the two pieces of sqrt(kin2) <= sqrt(p^2 part) + sqrt(grad G part)
        "r_xc_momentum": 4.0 * math.sqrt(tr2) * math.sqrt(kin_p),
        "r_xc_localization": 4.0 * math.sqrt(tr2) * math.sqrt(grad_G * tr2),
    }
    return terms, values


def budget_exponents(eps_exp=DEFAULT_EPS_EXP, ell_exp=DEFAULT_ELL_EXP) -> dict:
    """Exact exponents of every bound for ``eps = n^-eps_exp``, ``l = n^-ell_exp``.

    A sum of monomials is assigned its largest exponent.
    """
    e = parse_fraction(eps_exp)
    lam = parse_fraction(ell_exp)
    F = Fraction
    x = F(2, 5) - lam  # n^{2/5} l = n^x
    ex = {
        "trace_gamma": F(3, 5),
        "trace_gamma_sq": F(3, 5) + e,
        "r_main": F(7, 5) - e,
        "r_loc": F(3, 5) + 2 * lam,
        "r_int": max(F(7, 5) - x / 2, F(7, 5) + 3 * x - F(1, 5)),
    }
    ex["kinetic_gamma_sq"] = max(F(7, 5), 2 * lam + ex["trace_gamma_sq"])
    ex["r_xc"] = (ex["trace_gamma_sq"] + ex["kinetic_gamma_sq"]) / 2
    ex["r_xc_momentum"] = (ex["trace_gamma_sq"] + F(7, 5)) / 2
    ex["r_xc_localization"] = ex["trace_gamma_sq"] + lam
    ex["leading"] = F(7, 5)
    ex["deficit"] = max(ex[k] for k in ("r_main", "r_loc", "r_int", "r_xc"))
    ex["relative_deficit"] = ex["deficit"] - F(7, 5)
    ex["mean_excess"] = ex["trace_gamma"]
    ex["variance_excess"] = max(ex["trace_gamma_sq"], ex["trace_gamma"])
    return ex


def assemble_budget(
    n: float,
    eps_exp=DEFAULT_EPS_EXP,
    ell_exp=DEFAULT_ELL_EXP,
    C_int: float = 1.0,
    shape: Optional[ShapeConstants] = None,
    n_min: float = 1.0,
) -> BudgetReport:
    """Full upper-bound budget at particle number ``n``.

    ``eps = n^-eps_exp`` (default 4/15) and ``l = n^-ell_exp`` (default
    2/5 - 2/35).  ``n >= n_min`` keeps ``eps <= 1``; the formulas are
    asymptotic and carry no meaning for small ``n`` beyond that.
    """
    if not n >= n_min:
        raise DomainError(f"n must be at least {n_min}")
    e = parse_fraction(eps_exp)
    lam = parse_fraction(ell_exp)
    shape = pekar_shape_constants() if shape is None else shape
    eps = n ** -float(e)
    ell = n ** -float(lam)
    terms, values = remainder_terms(n, eps, ell, shape, C_int)
    leading = -shape.A * n**1.4
    if not all(math.isfinite(v) for v in terms.values()):
        raise DomainError(f"n = {n:g} overflows double precision in the remainder bounds")
    rem = terms["r_main"] + terms["r_loc"] + terms["r_int"] + terms["r_xc"]
    terms["mean_N"] = n + terms["trace_gamma"]
    terms["variance_bound"] = n + 2.0 * terms["trace_gamma_sq"] + 2.0 * terms["trace_gamma"]
    values["mean_N_exact"] = n + values["trace_gamma_exact"]
    values["variance_bound_exact"] = n + 2.0 * values["trace_gamma_sq_exact"] + 2.0 * values["trace_gamma_exact"]
    return BudgetReport(
        kind="boson-upper",
        n=float(n),
        eps=eps,
        ell=ell,
        leading=leading,
        terms=terms,
        exponents=budget_exponents(e, lam),
        total=leading + rem,
        values=values,
        constants={
            "A": shape.A,
            "P": shape.P,
            "Q": shape.Q,
            "C_int": C_int,
            "eps_exp": str(e),
            "ell_exp": str(lam),
            "trace_prefactor": TRACE_PREFACTOR,
            "trace_prefactor_alt": TRACE_PREFACTOR_ALT,
            "trace_prefactor_ratio": TRACE_PREFACTOR_ALT / TRACE_PREFACTOR,
        },
    )


# ---------------------------------------------------------------------------
# particle-number tails


def sector_tail_check(weights, M: float, m_values=None) -> dict:
    """Holder bound on the high-particle-number tail of a sector distribution.

    ``lhs = sum_{m > mean + M} m^{7/5} w_m`` and
    ``rhs = M^{-3/5} (sum m^2 w_m)^{7/10} var^{3/10}``; ``middle`` is the
    intermediate ``M^{-3/5} sum m^{7/5} |m - mean|^{3/5} w_m``.
    """
    w = np.asarray(weights, dtype=float)
    m = np.arange(w.size, dtype=float) if m_values is None else np.asarray(m_values, dtype=float)
    if w.shape != m.shape:
        raise DomainError("weights and particle numbers differ in length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("weights must be a normalised probability vector")
    if not M > 0:
        raise DomainError("margin M must be positive")
    mean = float(np.dot(m, w))
    second = float(np.dot(m * m, w))
    var = max(float(np.dot((m - mean) ** 2, w)), 0.0)
    tail = m > mean + M
    lhs = float(np.dot(m[tail] ** 1.4, w[tail]))
    middle = M**-0.6 * float(np.dot(m**1.4 * np.abs(m - mean) ** 0.6, w))
    rhs = M**-0.6 * second**0.7 * var**0.3
    slack = 1e-12 * max(rhs, 1e-300)
    return {
        "lhs": lhs,
        "middle": middle,
        "rhs": rhs,
        "mean": mean,
        "variance": var,
        "holds": bool(lhs <= middle + slack and middle <= rhs + slack),
    }


# ---------------------------------------------------------------------------
# coherent-kernel lattice probe


@lru_cache(maxsize=None)
def zero_mode_average() -> float:
    """``int_{[-1/2,1/2]^3} |u|^-2 du``, the cell average of ``|k|^-2`` in units of ``dk^-2``.

    Splitting the cube into six pyramids gives ``3 int_{[-1,1]^2} ds dt / (1 + s^2 + t^2)``.
    """
    from scipy.integrate import dblquad

    val = dblquad(lambda t, s: 1.0 / (1.0 + s * s + t * t), -1.0, 1.0, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    return 3.0 * val


@dataclass
class CoherentLatticeProbe:
    """Periodic cubic lattice for ``(G_pq, K_phi G_pq)``.

    ``phi`` maps an array of radii to amplitudes; the default is the
    L2-normalised Gaussian of width ``phi_width``.  ``G`` is the
    L2-normalised Gaussian ``exp(-|x|^2/l^2)``.
    """

    box: float = 2.0
    cells: int = 64
    ell: float = 0.2
    p: tuple = (30.0, 0.0, 0.0)
    q: tuple = (0.0, 0.0, 0.0)
    phi: Optional[Callable] = None
    phi_width: float = 0.1
    leak_tol: float = 1e-8
    min_cells_per_length: float = 4.0
    results: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return self.box / self.cells

    def phi_fn(self):
        if self.phi is not None:
            return self.phi
        s = self.phi_width
        c = (2.0 / (math.pi * s * s)) ** 0.75
        return lambda r: c * np.exp(-((np.asarray(r) / s) ** 2))

    def check(self):
        dx = self.spacing
        lengths = [self.ell] + ([self.phi_width] if self.phi is None else [])
        for length in lengths:
            if length < self.min_cells_per_length * dx:
                raise ResolutionError(f"length scale {length:g} spans fewer than {self.min_cells_per_length:g} cells")
        pmax = max(abs(c) for c in self.p)
        if pmax > 0.5 * math.pi / dx:
            raise ResolutionError("probe momentum exceeds half the lattice Nyquist momentum")


def coherent_kernel_probe(probe: CoherentLatticeProbe) -> dict:
    """``(G_pq, K_phi G_pq) = int 4 pi |k|^-2 |h^(k)|^2 dk/(2pi)^3`` with ``h = phi G_pq``.

    ``h^`` is a DFT times ``dx^3``; the ``k``-integral is the lattice sum
    over ``L^-3``.  The singular ``k = 0`` term uses the average of
    ``4 pi / |k|^2`` over its Brillouin cell.  Returns the sandwich value,
    the target ``4 pi phi(q)^2 / |p|^2`` and their absolute gap.

    Raises
    ------
    ResolutionError
        If a length scale is under-resolved or ``|h|`` exceeds ``leak_tol``
        times its peak on the box boundary.
    """
    probe.check()
    n = probe.cells
    L = probe.box
    dx = probe.spacing
    ax = -0.5 * L + dx * np.arange(n)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    q = np.asarray(probe.q, dtype=float)
    p = np.asarray(probe.p, dtype=float)
    phi = probe.phi_fn()
    R2 = (X - q[0]) ** 2 + (Y - q[1]) ** 2 + (Z - q[2]) ** 2
    G = (2.0 / (math.pi * probe.ell**2)) ** 0.75 * np.exp(-R2 / probe.ell**2)
    amp = phi(np.sqrt(X * X + Y * Y + Z * Z)) * G
    peak = np.abs(amp).max()
    boundary = max(
        np.abs(amp[0]).max(), np.abs(amp[-1]).max(),
        np.abs(amp[:, 0]).max(), np.abs(amp[:, -1]).max(),
        np.abs(amp[:, :, 0]).max(), np.abs(amp[:, :, -1]).max(),
    )
    if boundary > probe.leak_tol * peak:
        raise ResolutionError(f"boundary leakage {boundary / peak:.2e} exceeds {probe.leak_tol:.0e}")
    h = amp * np.exp(1j * (p[0] * X + p[1] * Y + p[2] * Z))
    hk = np.fft.fftn(h) * dx**3
    dk = 2.0 * math.pi / L
    k1 = dk * np.fft.fftfreq(n, d=1.0 / n)
    K2 = k1[:, None, None] ** 2 + k1[None, :, None] ** 2 + k1[None, None, :] ** 2
    K2[0, 0, 0] = 1.0
    kern = 4.0 * math.pi / K2
    kern[0, 0, 0] = 4.0 * math.pi * zero_mode_average() / dk**2
    sandwich = float(np.sum(kern * np.abs(hk) ** 2) / L**3)
    target = 4.0 * math.pi * float(phi(np.linalg.norm(q))) ** 2 / float(np.dot(p, p))
    out = {"sandwich": sandwich, "target": target, "gap": abs(sandwich - target), "signed_gap": target - sandwich}
    probe.results = out
    return out
