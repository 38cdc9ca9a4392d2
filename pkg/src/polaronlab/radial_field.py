"""
Radially symmetric fields on a 1D radial grid.

A :class:`RadialField` stores samples ``f(r_i)`` of a function of ``|x|`` in
three dimensions.  Every integral carries the ``4 pi r^2`` shell weight and
is evaluated by the trapezoidal rule on ``[0, r_max]`` with the origin added
as an implicit node (the weighted integrand vanishes there).  Fields are
assumed to vanish beyond ``r_max``.

Two grid layouts are supported:

* ``uniform``   -- ``r_i = i h`` for ``i = 1..N``.  Kinetic energies use the
  reduced function ``u = r f`` with a five-point stencil and odd reflection
  through the origin, which is fourth-order accurate; trapezoidal sums of
  smooth even integrands converge spectrally here.
* ``geometric`` -- ``r_i = r_min q^i``.  Derivatives use second-order central
  differences with one-sided end stencils.

Cumulative integrals (Newton potentials) use composite Simpson weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import ConfigurationError, DomainError, LemmaViolation, ResolutionError

__all__ = [
    "RadialGrid",
    "RadialField",
    "integrate",
    "lp_norm",
    "mass",
    "kinetic_energy",
    "laplacian_bands",
    "apply_laplacian",
    "newton_potential",
    "coulomb_energy",
    "newton_matrix",
    "radial_convolve",
    "potential_smoothing_gap",
    "uniform_ball",
    "smooth_bump",
    "gaussian",
    "rescale",
    "resample",
    "decay_rate",
    "save_field",
    "load_field",
]

MIN_NODES = 64
FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii ``0 < r_1 < ... < r_N = r_max``."""

    nodes: np.ndarray
    scheme: str = "uniform"

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise ConfigurationError("grid needs at least two nodes")
        if not r[0] > 0:
            raise ConfigurationError("first grid node must be > 0")
        if np.any(np.diff(r) <= 0):
            raise ConfigurationError("grid nodes must be strictly increasing")
        if self.scheme not in ("uniform", "geometric"):
            raise ConfigurationError(f"unknown grid scheme {self.scheme!r}")
        if self.scheme == "uniform":
            h = r[-1] / r.size
            if not np.allclose(r, h * np.arange(1, r.size + 1), rtol=1e-10, atol=0):
                raise ConfigurationError("uniform grid must have nodes r_i = i h")
        if self.scheme == "geometric":
            q = r[1:] / r[:-1]
            if not (np.all(q > 1) and np.all(q <= 1.2 + 1e-12)):
                raise ConfigurationError("geometric ratio must lie in (1, 1.2]")
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)

    @classmethod
    def uniform(cls, r_max: float, n_nodes: int) -> "RadialGrid":
        h = r_max / n_nodes
        return cls(h * np.arange(1, n_nodes + 1), "uniform")

    @classmethod
    def geometric(cls, r_max: float, n_nodes: int, r_min: Optional[float] = None) -> "RadialGrid":
        r_min = 1e-4 * r_max if r_min is None else r_min
        r = np.geomspace(r_min, r_max, n_nodes)
        r[-1] = r_max
        return cls(r, "geometric")

    def __len__(self):
        return self.nodes.size

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> float:
        """Uniform step ``h``; only meaningful for uniform grids."""
        if self.scheme != "uniform":
            raise ConfigurationError("spacing is defined for uniform grids only")
        return float(self.nodes[-1] / self.nodes.size)

    @property
    def ratio(self) -> float:
        return float(self.nodes[1] / self.nodes[0])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal weights on ``[0, r_max]`` with the origin as implicit node."""
        r = np.concatenate(([0.0], self.nodes))
        dr = np.diff(r)
        w = 0.5 * (dr + np.concatenate((dr[1:], [0.0])))
        return w

    def scaled(self, factor: float) -> "RadialGrid":
        """Grid with every node multiplied by ``factor``."""
        return RadialGrid(self.nodes * factor, self.scheme)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "n_nodes": len(self), "r_min": float(self.nodes[0]), "r_max": self.r_max}


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function with role metadata.

    ``role`` is one of ``density`` (must be non-negative), ``amplitude``,
    ``potential``, ``mollifier`` (non-negative, declared ``support_radius``)
    or ``signed``.  ``profile``, when given, is the exact function the
    samples were taken from; some operations use it in place of the samples.
    """

    grid: RadialGrid
    values: np.ndarray
    role: str = "amplitude"
    support_radius: Optional[float] = None
    profile: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ConfigurationError("values and grid nodes differ in shape")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        if self.role in ("density", "mollifier") and np.any(v < 0):
            raise DomainError(f"{self.role} field has negative values")
        if self.role == "mollifier" and not (self.support_radius and self.support_radius > 0):
            raise ConfigurationError("mollifier needs a declared support radius")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values, **kw) -> "RadialField":
        kw.setdefault("profile", None)
        return replace(self, values=values, **kw)

    def __call__(self, r):
        """Monotone cubic interpolation; zero beyond ``r_max``."""
        r = np.asarray(r, dtype=float)
        nodes = np.concatenate(([0.0], self.r))
        vals = np.concatenate(([self.values[0]], self.values))
        out = PchipInterpolator(nodes, vals, extrapolate=False)(np.abs(r))
        return np.nan_to_num(out, nan=0.0)


# ---------------------------------------------------------------------------
# integrals


def integrate(values, grid: RadialGrid) -> float:
    """``int 4 pi r^2 f(r) dr`` over ``[0, r_max]``."""
    return float(FOUR_PI * np.dot(grid.weights, grid.nodes**2 * np.asarray(values)))


def lp_norm(f: RadialField, p: float) -> float:
    """``(int 4 pi r^2 |f|^p dr)^(1/p)``."""
    if not p > 0:
        raise DomainError("exponent p must be positive")
    return integrate(np.abs(f.values) ** p, f.grid) ** (1.0 / p)


def mass(f: RadialField) -> float:
    """``int f`` (signed), i.e. the total charge of a density-like field."""
    return integrate(f.values, f.grid)


# ---------------------------------------------------------------------------
# kinetic energy

_STENCIL4 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def laplacian_bands(grid: RadialGrid) -> np.ndarray:
    """Banded form (for ``solve_banded((2, 2), ...)``) of ``-d^2/dr^2`` acting on ``u = r f``.

    Fourth-order five-point stencil.  ``u`` is continued as an odd function
    through ``r = 0`` and by zero beyond ``r_max``; the resulting matrix is
    symmetric positive definite.
    """
    if grid.scheme != "uniform":
        raise ConfigurationError("the reduced-function Laplacian needs a uniform grid")
    n = len(grid)
    h2 = grid.spacing**2
    ab = np.zeros((5, n))
    # row i: c_{-2} u_{i-2} + c_{-1} u_{i-1} + c_0 u_i + ...; L = -stencil / h^2
    c = -_STENCIL4 / h2
    ab[0, 2:] = c[4]
    ab[1, 1:] = c[3]
    ab[2, :] = c[2]
    ab[3, :-1] = c[1]
    ab[4, :-2] = c[0]
    # odd reflection: u_0 = 0, u_{-1} = -u_1 folds the c_{-2} coefficient of row 1 onto u_1
    ab[2, 0] -= c[0]
    return ab


def apply_laplacian(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """``(-d^2/dr^2) u`` with the same discretisation as :func:`laplacian_bands`."""
    ab = laplacian_bands(grid)
    n = u.size
    out = ab[2] * u
    out[:-1] += ab[1, 1:] * u[1:]
    out[:-2] += ab[0, 2:] * u[2:]
    out[1:] += ab[3, :-1] * u[:-1]
    out[2:] += ab[4, :-2] * u[:-2]
    assert out.size == n
    return out


def kinetic_energy(f: RadialField) -> float:
    """``int |grad f|^2 dx`` for a radial ``f``.

    Uniform grids use the symmetric fourth-order form ``4 pi h u.(L u)`` with
    ``u = r f``; geometric grids use central differences with one-sided
    second-order boundary stencils and the trapezoidal rule.
    """
    grid = f.grid
    if len(grid) < MIN_NODES:
        raise ConfigurationError(f"kinetic energy needs at least {MIN_NODES} grid nodes")
    if grid.scheme == "uniform":
        u = grid.nodes * f.values
        return float(FOUR_PI * grid.spacing * np.dot(u, apply_laplacian(grid, u)))
    df = np.gradient(f.values, grid.nodes, edge_order=2)
    return integrate(df**2, grid)


# ---------------------------------------------------------------------------
# Coulomb


def _cumulative(y: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``int_0^{r_i} y dr`` at every node (along axis 0), with ``y(0) = 0`` prepended."""
    x = np.concatenate(([0.0], grid.nodes))
    yy = np.concatenate((np.zeros((1,) + y.shape[1:]), y))
    return cumulative_simpson(yy, x=x, initial=0.0, axis=0)[1:]


def newton_potential(rho: RadialField) -> RadialField:
    """Coulomb potential ``(|x|^-1 * rho)(r)`` by Newton's theorem.

    ``Phi(r) = M(r)/r + int_r^inf 4 pi s rho(s) ds`` with ``M(r)`` the
    charge inside radius ``r``.  Signed input is allowed unless the field is
    declared a density or mollifier.
    """
    if rho.role in ("density", "mollifier") and np.any(rho.values < 0):
        raise DomainError("density-role input has negative mass regions")
    r = rho.grid.nodes
    inner = _cumulative(FOUR_PI * r**2 * rho.values, rho.grid)
    outer_c = _cumulative(FOUR_PI * r * rho.values, rho.grid)
    outer = outer_c[-1] - outer_c
    return RadialField(rho.grid, inner / r + outer, role="potential")


def newton_matrix(grid: RadialGrid, symmetric: bool = False) -> np.ndarray:
    """Dense matrix ``K`` with ``newton_potential(rho).values == K @ rho``.

    With ``symmetric=True`` returns ``(K + W^-1 K^T W) / 2`` where
    ``W = diag(4 pi w_i r_i^2)``; then ``W K_sym rho`` is exactly the gradient
    of the discrete self-energy ``1/2 rho.W.K.rho``.
    """
    r = grid.nodes
    eye = np.eye(r.size)
    inner = _cumulative(FOUR_PI * (r**2)[:, None] * eye, grid)
    outer_c = _cumulative(FOUR_PI * r[:, None] * eye, grid)
    K = inner / r[:, None] + (outer_c[-1][None, :] - outer_c)
    if symmetric:
        W = FOUR_PI * grid.weights * r**2
        K = 0.5 * (K + (K.T * W[None, :]) / W[:, None])
    return K


def coulomb_energy(rho: RadialField, tau: RadialField) -> float:
    """``D(rho, tau) = 1/2 iint rho(x) tau(y) / |x - y|``.

    Evaluated as the average of ``1/2 int tau Phi_rho`` and
    ``1/2 int rho Phi_tau`` so the discrete form is exactly symmetric.
    """
    _same_grid(rho, tau)
    phi_r = newton_potential(_as_signed(rho)).values
    if tau is rho:
        return 0.5 * integrate(tau.values * phi_r, rho.grid)
    phi_t = newton_potential(_as_signed(tau)).values
    a = integrate(tau.values * phi_r, rho.grid)
    b = integrate(rho.values * phi_t, rho.grid)
    return 0.25 * (a + b)


def _as_signed(f: RadialField) -> RadialField:
    return f if f.role == "signed" else replace(f, role="signed")


def _same_grid(a: RadialField, b: RadialField):
    if a.grid is not b.grid and not (
        a.grid.nodes.shape == b.grid.nodes.shape and np.array_equal(a.grid.nodes, b.grid.nodes)
    ):
        raise ConfigurationError("fields live on different grids; resample first")


# ---------------------------------------------------------------------------
# mollifiers and convolution


def _mollifier_nodes(sigma: RadialField, panels: int = 32, order: int = 8):
    """Quadrature nodes ``s`` and weights ``w * s * sigma(s)`` on ``[0, R]``."""
    R = float(sigma.support_radius)
    if sigma.profile is not None:
        xg, wg = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, R, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        s = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        w = (half[:, None] * wg[None, :]).ravel()
        return s, w * s * sigma.profile(s)
    inside = sigma.r <= R
    s = sigma.r[inside]
    w = sigma.grid.weights[inside]
    return s, w * s * sigma.values[inside]


def radial_convolve(rho: RadialField, sigma: RadialField) -> RadialField:
    """3D convolution ``rho * sigma`` of two radial functions, sampled on ``rho``'s grid.

    Uses the shell reduction with the roles of the two factors chosen so the
    outer integral runs over the compact support of ``sigma``:
    ``(rho*sigma)(r) = (2 pi / r) int_0^R s sigma(s) [P(r+s) - P(|r-s|)] ds``
    with ``P(u) = int_0^u t rho(t) dt``.  The ``s``-integral uses composite
    Gauss-Legendre on ``sigma.profile`` when available, otherwise the samples.
    """
    if sigma.support_radius is None or not math.isfinite(sigma.support_radius):
        raise ConfigurationError("unsupported mollifier: needs a finite declared support radius")
    if np.any(sigma.values < 0):
        raise DomainError("mollifier must be non-negative")
    r = rho.grid.nodes
    P_nodes = np.concatenate(([0.0], _cumulative(r * rho.values, rho.grid)))
    x = np.concatenate(([0.0], r))
    # P is even in u; mirror it so the spline has the right symmetry at u = 0
    spline = CubicSpline(np.concatenate((-x[:0:-1], x)), np.concatenate((P_nodes[:0:-1], P_nodes)))
    P_inf = P_nodes[-1]

    def P(u):
        u = np.abs(u)
        return np.where(u >= r[-1], P_inf, spline(np.minimum(u, r[-1])))

    s, ws = _mollifier_nodes(sigma)
    out = np.empty_like(r)
    block = 512
    for start in range(0, r.size, block):
        rr = r[start:start + block, None]
        kern = P(rr + s[None, :]) - P(rr - s[None, :])
        out[start:start + block] = (2.0 * math.pi / rr[:, 0]) * (kern @ ws)
    role = "density" if rho.role == "density" else "signed"
    if role == "density":
        out = np.maximum(out, 0.0)
    return RadialField(rho.grid, out, role=role)


def _ball_profile(R):
    c = 3.0 / (FOUR_PI * R**3)
    return lambda s: np.where(np.abs(s) < R, c, 0.0)


def _bump_profile(R):
    # exp(-1/(1 - x^2)) on |x| < 1, normalised to unit mass numerically
    def raw(s):
        x = np.asarray(s, dtype=float) / R
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return out

    m = quad(lambda s: FOUR_PI * s * s * raw(s), 0.0, R, epsabs=0, epsrel=1e-13, limit=200)[0]
    return lambda s: raw(s) / m


def _mollifier(grid, R, prof):
    vals = prof(grid.nodes)
    m = integrate(vals, grid)
    # a support narrower than the grid spacing leaves only the exact profile,
    # which the convolution and gap routines integrate directly
    if m > 0:
        vals = vals / m
    return RadialField(grid, vals, role="mollifier", support_radius=R, profile=prof)


def uniform_ball(R: float, grid: RadialGrid) -> RadialField:
    """Normalised indicator of the ball of radius ``R``."""
    return _mollifier(grid, float(R), _ball_profile(float(R)))


def smooth_bump(R: float, grid: RadialGrid) -> RadialField:
    """Normalised ``C^inf`` bump ``exp(-1/(1 - (r/R)^2))`` supported in radius ``R``."""
    return _mollifier(grid, float(R), _bump_profile(float(R)))


def gaussian(grid: RadialGrid, width: float, norm: str = "l2", role: str = "amplitude") -> RadialField:
    """``exp(-r^2/width^2)`` normalised in L2 (``norm='l2'``), L1 (``'l1'``) or not at all."""
    v = np.exp(-(grid.nodes / width) ** 2)
    if norm == "l2":
        v = v * (2.0 / (math.pi * width**2)) ** 0.75
    elif norm == "l1":
        v = v / (math.pi ** 1.5 * width**3)
    elif norm is not None:
        raise ConfigurationError(f"unknown normalisation {norm!r}")
    return RadialField(grid, v, role=role)


def potential_smoothing_gap(sigma: RadialField, rtol: float = 1e-9) -> RadialField:
    """``1/r - (|x|^-1 * sigma)(r)`` for a unit-mass radial mollifier.

    Newton's theorem gives ``0 <= gap <= 1/r`` inside the support and
    ``gap = 0`` outside; both are checked pointwise.

    Raises
    ------
    LemmaViolation
        If a sample breaks the pointwise bounds by more than ``rtol / r``.
    """
    if sigma.support_radius is None:
        raise ConfigurationError("mollifier needs a declared support radius")
    R = float(sigma.support_radius)
    r = sigma.grid.nodes
    if sigma.profile is not None:
        prof = sigma.profile

        def shell_mass(a, b, power):
            if b <= a:
                return 0.0
            return quad(lambda s: FOUR_PI * s**power * prof(s), a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

        total = shell_mass(0.0, R, 2)
        if abs(total - 1.0) > 1e-10:
            raise DomainError(f"mollifier profile must have unit mass, got {total}")
        pot = np.empty_like(r)
        inner_nodes = r[r < R]
        # accumulate inner mass interval by interval
        edges = np.concatenate(([0.0], inner_nodes))
        m_inc = np.array([shell_mass(a, b, 2) for a, b in zip(edges[:-1], edges[1:])])
        o_inc = np.array([shell_mass(a, b, 1) for a, b in zip(edges[:-1], edges[1:])])
        m_in = np.cumsum(m_inc)
        o_tail = shell_mass(inner_nodes[-1] if inner_nodes.size else 0.0, R, 1)
        o_out = o_tail + (np.sum(o_inc) - np.cumsum(o_inc))
        k = inner_nodes.size
        pot[:k] = m_in / inner_nodes + o_out
        pot[k:] = total / r[k:]
    else:
        pot = newton_potential(sigma).values
    gap = 1.0 / r - pot
    tol = rtol / r
    upper = np.where(r < R, 1.0 / r, 0.0)
    bad = (gap < -tol) | (gap > upper + tol)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise LemmaViolation(
            f"smoothing gap {gap[i]:.3e} at r={r[i]:.4g} violates 0 <= gap <= 1/r * [r < R]"
        )
    return RadialField(sigma.grid, gap, role="potential")


# ---------------------------------------------------------------------------
# transformations and metadata


def rescale(f: RadialField, lam: float, power: float, role: Optional[str] = None) -> RadialField:
    """``lam^power f(lam r)`` represented exactly on the grid ``nodes / lam``."""
    grid = f.grid.scaled(1.0 / lam)
    R = None if f.support_radius is None else f.support_radius / lam
    return RadialField(grid, f.values * lam**power, role=role or f.role, support_radius=R)


def resample(f: RadialField, grid: RadialGrid) -> RadialField:
    """Monotone cubic (PCHIP) resampling; preserves non-negativity."""
    vals = f(grid.nodes)
    if f.role in ("density", "mollifier"):
        vals = np.maximum(vals, 0.0)
    return RadialField(grid, vals, role=f.role, support_radius=f.support_radius, profile=f.profile)


def decay_rate(f: RadialField, lo: float = 1e-12, hi: float = 1e-3) -> float:
    """Exponential decay rate ``k`` from a least-squares fit ``|f| ~ C exp(-k r)`` on the tail.

    The fit window is the outer region where ``lo < |f|/max|f| < hi``.

    Raises
    ------
    ResolutionError
        If fewer than 8 tail samples fall in the window, or the fitted rate
        is not positive.
    """
    a = np.abs(f.values)
    peak = a.max()
    if peak == 0:
        raise ResolutionError("zero field has no decay rate")
    rel = a / peak
    i0 = int(np.argmax(a))
    sel = np.zeros(a.size, dtype=bool)
    sel[i0:] = (rel[i0:] > lo) & (rel[i0:] < hi)
    if sel.sum() < 8:
        raise ResolutionError("tail not resolved: enlarge r_max to fit the exponential decay")
    rr = f.r[sel]
    # |f| ~ C r^-1 exp(-k r) for bound states; fit log(r |f|)
    y = np.log(rr * a[sel])
    k = -np.polyfit(rr, y, 1)[0]
    if not k > 0:
        raise ResolutionError(f"fitted decay rate {k:.3g} is not positive; enlarge r_max")
    return float(k)


def save_field(path, f: RadialField, extra: Optional[dict] = None) -> tuple[Path, Path]:
    """Write ``path`` (CSV ``r,value``, 17 significant digits) and ``path.json`` metadata."""
    path = Path(path)
    lines = ["r,value"] + [f"{r:.17g},{v:.17g}" for r, v in zip(f.r, f.values)]
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    meta = {
        "grid": f.grid.to_dict(),
        "role": f.role,
        "support_radius": f.support_radius,
        "mass": mass(f),
        "norms": {p: lp_norm(f, float(p)) for p in ("1", "1.5", "2", "2.5")},
    }
    try:
        meta["decay_rate"] = decay_rate(f)
    except ResolutionError:
        meta["decay_rate"] = None
    if extra:
        meta.update(extra)
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="ascii", newline="\n")
    return path, side


def load_field(path) -> RadialField:
    """Inverse of :func:`save_field`."""
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = path.with_name(path.name + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    scheme = meta.get("grid", {}).get("scheme", "uniform")
    grid = RadialGrid(data[:, 0], scheme)
    return RadialField(grid, data[:, 1], role=meta.get("role", "amplitude"), support_radius=meta.get("support_radius"))
