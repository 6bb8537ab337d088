"""Levy measure profiles, symbol and Pruitt scale functions.

A model is a symmetric pure-jump Levy measure ``nu(z) dz = g(|z|) dz``
with a radial nonincreasing density profile g.  From g we derive

* the characteristic exponent ``psi(xi) = int (1 - cos(xi.z)) g(|z|) dz``,
* the truncated second-moment functions ``h`` and ``K``,
* the scale function ``V = 1/sqrt(h)`` and its inverse,
* a slowly-varying majorant ``g*`` of g,
* an empirical audit of the lower scaling / doubling hypotheses.

Profiles supported: the isotropic alpha-stable density ``A |z|^{-d-a}``
(normalised so that psi(xi) = |xi|^a exactly), its exponential tempering
``A e^{-lam |z|} |z|^{-d-a}``, a Gaussian-tail variant
``A e^{-|z|^2} |z|^{-d-a}`` (whose own tail decays too fast for the
majorant property, which is the point of g*), and arbitrary user
profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .quadrature import (
    ang_zero_edges,
    log_edges,
    one_minus_ang,
    one_minus_ang_head_integral,
    panel_integrals,
    panel_sum,
    sphere_surface,
    wynn_epsilon,
)

KINDS = ("IsotropicStable", "TemperedStable", "SubordinatedGaussianTail", "UserProfile")


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot reach the requested tolerance."""

    def __init__(self, message: str, achieved: float = math.nan):
        super().__init__(message)
        self.achieved = achieved


class NotInYError(ValueError):
    """Raised when a function fails the weighted-L1 integrability test."""


def stable_normalization(dim: int, alpha: float) -> float:
    """Levy density constant A with A|z|^{-d-a} having symbol |xi|^a."""
    return (
        2.0**alpha
        * special.gamma((dim + alpha) / 2.0)
        / (np.pi ** (dim / 2.0) * abs(special.gamma(-alpha / 2.0)))
    )


@dataclass(frozen=True)
class LevyModel:
    """Calibrated symmetric Levy measure profile (immutable)."""

    kind: str
    dim: int
    alpha: float
    tempering: float = 0.0
    normalization: float = 1.0
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    quad_rel_tol: float = 1e-8
    quad_abs_tol: float = 1e-10
    grid_min: float = 1e-6
    grid_max: float = 1e3

    def g(self, s):
        """Radial density profile g(s), vectorised over s > 0."""
        s = np.asarray(s, dtype=float)
        if self.kind == "UserProfile":
            return np.asarray(self.profile(s), dtype=float)
        out = self.normalization * s ** (-self.dim - self.alpha)
        if self.kind == "TemperedStable":
            out = out * np.exp(-self.tempering * s)
        elif self.kind == "SubordinatedGaussianTail":
            out = out * np.exp(-(s**2))
        return out

    @property
    def has_stable_symbol(self) -> bool:
        return self.kind == "IsotropicStable"

    def config_lines(self) -> list[str]:
        return [
            f"kind={self.kind}",
            f"dim={self.dim}",
            f"alpha={self.alpha!r}",
            f"tempering={self.tempering!r}",
            f"quad_rel_tol={self.quad_rel_tol!r}",
            f"quad_abs_tol={self.quad_abs_tol!r}",
            f"grid_min={self.grid_min!r}",
            f"grid_max={self.grid_max!r}",
        ]


def make_model(kind: str, dim: int, alpha: float, tempering: float = 0.0,
               profile: Optional[Callable] = None, **tols) -> LevyModel:
    """Construct and calibrate a model; see module docstring for kinds."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if dim < 1 or dim > 3 or int(dim) != dim:
        raise ValueError(f"dim must be an integer in 1..3, got {dim}")
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha (order) must lie in (0, 2), got {alpha}")
    if tempering < 0:
        raise ValueError(f"tempering must be >= 0, got {tempering}")
    if kind == "UserProfile" and profile is None:
        raise ValueError("UserProfile requires a profile callable")
    if kind == "IsotropicStable" and tempering != 0.0:
        raise ValueError("IsotropicStable requires tempering = 0")
    A = 1.0 if kind == "UserProfile" else stable_normalization(int(dim), alpha)
    return LevyModel(kind=kind, dim=int(dim), alpha=alpha, tempering=tempering,
                     normalization=A, profile=profile, **tols)


# ---------------------------------------------------------------------------
# symbol


def _local_power(g, s: float) -> float:
    g1, g2 = float(g(np.array([s]))[0]), float(g(np.array([2 * s]))[0])
    if g1 <= 0 or g2 <= 0:
        return 0.0
    return math.log(g2 / g1) / math.log(2.0)


def _profile_moment_head(model: LevyModel, smin: float) -> float:
    """int_0^smin s^{d+1} g(s) ds, using the local power of g near 0."""
    p = _local_power(model.g, smin)
    k = model.dim + 1 + p
    if k <= -1:
        raise QuadratureError("second moment diverges at the origin")
    # g(s) ~ g(smin) (s/smin)^p below smin
    return float(model.g(np.array([smin]))[0]) * smin ** (model.dim + 2) / (k + 1)


def symbol(model: LevyModel, xi) -> float:
    """Characteristic exponent psi(xi); closed form for the stable kind.

    For non-stable profiles the radial integral
    ``S_d int (1 - Lambda_d(|xi| s)) g(s) s^{d-1} ds`` is computed with a
    series head below s0, log panels through the first oscillation, and a
    zero-aligned accelerated tail split as
    ``int g s^{d-1} - int Lambda_d(|xi| s) g(s) s^{d-1}``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = float(np.linalg.norm(xi))
    if rho == 0.0:
        return 0.0
    if model.has_stable_symbol:
        return rho**model.alpha
    return _symbol_quadrature(model, rho)


def _symbol_quadrature(model: LevyModel, rho: float, gl: int = 32,
                       per_decade: int = 10) -> float:
    d = model.dim
    Sd = sphere_surface(d)
    smin = min(model.grid_min, 1e-8 / rho)

    # head: 1 - Lambda_d(rho s) ~ (rho s)^2 / (2d) below smin
    head = rho**2 / (2.0 * d) * _profile_moment_head(model, smin)

    def f_body(s):
        return one_minus_ang(rho * s, d) * model.g(s) * s ** (d - 1)

    # body: up to the first zero of Lambda_d, log-spaced panels
    first_zero = ang_zero_edges(rho, 0.0, 2, d)[1]
    body = panel_sum(f_body, log_edges(smin, first_zero, per_decade), gl)

    # tail: int_{z}          g s^{d-1}              (monotone part)
    #     - int_{z} Lambda_d(rho s) g s^{d-1}       (oscillatory part)
    def f_mass(s):
        return model.g(s) * s ** (d - 1)

    s_hi = model.grid_max * 10.0
    mass = panel_sum(f_mass, log_edges(first_zero, s_hi, per_decade), gl)
    g_hi = float(model.g(np.array([s_hi]))[0])
    if g_hi > 0.0:
        p_tail = _local_power(model.g, s_hi)
        if p_tail + d > 0:
            raise QuadratureError(
                f"profile mass tail does not decay (local power {p_tail:.3f})")
        mass += g_hi * s_hi**d / (-(p_tail + d))

    edges = ang_zero_edges(rho, first_zero, 64, d)

    def f_osc(s):
        from .quadrature import ang_kernel
        return ang_kernel(rho * s, d) * model.g(s) * s ** (d - 1)

    osc = wynn_epsilon(np.cumsum(panel_integrals(f_osc, edges, gl)))
    return Sd * (head + body + mass - osc)


def symbol_dual_check(model: LevyModel, xi) -> tuple[float, float]:
    """psi by two independent quadrature routes; returns (value, spread).

    Route 1 is the zero-aligned panel scheme of :func:`symbol`.  Route 2
    integrates the same radial integrand with Richardson-extrapolated
    trapezoid sums in log coordinates, plus a termwise series head for
    the (0, s0] piece evaluated with scipy's adaptive quadrature.
    """
    from scipy.integrate import quad as _quad
    from .quadrature import _one_minus_ang_coeffs

    rho = float(np.linalg.norm(np.atleast_1d(xi)))
    v1 = _symbol_quadrature(model, rho)
    d, Sd = model.dim, sphere_surface(model.dim)

    s0 = 1e-6
    coeffs = _one_minus_ang_coeffs(d, 6)
    head = 0.0
    for k, ck in enumerate(coeffs, start=1):
        mk = _quad(lambda s: float(model.g(np.array([s]))[0]) * s ** (2 * k + d - 1),
                   0.0, s0, limit=200)[0]
        head += ck * rho ** (2 * k) * mk

    def integrand(s):
        return one_minus_ang(rho * s, d) * model.g(s) * s ** (d - 1)

    lo = math.log(s0)
    hi = math.log(200.0 / min(1.0, model.tempering or 1.0))
    results = []
    for n in (4096, 8192, 16384):
        u = np.linspace(lo, hi, n + 1)
        s = np.exp(u)
        results.append(np.trapezoid(integrand(s) * s, u))
    # two Richardson steps (trapezoid error ~ h^2)
    r1 = results[1] + (results[1] - results[0]) / 3.0
    r2 = results[2] + (results[2] - results[1]) / 3.0
    v2 = Sd * (head + r2 + (r2 - r1) / 15.0)
    return v1, abs(v1 - v2)


@lru_cache(maxsize=32)
def psi_radial(model: LevyModel) -> Callable[[np.ndarray], np.ndarray]:
    """Fast vectorised psi(rho) for the radial symbol.

    Stable models use the closed form; others get a tabulated log-log
    interpolant (kernel quadratures query psi millions of times).
    """
    if model.has_stable_symbol:
        alpha = model.alpha

        def psi_stable(rho):
            return np.asarray(rho, dtype=float) ** alpha

        return psi_stable

    grid = np.geomspace(1e-6, 1e7, 200 * 13 + 1)
    vals = np.array([_symbol_quadrature(model, float(r), gl=16, per_decade=6)
                     for r in grid])
    interp = LogLogInterp(grid, vals)

    def psi_tab(rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        pos = rho > 0
        out[pos] = interp(rho[pos])
        return out

    return psi_tab


def psi_star(model: LevyModel, rho) -> np.ndarray:
    """sup over |xi| <= rho of psi; running max along the radial grid."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    vals = np.array([symbol(model, np.array([r] + [0.0] * (model.dim - 1)))
                     for r in rho])
    order = np.argsort(rho)
    run = np.maximum.accumulate(vals[order])
    out = np.empty_like(vals)
    out[order] = run
    return out


# ---------------------------------------------------------------------------
# scale functions h, K, V, V^{-1}


class LogLogInterp:
    """Pchip interpolation of positive data in log-log coordinates, with
    log-linear (power law) extrapolation beyond the tabulated range.

    Explicit ``lo_slope`` / ``hi_slope`` override the fitted boundary
    slopes (used where the analytic tail exponent is known and the
    tabulated tail sits near the quadrature noise floor)."""

    def __init__(self, x: np.ndarray, y: np.ndarray,
                 lo_slope: Optional[float] = None,
                 hi_slope: Optional[float] = None):
        self.lo, self.hi = float(x[0]), float(x[-1])
        self._interp = PchipInterpolator(np.log(x), np.log(y))
        eps = 0.02
        self._lo_val = float(self._interp(math.log(self.lo)))
        self._hi_val = float(self._interp(math.log(self.hi)))
        self._lo_slope = lo_slope if lo_slope is not None else (
            float(self._interp(math.log(self.lo * (1 + eps))))
            - self._lo_val) / math.log1p(eps)
        self._hi_slope = hi_slope if hi_slope is not None else (
            self._hi_val
            - float(self._interp(math.log(self.hi / (1 + eps))))) / math.log1p(eps)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        lr = np.log(np.clip(r, 1e-300, None))
        out = np.exp(self._interp(np.clip(lr, math.log(self.lo), math.log(self.hi))))
        below = r < self.lo
        if np.any(below):
            out = np.where(below, np.exp(self._lo_val + self._lo_slope * (lr - math.log(self.lo))), out)
        above = r > self.hi
        if np.any(above):
            out = np.where(above, np.exp(self._hi_val + self._hi_slope * (lr - math.log(self.hi))), out)
        return out


@dataclass(frozen=True)
class ScaleFunctions:
    """Tabulated Pruitt functions of a model, with monotone interpolation.

    h(r) = int (1 ^ |x|^2/r^2) g(|x|) dx   (nonincreasing)
    K(r) = r^{-2} int_{|x|<r} |x|^2 g dx   (K <= h)
    V(r) = 1/sqrt(h(r)), V(0) = 0          (nondecreasing, subadditive-ish)
    """

    owner: LevyModel
    grid: np.ndarray
    h_table: np.ndarray
    K_table: np.ndarray
    _h_interp: LogLogInterp = field(repr=False, compare=False, default=None)
    _K_interp: LogLogInterp = field(repr=False, compare=False, default=None)

    def h(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("h(r) requires r > 0")
        return self._h_interp(r)

    def K(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("K(r) requires r > 0")
        return self._K_interp(r)

    def V(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r, dtype=float)
        pos = r > 0
        out[pos] = 1.0 / np.sqrt(self._h_interp(r[pos]))
        return out if out.shape else float(out)

    def V2(self, r):
        """V(r)^2 = 1/h(r), with V2(0) = 0."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r, dtype=float)
        pos = r > 0
        out[pos] = 1.0 / self._h_interp(r[pos])
        return out

    def V_inv(self, v) -> float:
        """Inverse of the monotone V by bisection on h; V_inv(0) = 0."""
        v = float(v)
        if v < 0:
            raise ValueError("V_inv requires v >= 0")
        if v == 0.0:
            return 0.0
        target = 1.0 / v**2  # solve h(r) = target
        lo, hi = self.grid[0], self.grid[-1]
        # extend bracket geometrically if needed (log-linear extension of h)
        while float(self.h(np.array([lo]))[0]) < target and lo > 1e-200:
            lo *= 0.125
        while float(self.h(np.array([hi]))[0]) > target and hi < 1e200:
            hi *= 8.0
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if float(self.h(np.array([mid]))[0]) > target:
                lo = mid
            else:
                hi = mid
            if hi / lo - 1.0 < 1e-14:
                break
        return math.sqrt(lo * hi)


@lru_cache(maxsize=32)
def scale_functions(model: LevyModel, points_per_decade: int = 400) -> ScaleFunctions:
    """Tabulate h and K on a log grid [grid_min, grid_max].

    Uses cumulative per-interval Gauss-Legendre for the two moments
    I2(r) = int_0^r s^{d+1} g ds and M(r) = int_r^inf s^{d-1} g ds, so a
    single pass prices the whole table:
    K(r) = S_d I2(r)/r^2,  h(r) = K(r) + S_d M(r).
    """
    d = model.dim
    Sd = sphere_surface(d)
    decades = math.log10(model.grid_max / model.grid_min)
    n = int(round(decades * points_per_decade)) + 1
    grid = np.geomspace(model.grid_min, model.grid_max, n)

    # extended grid above grid_max so that M is accurate at the top node
    ext = np.geomspace(model.grid_max, model.grid_max * 1e6, 6 * 16 + 1)[1:]
    nodes = np.concatenate([grid, ext])

    gx, gw = np.polynomial.legendre.leggauss(8)
    a, b = nodes[:-1], nodes[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s = mid[:, None] + half[:, None] * gx[None, :]
    w = half[:, None] * gw[None, :]
    gs = model.g(s.ravel()).reshape(s.shape)

    i2_parts = np.sum(gs * s ** (d + 1) * w, axis=1)
    m_parts = np.sum(gs * s ** (d - 1) * w, axis=1)

    head = _profile_moment_head(model, float(grid[0]))
    I2 = head + np.concatenate([[0.0], np.cumsum(i2_parts)])[: len(grid)]

    g_top = float(model.g(np.array([nodes[-1]]))[0])
    if g_top > 0.0:
        p_tail = _local_power(model.g, float(nodes[-1]))
        if p_tail + d >= 0:
            raise QuadratureError("profile mass not integrable at infinity")
        tail = g_top * nodes[-1] ** d / (-(p_tail + d))
    else:
        tail = 0.0
    M_all = tail + np.concatenate([[0.0], np.cumsum(m_parts[::-1])])[::-1]
    M = M_all[: len(grid)]

    K_table = Sd * I2 / grid**2
    h_table = K_table + Sd * M

    return ScaleFunctions(owner=model, grid=grid, h_table=h_table,
                          K_table=K_table,
                          _h_interp=LogLogInterp(grid, h_table),
                          _K_interp=LogLogInterp(grid, K_table))


def scale_eval(scale: ScaleFunctions, which: str, r: float) -> float:
    """Evaluate one of {h, K, V, V_inv} at a single radius."""
    if which == "h":
        return float(scale.h(np.array([r]))[0])
    if which == "K":
        return float(scale.K(np.array([r]))[0])
    if which == "V":
        if r < 0:
            raise ValueError("V requires r >= 0")
        return float(scale.V(np.array([r]))[0])
    if which == "V_inv":
        return scale.V_inv(r)
    raise ValueError(f"unknown scale function {which!r}")


# ---------------------------------------------------------------------------
# majorant g*


@dataclass(frozen=True)
class MajorantProfile:
    """Nonincreasing majorant of g with a slowly varying tail.

    g*(r) = g(r) for r <= r0 and max(g(r), g(r0) e^{-(r - r0)}) beyond,
    so g*(r+1) stays comparable to g*(r) however fast g falls off.
    """

    base: LevyModel
    r0: float = 2.0

    def g_star(self, r):
        r = np.asarray(r, dtype=float)
        g = self.base.g(r)
        g0 = float(self.base.g(np.array([self.r0]))[0])
        exp_tail = g0 * np.exp(-(r - self.r0))
        return np.where(r <= self.r0, g, np.maximum(g, exp_tail))

    def weight(self, r):
        """1 ^ g*(r), the weight of the space-Y norm."""
        return np.minimum(1.0, self.g_star(r))

    def tail_crossover(self) -> Optional[float]:
        """Radius > r0 where g overtakes the exponential branch again
        (None when the exponential branch dominates forever)."""
        from scipy.optimize import brentq

        g0 = float(self.base.g(np.array([self.r0]))[0])

        def diff(s):
            return (math.log(float(self.base.g(np.array([s]))[0]) + 1e-320)
                    - (math.log(g0) - (s - self.r0)))

        lo = self.r0 * (1.0 + 1e-9)
        if diff(lo) >= 0:
            return None  # g never dips below the exponential branch
        hi = lo * 2
        while diff(hi) < 0:
            hi *= 2
            if hi > 1e6:
                return None
        return float(brentq(diff, lo, hi, xtol=1e-14))


def majorant(model: LevyModel, r0: float = 2.0) -> MajorantProfile:
    return MajorantProfile(base=model, r0=r0)


# ---------------------------------------------------------------------------
# weighted L1 norm (space Y)


def y_norm(u: Callable[[np.ndarray], np.ndarray], model: LevyModel,
           maj: Optional[MajorantProfile] = None,
           truncation_radii: tuple[float, ...] = (64.0, 256.0, 1024.0),
           breakpoints: tuple[float, ...] = ()) -> float:
    """int |u(x)| (1 ^ g*(|x|)) dx with a divergence check.

    ``u`` takes an (n, d) array of points.  The integral is computed over
    balls of increasing radius; if the increments keep growing the
    function is declared outside Y.  ``breakpoints`` are radii where u is
    allowed to jump (panel edges are aligned with them).
    """
    if maj is None:
        maj = majorant(model)
    d = model.dim
    Sd = sphere_surface(d)

    if d == 1:
        def shell_avg(s):
            pts = s[:, None]
            return 0.5 * (np.abs(u(pts)) + np.abs(u(-pts)))
    elif d == 2:
        theta = (np.arange(16) + 0.5) * (2 * np.pi / 16)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)

        def shell_avg(s):
            pts = s[:, None, None] * dirs[None, :, :]
            return np.mean(np.abs(u(pts.reshape(-1, 2))).reshape(len(s), -1), axis=1)
    else:
        gx, gw = np.polynomial.legendre.leggauss(12)
        phis = (np.arange(12) + 0.5) * (2 * np.pi / 12)
        ct = gx
        st = np.sqrt(1 - ct**2)
        dirs = np.stack([
            np.repeat(st, 12) * np.cos(np.tile(phis, 12)),
            np.repeat(st, 12) * np.sin(np.tile(phis, 12)),
            np.repeat(ct, 12),
        ], axis=1)
        wts = np.repeat(gw, 12) / (2.0 * 12)

        def shell_avg(s):
            pts = s[:, None, None] * dirs[None, :, :]
            vals = np.abs(u(pts.reshape(-1, 3))).reshape(len(s), -1)
            return vals @ wts

    def integrand(s):
        with np.errstate(over="ignore", invalid="ignore"):
            return shell_avg(s) * maj.weight(s) * s ** (d - 1)

    # panel breakpoints at the kinks of the weight: g* = 1, the majorant
    # switch radius r0, and the crossover back to g
    from scipy.optimize import brentq

    kinks = [maj.r0] + [float(b) for b in breakpoints]
    cross = maj.tail_crossover()
    if cross is not None:
        kinks.append(cross)
    probe = np.geomspace(1e-8, truncation_radii[-1], 2000)
    wv = maj.g_star(probe) - 1.0
    hits = np.nonzero(wv[:-1] * wv[1:] < 0)[0]
    for i in hits:
        kinks.append(float(brentq(
            lambda s: float(maj.g_star(np.array([s]))[0]) - 1.0,
            probe[i], probe[i + 1], xtol=1e-14)))

    vals = []
    prev_edge = 1e-8
    total = 0.0
    for R in truncation_radii:
        edges = log_edges(prev_edge, R, 12)
        ins = [k for k in kinks if prev_edge < k < R]
        if ins:
            edges = np.unique(np.concatenate([edges, ins]))
        total += Sd * panel_sum(integrand, edges, 16)
        vals.append(total)
        prev_edge = R
    if not np.isfinite(vals[-1]):
        raise NotInYError("weighted integrand overflows; not in Y")

    # integrability at infinity from the local power of the full shell
    # integrand (weight decay against the growth of |u|); slow but
    # integrable tails get an analytic power-law completion
    R = truncation_radii[-1]
    f_R = float(integrand(np.array([R]))[0])
    tail = 0.0
    if f_R > 0.0:
        f_2R = float(integrand(np.array([2.0 * R]))[0])
        if not np.isfinite(f_2R):
            raise NotInYError("weighted integrand overflows; not in Y")
        if f_2R > 0.0:
            p = math.log(f_2R / f_R) / math.log(2.0)
            if p >= -1.0:
                raise NotInYError(
                    f"weighted integrand decays like s^{p:.2f} at s={R:g}; "
                    "the integral diverges, not in Y")
            tail = Sd * f_R * R / (-(p + 1.0))
    return float(vals[-1] + tail)


# ---------------------------------------------------------------------------
# scaling audit (WLSC, doubling, psi-h comparison)


@dataclass(frozen=True)
class ScalingAudit:
    alpha_hat: float
    theta_hat: float
    c_hat: float
    doubling_const: float
    psi_h_consts: tuple[float, float]
    grid: np.ndarray
    ls_slope: float
    alpha_hat_restricted: float = math.nan  # audit restricted to r > 1
    c_hat_restricted: float = math.nan
    rows: tuple = ()  # (r, lambda, psi_star_r, psi_star_lr, lsc_ratio, doubling_ratio)

    def lsc_holds(self) -> bool:
        return self.alpha_hat > 0 and 0 < self.c_hat <= 1.0


def audit_scaling(model: LevyModel, grid: Optional[np.ndarray] = None) -> ScalingAudit:
    """Empirical weak-lower-scaling / doubling / psi-vs-h audit.

    alpha_hat is the smallest pairwise log-slope of psi* over the lambda
    lattice {2^{k/4}} (ties broken toward the least-squares slope when
    they agree to 1e-3), and c_hat is recomputed so that
    psi*(lam r) >= c_hat lam^alpha_hat psi*(r) on every audited pair.
    theta_hat = 0 if the global audit matches the restricted (r > 1)
    audit, else 1.
    """
    if grid is None:
        grid = np.geomspace(1e-3, 1e3, 61)
    grid = np.asarray(grid, dtype=float)
    if grid[-1] / grid[0] < 99.0:
        raise ValueError("audit grid must span at least two decades")

    lams = 2.0 ** (np.arange(1, 17) / 4.0)
    base = psi_star(model, grid)
    scaled = np.array([psi_star(model, grid * lam) for lam in lams])  # (nlam, nr)
    with np.errstate(divide="ignore"):
        slopes = np.log(scaled / base[None, :]) / np.log(lams)[:, None]

    def fit(mask_r):
        sl = slopes[:, mask_r]
        a_min = float(np.min(sl))
        lr = np.log(grid[mask_r])
        lp = np.log(base[mask_r])
        ls = float(np.polyfit(lr, lp, 1)[0])
        a_hat = max(a_min, ls) if abs(ls - a_min) < 1e-3 else a_min
        with np.errstate(over="ignore"):
            c = float(np.min(scaled[:, mask_r] / (lams[:, None] ** a_hat * base[None, mask_r])))
        return a_hat, min(c, 1.0), ls

    a_global, c_global, ls_global = fit(np.ones_like(grid, dtype=bool))
    mask1 = grid > 1.0
    if np.any(mask1):
        a_one, c_one, ls_one = fit(mask1)
    else:
        a_one, c_one, ls_one = a_global, c_global, ls_global

    if a_global >= a_one - 0.01:
        alpha_hat, c_hat, theta_hat, ls = a_global, c_global, 0.0, ls_global
    else:
        alpha_hat, c_hat, theta_hat, ls = a_one, c_one, 1.0, ls_one

    # doubling constant of g on (0, 1]
    sub = grid[grid <= 1.0]
    if len(sub) == 0:
        sub = np.geomspace(1e-3, 1.0, 13)
    ratio = model.g(sub) / model.g(2 * sub)
    doubling = float(np.max(np.maximum(ratio, 1.0 / ratio)))

    # empirical h(1/|xi|) / psi*(|xi|) bracket
    sf = scale_functions(model)
    hvals = sf.h(1.0 / grid)
    with np.errstate(divide="ignore"):
        hw = hvals / base
    psi_h = (float(np.min(hw)), float(np.max(hw)))

    rows = []
    lam2_idx = int(np.argmin(np.abs(lams - 2.0)))
    for j, r in enumerate(grid):
        rr = min(r, 1.0)
        gr = float(model.g(np.array([rr]))[0] / model.g(np.array([2 * rr]))[0])
        rows.append((float(r), float(lams[lam2_idx]), float(base[j]),
                     float(scaled[lam2_idx, j]), float(slopes[lam2_idx, j]), gr))

    return ScalingAudit(alpha_hat=alpha_hat, theta_hat=theta_hat, c_hat=c_hat,
                        doubling_const=doubling, psi_h_consts=psi_h, grid=grid,
                        ls_slope=ls, alpha_hat_restricted=a_one,
                        c_hat_restricted=c_one, rows=tuple(rows))
