"""Harmonic functions by Poisson integration and the estimate checks.

A harmonic field is the Poisson extension of nonnegative radial
exterior data into a centred ball: f(x) = int P_D(x, z) f(z) dz.  For
the stable kind the ball Poisson kernel is the calibrated closed form,
and its radial reduction makes every evaluation a one-dimensional
quadrature; the empirical-exit route (mean of f over sampled exit
positions) provides the independent Monte Carlo oracle.

On top of the field sit the verification reports: the gradient bound
|grad f| <= C f / (delta ^ 1) with a dual-method gradient, the scale
invariant Harnack ratio, the Green-gradient corollary ratio, the
annulus splitting integrals, and the Dynkin-operator residuals used by
the appendix consistency checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import killed as killed_mod
from .killed import (
    DomainSpec,
    EstimatorResult,
    SimConfig,
    VerificationReport,
    Z99,
    _radial_exit_law,
    ball_green_constant,
    grad_green,
    green_function,
    sample_exit,
    stable_ball_green_shape,
)
from .model import LevyModel, y_norm
from .parallel import map_indexed
from .quadrature import log_edges, panel_integrals, sphere_surface

EXACT_STABLE_POISSON = "ExactStablePoisson"
IW_QUADRATURE = "IWQuadrature"
EMPIRICAL_EXIT = "EmpiricalExit"


# ---------------------------------------------------------------------------
# exterior data library (radial, nonnegative)


class IndicatorShell:
    """f = 1 on a < |z| < b, else 0."""

    def __init__(self, a: float, b: float):
        if not 0 < a < b:
            raise ValueError("need 0 < a < b")
        self.a, self.b = float(a), float(b)
        self.breakpoints = (self.a, self.b)
        self.y_tag = "compact"

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        return ((s > self.a) & (s < self.b)).astype(float)

    def __call__(self, points):
        return self.radial(np.linalg.norm(np.atleast_2d(points), axis=1))


class BumpShell:
    """Smooth bump exp(1 - 1/(1 - t^2)) on |z| in (c - w, c + w)."""

    def __init__(self, center: float, width: float):
        self.c, self.w = float(center), float(width)
        self.breakpoints = (self.c - self.w, self.c + self.w)
        self.y_tag = "compact"

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        t = (s - self.c) / self.w
        out = np.zeros_like(s)
        inside = np.abs(t) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return out

    def __call__(self, points):
        return self.radial(np.linalg.norm(np.atleast_2d(points), axis=1))


class HeavyTailData:
    """f(z) = (1 + |z|)^q beyond an inner radius; q < alpha keeps it in Y
    for the stable majorant (the membership boundary is q = alpha)."""

    def __init__(self, q: float, inner: float = 1.0):
        self.q, self.inner = float(q), float(inner)
        self.breakpoints = (self.inner,)
        self.y_tag = "heavy-tail"

    def radial(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s >= self.inner, (1.0 + s) ** self.q, 0.0)

    def __call__(self, points):
        return self.radial(np.linalg.norm(np.atleast_2d(points), axis=1))


# ---------------------------------------------------------------------------
# Poisson-kernel radial quadrature for the centred stable ball


def _m_factor(d: int, s: np.ndarray, q: float) -> np.ndarray:
    """Spherical integral of |x - s theta|^{-d} over the unit sphere."""
    if d == 1:
        return 2.0 * s / (s**2 - q**2)
    if d == 2:
        return 2.0 * math.pi / (s**2 - q**2)
    return 4.0 * math.pi / (s * (s**2 - q**2))


def _m_factor_dq(d: int, s: np.ndarray, q: float) -> np.ndarray:
    den = (s**2 - q**2) ** 2
    if d == 1:
        return 4.0 * s * q / den
    if d == 2:
        return 4.0 * math.pi * q / den
    return 8.0 * math.pi * q / (s * den)


def poisson_ball_quad(model: LevyModel, r: float, q: float,
                      f_radial: Callable[[np.ndarray], np.ndarray],
                      breakpoints: Sequence[float] = (),
                      deriv: bool = False, gl: int = 24) -> float:
    """int P_{B_r}(x, z) f(|z|) dz for |x| = q < r (or its d/dq).

    Edge (s^2 - r^2)^{-a/2} handled by the power substitution
    v = w^p, p = 2/(2 - a); the far field uses log panels plus a local
    power-law remainder.
    """
    if not model.has_stable_symbol:
        raise ValueError("closed-form Poisson quadrature requires the stable kind")
    a, d = model.alpha, model.dim
    if not (0.0 <= q < r):
        raise ValueError("need |x| < r")
    N = _radial_exit_law(a).norm_const(d)
    c = r**2 - q**2
    p = 2.0 / (2.0 - a)

    # the derivative is a sum of two single-signed power-like terms;
    # integrating them separately keeps the tail completion valid
    def term_value(s, v):
        return N * c ** (a / 2.0) * v ** (-a / 2.0) * s ** (d - 1) * _m_factor(d, s, q)

    def term_d1(s, v):
        return (N * v ** (-a / 2.0) * s ** (d - 1)
                * (a / 2.0) * c ** (a / 2.0 - 1.0) * (-2.0 * q) * _m_factor(d, s, q))

    def term_d2(s, v):
        return (N * v ** (-a / 2.0) * s ** (d - 1)
                * c ** (a / 2.0) * _m_factor_dq(d, s, q))

    terms = [term_value] if not deriv else [term_d1, term_d2]

    # near field in the transformed variable: s = sqrt(r^2 + w^p)
    s1 = r + min(r, 1.0)
    w1 = (s1**2 - r**2) ** (1.0 / p)
    bp_w = sorted(set(
        float((b**2 - r**2) ** (1.0 / p)) for b in breakpoints if r < b < s1))
    near_edges = np.unique(np.concatenate([np.linspace(0.0, w1, 33), bp_w]))

    s_max = max(1e6 * r, 1e6)
    far_edges = log_edges(s1, s_max, 10)
    bp_s = [float(b) for b in breakpoints if s1 < b < s_max]
    if bp_s:
        far_edges = np.unique(np.concatenate([far_edges, bp_s]))

    val = 0.0
    for term in terms:
        def near(w):
            w = np.maximum(w, 1e-300)
            v = w**p
            s = np.sqrt(r**2 + v)
            jac = p * w ** (p - 1.0) / (2.0 * s)
            return term(s, v) * f_radial(s) * jac

        def far(s):
            return term(s, s**2 - r**2) * f_radial(s)

        val += float(np.sum(panel_integrals(near, near_edges, gl)))
        val += float(np.sum(panel_integrals(far, far_edges, gl)))

        # power-law remainder from the local slope of this term
        f_top = float(far(np.array([s_max]))[0])
        f_top2 = float(far(np.array([2.0 * s_max]))[0])
        if f_top * f_top2 > 0:
            slope = math.log(f_top2 / f_top) / math.log(2.0)
            if slope < -1.0:
                val += f_top * s_max / (-(slope + 1.0))
    return val


# ---------------------------------------------------------------------------
# harmonic fields


class HarmonicField:
    """Poisson extension of radial exterior data into the centred ball
    B(0, R); evaluation method selectable per the estimator triangle."""

    def __init__(self, model: LevyModel, domain: DomainSpec, exterior_data,
                 eval_method: str = EXACT_STABLE_POISSON,
                 check_y: bool = True):
        if domain.shape != "Ball" or any(c != 0.0 for c in domain.center):
            raise ValueError("harmonic fields live on centred balls")
        self.model = model
        self.domain = domain
        self.data = exterior_data
        self.eval_method = eval_method
        probe = exterior_data.radial(np.geomspace(domain.radius, 100 * domain.radius, 64))
        if np.any(probe < 0):
            raise ValueError("exterior data must be nonnegative")
        if check_y:
            # Y membership is a hypothesis of the gradient theorem
            self.y_norm = y_norm(exterior_data, model,
                                 breakpoints=getattr(exterior_data, "breakpoints", ()))
        else:
            self.y_norm = math.nan
        self._profile: Optional[PchipInterpolator] = None
        self._profile_grid: Optional[np.ndarray] = None

    # -- direct evaluation ---------------------------------------------------

    def value(self, x, config: Optional[SimConfig] = None) -> EstimatorResult:
        return harmonic_extend(self, x, config)

    def _data_radial(self, s):
        return self.data.radial(s)

    def radial_value(self, q: float) -> float:
        """f at radius q inside the ball by the closed-form kernel."""
        return poisson_ball_quad(self.model, self.domain.radius, q,
                                 self._data_radial,
                                 getattr(self.data, "breakpoints", ()))

    def radial_deriv(self, q: float) -> float:
        """dF/dq of the radial profile by the differentiated kernel."""
        return poisson_ball_quad(self.model, self.domain.radius, q,
                                 self._data_radial,
                                 getattr(self.data, "breakpoints", ()),
                                 deriv=True)

    # -- global radial profile (interior interpolation + exterior data) ------

    def _build_profile(self):
        R = self.domain.radius
        qs = np.unique(np.concatenate([
            [0.0],
            R - np.geomspace(R * 1e-6, R * 0.999, 90)[::-1],
            np.linspace(R * 1e-3, R * 0.985, 140),
        ]))
        qs = qs[(qs >= 0) & (qs < R)]
        vals = np.array(map_indexed(lambda qv: self.radial_value(float(qv)), qs))
        self._profile_grid = qs
        self._profile = PchipInterpolator(qs, vals)

    def global_radial(self, s) -> np.ndarray:
        """f on radii s: interpolated interior profile, data outside."""
        if self._profile is None:
            self._build_profile()
        s = np.atleast_1d(np.asarray(s, dtype=float))
        R = self.domain.radius
        out = np.empty_like(s)
        inside = s < R
        out[inside] = self._profile(np.clip(s[inside], 0.0, self._profile_grid[-1]))
        out[~inside] = self._data_radial(s[~inside])
        return out

    def sphere_mean(self, x, radii) -> np.ndarray:
        """Mean of the field over spheres of given radii around x.

        The angular integral in u = cos(angle) is split where the sphere
        crosses the kink radii of the field (data edges and the domain
        boundary), else a single rule smears the jumps."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        q = float(np.linalg.norm(x))
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        d = self.model.dim
        if q == 0.0:
            return self.global_radial(radii)
        if d == 1:
            return 0.5 * (self.global_radial(np.abs(q + radii))
                          + self.global_radial(np.abs(q - radii)))
        kink_r = [self.domain.radius] + list(getattr(self.data, "breakpoints", ()))
        gx, gw = np.polynomial.legendre.leggauss(24)
        out = np.empty_like(radii)
        for i, s in enumerate(radii):
            u_cuts = []
            for b in kink_r:
                u = (b**2 - q**2 - s**2) / (2.0 * q * s)
                if -1.0 < u < 1.0:
                    u_cuts.append(u)
            if d == 2:
                # smooth in the angle phi; weight 1/pi on (0, pi)
                cuts = np.unique([0.0, math.pi] + [math.acos(u) for u in u_cuts])
            else:
                cuts = np.unique([-1.0, 1.0] + u_cuts)
            total = 0.0
            for a_, b_ in zip(cuts[:-1], cuts[1:]):
                mid, half = 0.5 * (a_ + b_), 0.5 * (b_ - a_)
                t = mid + half * gx
                if d == 2:
                    u = np.cos(t)
                    dens = 1.0 / math.pi
                else:
                    u = t
                    dens = 0.5
                dist = np.sqrt(np.maximum(q**2 + s**2 + 2.0 * q * s * u, 0.0))
                total += float(np.sum(self.global_radial(dist) * dens * half * gw))
            out[i] = total
        return out


def harmonic_extend(field: HarmonicField, x, config: Optional[SimConfig] = None
                    ) -> EstimatorResult:
    """f(x) = int P_D(x, z) f(z) dz by the field's method."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not bool(field.domain.contains(x[None, :])[0]):
        raise ValueError("x must lie in the open domain")
    q = float(np.linalg.norm(x))
    if field.eval_method == EXACT_STABLE_POISSON:
        val = field.radial_value(q)
        return EstimatorResult(val, max(abs(val), 1.0) * 1e-8, 0)
    if field.eval_method == EMPIRICAL_EXIT:
        cfg = config or SimConfig(master_seed=1, n_paths=20000)
        batch = killed_mod._exit_batch_for(field.model, field.domain, x, cfg)
        vals = field.data(batch.exits)
        return killed_mod._mean_ci(vals, bias=0.0)
    if field.eval_method == IW_QUADRATURE:
        return _harmonic_iw(field, x, config or SimConfig(master_seed=1, n_paths=20000))
    raise ValueError(f"unknown evaluation method {field.eval_method!r}")


def _harmonic_iw(field: HarmonicField, x: np.ndarray, config: SimConfig) -> EstimatorResult:
    """f(x) = int_D G_D(x,y) [int f(z) nu(z-y) dz] dy: the Ikeda-Watanabe
    route through Monte Carlo Green values (d = 1)."""
    model, dom = field.model, field.domain
    if model.dim != 1:
        raise ValueError("the IW evaluation route is implemented for d = 1")
    r = dom.radius
    edges = np.linspace(-r, r, 41)
    xi = float(x[0])
    if -r < xi < r:
        edges = np.unique(np.concatenate([edges, xi + np.array([-1e-4, 0.0, 1e-4])]))
    gx, gw = np.polynomial.legendre.leggauss(8)
    aa, bb = edges[:-1], edges[1:]
    mid, half = 0.5 * (aa + bb), 0.5 * (bb - aa)
    ynod = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    wq = (half[:, None] * gw[None, :]).ravel()

    # exterior mass integral Phi(y) = int f(z) nu(z - y) dz over |z| > r
    def phi(y):
        def fz(s):
            return field._data_radial(s) * (model.g(np.abs(s - y)) + model.g(s + y))

        e = log_edges(r * (1 + 1e-12), 1e5, 12)
        bps = [b for b in getattr(field.data, "breakpoints", ()) if b > r]
        if bps:
            e = np.unique(np.concatenate([e, bps]))
        return float(np.sum(panel_integrals(fz, e, 16)))

    phis = np.array([phi(float(yv)) for yv in ynod])
    vals, cis, per_path, batch = killed_mod.green_values_shared_batch(
        model, dom, x, ynod[:, None], config)
    direct = killed_mod.potential_kernel(model).G(np.abs(ynod - xi))
    xi_i = per_path @ (wq * phis)
    est = float(np.sum(wq * phis * direct)) - float(np.mean(xi_i))
    sd = float(np.std(xi_i, ddof=1))
    return EstimatorResult(est, Z99 * sd / math.sqrt(len(xi_i)), len(xi_i))


# ---------------------------------------------------------------------------
# mean value property and Dynkin residuals


def mvp_residual(field: HarmonicField, x, inner_radius: float,
                 reference: Optional[float] = None) -> tuple[float, float]:
    """|f(x) - P_{B(x, rho)}[f](x)| and an error allowance.

    ``reference`` overrides the field value (used by negative controls
    that test a non-harmonic function through the same kernel)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = float(np.linalg.norm(x))
    rho = float(inner_radius)
    if q + rho >= field.domain.radius:
        raise ValueError("B(x, rho) must be relatively compact in the domain")
    fx = field.radial_value(q) if reference is None else reference

    bps = set()
    for b in list(getattr(field.data, "breakpoints", ())) + [field.domain.radius]:
        bps.add(abs(b - q))
        bps.add(b + q)

    def mean_f(s):
        return field.sphere_mean(x, s)

    val = poisson_ball_quad(field.model, rho, 0.0, mean_f, sorted(bps))
    err = max(abs(fx), abs(val), 1.0) * 1e-6
    return abs(val - fx), err


def sphere_mean_of(fn: Callable[[np.ndarray], np.ndarray], model: LevyModel,
                   x: np.ndarray):
    """Spherical means of a raw radial function around x (for controls)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = float(np.linalg.norm(x))
    d = model.dim

    def mean(radii):
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if q == 0.0:
            return fn(radii)
        if d == 1:
            return 0.5 * (fn(np.abs(q + radii)) + fn(np.abs(q - radii)))
        gx, gw = np.polynomial.legendre.leggauss(48)
        if d == 2:
            cos = np.cos(0.5 * (gx + 1.0) * math.pi)
        else:
            cos = gx
        w = gw * 0.5
        dist = np.sqrt(q**2 + radii[:, None] ** 2 + 2.0 * q * radii[:, None] * cos[None, :])
        return fn(dist.ravel()).reshape(dist.shape) @ w

    return mean


@lru_cache(maxsize=16)
def expected_exit_time_unit_ball(model: LevyModel) -> float:
    """E^0 tau_{B_1} as the integral of the calibrated closed-form ball
    Green function (occupation identity); scales as rho^alpha."""
    kappa = ball_green_constant(model)
    dom = DomainSpec.ball([0.0] * model.dim, 1.0)
    d = model.dim
    Sd = sphere_surface(d)
    origin = np.zeros(d)

    def f(s):
        return np.array([stable_ball_green_shape(
            model, dom, origin, np.concatenate([[sv], np.zeros(d - 1)]))
            for sv in s]) * s ** (d - 1)

    edges = np.unique(np.concatenate([np.geomspace(1e-8, 0.5, 60),
                                      1.0 - np.geomspace(1e-8, 0.5, 60)[::-1]]))
    return kappa * Sd * float(np.sum(panel_integrals(f, edges, 16)))


def expected_exit_time_center(model: LevyModel, rho: float) -> float:
    return rho**model.alpha * expected_exit_time_unit_ball(model)


def dynkin_residual(field: HarmonicField, x, radii: Sequence[float],
                    reference_fn: Optional[Callable] = None) -> list[float]:
    """(P_{B(x, rho)}[f](x) - f(x)) / E^x tau_{B(x, rho)} for shrinking
    rho; zero within error for MVP fields, and an approximation of the
    generator on smooth non-harmonic controls."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = float(np.linalg.norm(x))
    out = []
    for rho in radii:
        rho = float(rho)
        if q + rho >= field.domain.radius and reference_fn is None:
            raise ValueError("ball escapes the harmonicity domain")
        if reference_fn is None:
            fx = field.radial_value(q)
            mean_f = lambda s: field.sphere_mean(x, s)
            bps = set()
            for b in list(getattr(field.data, "breakpoints", ())) + [field.domain.radius]:
                bps.update((abs(b - q), b + q))
            bps = sorted(bps)
        else:
            fx = float(reference_fn(np.array([q]))[0])
            mean_f = sphere_mean_of(reference_fn, field.model, x)
            bps = []
        pb = poisson_ball_quad(field.model, rho, 0.0, mean_f, sorted(bps))
        out.append((pb - fx) / expected_exit_time_center(field.model, rho))
    return out


def generator_apply(model: LevyModel, fn_radial: Callable, x) -> float:
    """L f(x) by symmetrised quadrature of the jump integral
    (the odd compensator term vanishes against a symmetric measure)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = model.dim
    Sd = sphere_surface(d)
    mean = sphere_mean_of(fn_radial, model, x)
    fx = float(fn_radial(np.array([float(np.linalg.norm(x))]))[0])

    def integrand(s):
        return (mean(s) - fx) * model.g(s) * s ** (d - 1)

    s0 = 1e-7
    # quadratic head: sigma_x(s) - f(x) ~ c s^2
    c2 = float(integrand(np.array([s0]))[0]) / (model.g(np.array([s0]))[0] * s0 ** (d + 1))
    head = c2 * float(model.g(np.array([s0]))[0]) * s0 ** (d + 2) / 2.0
    # local power of g near 0 refines the head (exact for stable)
    from .model import _local_power
    p = _local_power(model.g, s0)
    k = d + 1 + p
    if k + 1 > 0:
        head = c2 * float(model.g(np.array([s0]))[0]) * s0 ** (d + 2) / (k + 1)
    edges = log_edges(s0, 1e4, 12)
    bps = [1.0]
    edges = np.unique(np.concatenate([edges, bps]))
    return Sd * (head + float(np.sum(panel_integrals(integrand, edges, 16))))


# ---------------------------------------------------------------------------
# gradient bound report (the main theorem check)


@dataclass(frozen=True)
class GradientReport:
    c_hat: float
    rows: tuple  # (x..., delta, f, grad_fd, grad_kernel, ratio, ci)
    delta_cap: bool  # True: ratio uses delta ^ 1; False: plain delta
    fd_step: float

    def finite(self) -> bool:
        return np.isfinite(self.c_hat)


def gradient_bound_report(field: HarmonicField, sample_points,
                          fd_step: float = 1e-3,
                          delta_cap: bool = True) -> GradientReport:
    """|grad f|(delta ^ 1)/f over sample points with a dual-method
    gradient: central differences of the extension versus the
    differentiated Poisson kernel.  Disagreement beyond 5x the combined
    error flags a quadrature failure."""
    rows = []
    c_hat = 0.0
    R = field.domain.radius
    for pt in sample_points:
        pt = np.atleast_1d(np.asarray(pt, dtype=float))
        q = float(np.linalg.norm(pt))
        delta = R - q
        if delta <= 0:
            raise ValueError("sample points must be interior")
        h = fd_step * min(delta, 1.0)
        if 10.0 * h > delta:
            h = 0.1 * delta  # keep the stencil inside the domain
        f0 = field.radial_value(q)
        # radial derivative by two routes
        g_kernel = field.radial_deriv(q)
        if q - h < 0:
            fp, fm = field.radial_value(q + h), field.radial_value(abs(q - h))
        else:
            fp, fm = field.radial_value(q + h), field.radial_value(q - h)
        g_fd = (fp - fm) / (2.0 * h)
        err = abs(f0) * 1e-6 / min(h, 1.0) + 1e-12
        if abs(g_fd - g_kernel) > 5.0 * (err + 1e-4 * abs(g_kernel) + 1e-10):
            raise RuntimeError(
                f"gradient methods disagree at |x|={q}: fd {g_fd} kernel {g_kernel}")
        denom = min(delta, 1.0) if delta_cap else delta
        if f0 > 10.0 * err:
            ratio = abs(g_kernel) * denom / f0
            c_hat = max(c_hat, ratio)
        else:
            ratio = math.nan  # vacuous point; the dual check above still ran
        rows.append(tuple(pt) + (delta, f0, g_fd, g_kernel, ratio, err))
    return GradientReport(c_hat=c_hat, rows=tuple(rows), delta_cap=delta_cap,
                          fd_step=fd_step)


# ---------------------------------------------------------------------------
# Harnack report


@dataclass(frozen=True)
class HarnackReport:
    x0: tuple
    r: float
    sup: float
    inf: float
    ratio: float
    ci: float
    verdict: str  # "pass" | "indeterminate"


def harnack_report(field: HarmonicField, x0, r: float,
                   n_grid: int = 41) -> HarnackReport:
    """sup/inf of f over a deterministic grid of B(x0, r/2)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if r > 1.0:
        raise ValueError("the scale-invariant statement requires r <= 1")
    if float(np.linalg.norm(x0)) + r >= field.domain.radius:
        raise ValueError("B(x0, r) must sit inside the harmonicity domain")
    d = field.model.dim
    offsets = np.linspace(-0.5 * r, 0.5 * r, n_grid)
    if d == 1:
        pts = x0[None, :] + offsets[:, None]
    else:
        dirs = np.zeros((2 * d, d))
        for i in range(d):
            dirs[2 * i, i] = 1.0
            dirs[2 * i + 1, i] = -1.0
        radii = np.linspace(0.0, 0.5 * r, (n_grid + 3) // 4)
        pts = (x0[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    qs = np.linalg.norm(pts, axis=1)
    vals = np.array(map_indexed(lambda qv: field.radial_value(float(qv)), qs))
    err = np.max(np.abs(vals)) * 1e-6
    sup, inf = float(np.max(vals)), float(np.min(vals))
    if inf <= 10.0 * err:
        return HarnackReport(tuple(x0), r, sup, inf, math.inf, math.inf, "indeterminate")
    ratio = sup / inf
    ci = ratio * (err / sup + err / inf)
    return HarnackReport(tuple(x0), r, sup, inf, ratio, ci, "pass")


def gronwall_chain(field: HarmonicField, x_from, x_to) -> int:
    """Number of half-the-boundary-distance steps joining two points;
    integrating the gradient bound along such a chain multiplies the
    value by at most exp(C ln 2) per step."""
    x = np.atleast_1d(np.asarray(x_from, dtype=float)).copy()
    target = np.atleast_1d(np.asarray(x_to, dtype=float))
    R = field.domain.radius
    k = 0
    while True:
        gap = float(np.linalg.norm(target - x))
        delta = R - float(np.linalg.norm(x))
        if gap <= 1e-12:
            return k
        step = 0.5 * min(delta, 1.0)
        if gap <= step:
            return k + 1
        x += (target - x) / gap * step
        k += 1
        if k > 10000:
            raise RuntimeError("chain did not converge")


# ---------------------------------------------------------------------------
# Green gradient corollary


def green_gradient_bound(model: LevyModel, domain: DomainSpec, pairs,
                         config: SimConfig) -> VerificationReport:
    """sup over pairs of |grad_x G_D| (delta_x ^ |x-y| ^ 1) / G_D."""
    rows = []
    sup = 0.0
    sup_ci = math.inf
    for (x, y) in pairs:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        gg = grad_green(model, domain, x, y, config)
        gv = green_function(model, domain, x, y, config)
        gnorm = float(np.linalg.norm(gg.value))
        gerr = float(np.linalg.norm(gg.ci_halfwidth))
        delta = float(domain.boundary_distance(x[None, :])[0])
        scale = min(delta, float(np.linalg.norm(x - y)), 1.0)
        if gv.value <= gv.ci_halfwidth:
            rows.append(tuple(x) + tuple(y) + (gnorm, gv.value, math.nan, math.nan))
            continue
        ratio = gnorm * scale / gv.value
        ci = ratio * (gerr / max(gnorm, 1e-300) + gv.ci_halfwidth / gv.value)
        rows.append(tuple(x) + tuple(y) + (gnorm, gv.value, ratio, ci))
        if ratio > sup:
            sup, sup_ci = ratio, ci
    ok = np.isfinite(sup) and sup > 0
    return VerificationReport(name="green-gradient-bound", constant=sup,
                              ci=sup_ci if np.isfinite(sup_ci) else 0.0,
                              verdict="pass" if ok else "indeterminate",
                              rows=tuple(rows),
                              detail="|grad G_D| (delta ^ |x-y| ^ 1)/G_D over pairs")


# ---------------------------------------------------------------------------
# annulus splitting integrals


def levy_comparability_bracket(model: LevyModel, r: float, kappa: float,
                               n: int = 5) -> tuple[float, float, float]:
    """(min, max, allowed) of nu(w - y)/nu(w) over the grid
    r < |w| < 2r, |y| < kappa r; the allowed constant
    ((2/(1-kappa)) v 3)^{d+alpha} comes from bracketing |w-y|/|w|."""
    ws = np.linspace(1.05 * r, 1.95 * r, n)
    ys = np.linspace(-0.95 * kappa * r, 0.95 * kappa * r, n)
    ratios = []
    for w in ws:
        for y in ys:
            ratios.append(float(model.g(np.array([abs(w - y)]))[0]
                                / model.g(np.array([w]))[0]))
    c2 = max(2.0 / (1.0 - kappa), 3.0) ** (model.dim + model.alpha)
    return float(np.min(ratios)), float(np.max(ratios)), c2


def annulus_split_check(model: LevyModel, r: float, kappa: float,
                        field: HarmonicField, config: SimConfig,
                        n_y: int = 12, n_w: int = 24) -> VerificationReport:
    """The two splitting integrals of the gradient-bound proof, each
    normalised by f(0)/r, plus the pointwise comparability bracket.

    inner:  int_{B_{kr}} |grad_x G_{B_r}(0,y)| int_{B_{2r} \\ B_r} f nu(w-y) dw dy
    outer:  the same with the integration over the complement of B_{2r}.
    """
    if model.dim != 1:
        raise ValueError("the splitting check is implemented for d = 1")
    if r > 0.5:
        raise ValueError("the splitting lemmas require r <= 1/2")
    f0 = field.radial_value(0.0)
    norm = f0 / r if f0 > 0 else 1.0  # zero field: report the raw integrals

    # |grad_x G_{B_r}(0, y)| at Gauss nodes of (-kr, kr)
    dom = DomainSpec.ball([0.0], r)
    gx, gw = np.polynomial.legendre.leggauss(n_y)
    ynod = kappa * r * gx
    ywts = kappa * r * gw
    grad_vals = np.array(map_indexed(
        lambda yv: abs(float(grad_green(model, dom, [0.0], [float(yv)], config).value[0])),
        ynod))

    # w-nodes of the two exterior regions (one-dimensional, both signs)
    def masses(region_edges: np.ndarray) -> np.ndarray:
        """int f(w) nu(w - y) dw over the region, for each y node."""
        gx2, gw2 = np.polynomial.legendre.leggauss(8)
        aa, bb = region_edges[:-1], region_edges[1:]
        mid, half = 0.5 * (aa + bb), 0.5 * (bb - aa)
        wnod = (mid[:, None] + half[:, None] * gx2[None, :]).ravel()
        wwts = (half[:, None] * gw2[None, :]).ravel()
        fvals = field.global_radial(np.abs(wnod))
        out = []
        for yv in ynod:
            nu = model.g(np.abs(wnod - yv))
            out.append(float(np.sum(wwts * fvals * nu)))
        return np.array(out)

    inner_edges = np.concatenate([np.linspace(-2 * r, -r, n_w // 2 + 1),
                                  np.linspace(r, 2 * r, n_w // 2 + 1)])
    inner_edges = np.unique(inner_edges)
    # split into the two disjoint intervals to avoid integrating across B_r
    m_in = (masses(np.linspace(r, 2 * r, n_w + 1))
            + masses(np.linspace(-2 * r, -r, n_w + 1)))

    far = max(4.0, 8.0 * r)
    bps = [b for b in getattr(field.data, "breakpoints", ())]
    right = np.unique(np.concatenate([np.geomspace(2 * r, far, n_w + 1),
                                      np.geomspace(far, 1e4, 40),
                                      [b for b in bps if 2 * r < b < 1e4]]))
    left = -right[::-1]
    m_out = masses(right) + masses(left)

    inner_val = float(np.sum(ywts * grad_vals * m_in)) / norm
    outer_val = float(np.sum(ywts * grad_vals * m_out)) / norm
    lo, hi, allowed = levy_comparability_bracket(model, r, kappa)
    comp_ok = (1.0 / allowed) <= lo and hi <= allowed
    verdict = "pass" if (np.isfinite(inner_val) and np.isfinite(outer_val)
                         and comp_ok) else "fail"
    rows = ((r, kappa, inner_val, outer_val, lo, hi, allowed),)
    return VerificationReport(name="annulus-split", constant=max(inner_val, outer_val),
                              ci=0.0, verdict=verdict, rows=rows,
                              detail="splitting integrals normalised by f(0)/r; "
                                     "comparability bracket (min, max, allowed)")
