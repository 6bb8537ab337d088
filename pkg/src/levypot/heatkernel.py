"""Transition density p_t and its gradient by Fourier inversion.

p_t(x) = (2 pi)^{-d} int e^{-t psi(xi)} cos(x . xi) dxi reduces, for a
radial symbol, to

    p_t(x)      = (2 pi)^{-d} S_d int_0^inf e^{-t psi(rho)} Lambda_d(rho |x|) rho^{d-1} drho
    dp_t/d|x|   = (2 pi)^{-d} S_d int_0^inf e^{-t psi(rho)} Lambda_d'(rho |x|) rho^d drho

with Lambda_1 = cos, Lambda_2 = J0, Lambda_3 = sin(u)/u.  The frequency
cutoff comes from the audited lower-scaling bound on psi, which turns
the truncated tail into an incomplete-gamma expression; the oscillation
is handled by panels split at the kernel zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special

from .model import LevyModel, LogLogInterp, QuadratureError, audit_scaling, psi_radial, scale_functions
from .quadrature import (
    ang_kernel,
    ang_kernel_deriv,
    ang_zero_edges,
    log_edges,
    panel_integrals,
    sphere_surface,
)


@dataclass(frozen=True)
class QuadratureSpec:
    """Frequency truncation and tolerance budget for kernel quadratures."""

    cutoff: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    panels: int = 20000


@dataclass(frozen=True)
class HeatValue:
    value: float       # clamped at 0
    raw: float         # before clamping
    est_err: float
    undershoot: float  # max(0, -raw)


@lru_cache(maxsize=32)
def _scaling_pair(model: LevyModel) -> tuple[float, float, float]:
    """(c, alpha, theta) with psi(rho) >= c rho^alpha for rho > theta."""
    if model.has_stable_symbol:
        return 1.0, model.alpha, 0.0
    audit = audit_scaling(model)
    if audit.alpha_hat <= 0 or audit.c_hat <= 0:
        raise QuadratureError("scaling audit found no usable lower bound on psi")
    return audit.c_hat, audit.alpha_hat, audit.theta_hat


def frequency_cutoff(model: LevyModel, t: float, abs_tol: float) -> float:
    """Smallest Xi (up to a factor 2) with
    (2 pi)^{-d} S_d int_Xi^inf e^{-t psi} rho^{d-1} drho < abs_tol,
    using psi(rho) >= c rho^alpha beyond the scaling threshold."""
    c, alpha, theta = _scaling_pair(model)
    d = model.dim
    pref = (2 * math.pi) ** (-d) * sphere_surface(d)
    a = d / alpha
    tc = t * c

    def tail(xi):
        # int_Xi^inf e^{-tc rho^alpha} rho^{d-1} drho
        return pref * tc ** (-a) / alpha * special.gamma(a) * special.gammaincc(a, tc * xi**alpha)

    xi = max(theta, (1.0 / tc) ** (1.0 / alpha))
    for _ in range(200):
        if tail(xi) < abs_tol:
            return xi
        xi *= 2.0
    raise QuadratureError("could not satisfy the truncation budget", achieved=tail(xi))


def default_spec(model: LevyModel, t: float,
                 rel_tol: Optional[float] = None,
                 abs_tol: Optional[float] = None) -> QuadratureSpec:
    rel = model.quad_rel_tol if rel_tol is None else rel_tol
    ab = model.quad_abs_tol if abs_tol is None else abs_tol
    return QuadratureSpec(cutoff=frequency_cutoff(model, t, ab), rel_tol=rel, abs_tol=ab)


def _freq_edges(model: LevyModel, t: float, R: float, spec: QuadratureSpec) -> np.ndarray:
    """Panel edges on (0, cutoff]: log panels resolving the e^{-t psi}
    decay, merged with zeros of the oscillating kernel Lambda_d(rho R)."""
    xi = spec.cutoff
    scale = (1.0 / t) ** (1.0 / _scaling_pair(model)[1])  # decay scale of e^{-t psi}
    lo = min(1e-8 * scale, 1e-8 / max(R, 1e-30), xi / 1e4)
    edges = log_edges(lo, xi, 12)
    if R > 0:
        n_zeros = int(xi * R / math.pi) + 2
        if n_zeros > spec.panels:
            raise QuadratureError(
                f"oscillation requires {n_zeros} panels, budget is {spec.panels}")
        if n_zeros > 1:
            zeros = ang_zero_edges(R, float(lo), n_zeros, model.dim)[1:]
            edges = np.unique(np.concatenate([edges, zeros[zeros < xi], [xi]]))
    return edges


def _radial_fourier(model: LevyModel, t: float, R: float, spec: QuadratureSpec,
                    deriv: bool) -> tuple[float, float]:
    """(integral, est_err) of the radial inversion integrand; the head
    below the first edge is the flat-kernel approximation."""
    d = model.dim
    psi = psi_radial(model)
    edges = _freq_edges(model, t, R, spec)

    if deriv:
        def f(rho):
            return np.exp(-t * psi(rho)) * ang_kernel_deriv(rho * R, d) * rho**d
    else:
        def f(rho):
            return np.exp(-t * psi(rho)) * ang_kernel(rho * R, d) * rho ** (d - 1)

    coarse = float(np.sum(panel_integrals(f, edges, 16)))
    fine = float(np.sum(panel_integrals(f, edges, 32)))
    # head below the first edge: integrand ~ rho^{d-1} (or rho^d) there
    head = edges[0] ** d / d if not deriv else 0.0
    err = abs(fine - coarse) + spec.abs_tol
    pref = (2 * math.pi) ** (-d) * sphere_surface(d)
    value = pref * (fine + head)
    err = pref * err + spec.abs_tol
    if err > max(spec.abs_tol * 10, spec.rel_tol * abs(value) + spec.abs_tol * 10):
        raise QuadratureError(
            f"radial inversion did not converge (est err {err:.2e})", achieved=err)
    return value, err


def _check_time(t: float):
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")


def heat_kernel_eval(model: LevyModel, t: float, x, spec: Optional[QuadratureSpec] = None) -> HeatValue:
    _check_time(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec is None:
        spec = default_spec(model, t)
    raw, err = _radial_fourier(model, t, float(np.linalg.norm(x)), spec, deriv=False)
    return HeatValue(value=max(raw, 0.0), raw=raw, est_err=err, undershoot=max(0.0, -raw))


def heat_kernel(model: LevyModel, t: float, x, spec: Optional[QuadratureSpec] = None) -> float:
    """Transition density p_t(x), clamped at zero."""
    return heat_kernel_eval(model, t, x, spec).value


def heat_kernel_grad(model: LevyModel, t: float, x,
                     spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """Spatial gradient of p_t at x (radial direction times the radial
    derivative of the inversion integral)."""
    _check_time(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    R = float(np.linalg.norm(x))
    if R == 0.0:
        return np.zeros(model.dim)
    if spec is None:
        spec = default_spec(model, t)
    dpdR, _ = _radial_fourier(model, t, R, spec, deriv=True)
    return dpdR * x / R


# ---------------------------------------------------------------------------
# fast evaluators (used heavily by the Monte Carlo estimators)


class StableHeatTable:
    """Radial table of p_1 (and its radial derivative) for a stable model;
    other times follow from the exact self-similarity
    p_t(x) = t^{-d/alpha} p_1(t^{-1/alpha} x)."""

    def __init__(self, model: LevyModel, n_per_decade: int = 160):
        if not model.has_stable_symbol:
            raise ValueError("StableHeatTable requires the stable kind")
        self.model = model
        self.alpha = model.alpha
        self.d = model.dim
        spec = default_spec(model, 1.0)
        grid = np.geomspace(1e-4, 3e3, int(n_per_decade * 7.5) + 1)
        vals = np.array([_radial_fourier(model, 1.0, float(r), spec, False)[0]
                         for r in grid])
        dvals = np.array([_radial_fourier(model, 1.0, float(r), spec, True)[0]
                          for r in grid])
        self.p0 = _radial_fourier(model, 1.0, 0.0, spec, False)[0]
        # drop tail nodes near the quadrature noise floor and extend them
        # with the analytic tail exponents (p_1 ~ nu, |dp_1| ~ nu/r)
        floor = 1e3 * spec.abs_tol
        keep_p = vals > floor
        keep_dp = -dvals > floor
        self._p = LogLogInterp(grid[keep_p], vals[keep_p],
                               hi_slope=-(self.d + self.alpha))
        self._dp = LogLogInterp(grid[keep_dp], -dvals[keep_dp],
                                hi_slope=-(self.d + 1.0 + self.alpha))
        self._rmin = grid[0]

    def p1(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < self._rmin, self.p0, self._p(np.maximum(r, self._rmin)))
        return out

    def p(self, t, r):
        """p_t at radius r, vectorised over r (t scalar > 0)."""
        s = t ** (-1.0 / self.alpha)
        return t ** (-self.d / self.alpha) * self.p1(s * np.asarray(r, dtype=float))

    def dp_dr(self, t, r):
        """Radial derivative of p_t at radius r (negative for r > 0)."""
        s = t ** (-1.0 / self.alpha)
        r = np.asarray(r, dtype=float)
        mag = np.where(r * s < self._rmin,
                       -self._dp(np.full_like(r, self._rmin)) * (r * s) / self._rmin,
                       -self._dp(np.maximum(r * s, self._rmin)))
        return t ** (-(self.d + 1.0) / self.alpha) * mag

    def p_pairs(self, t, r):
        """p_{t_i}(r_i) for paired arrays (vectorised self-similar scaling)."""
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        return t ** (-self.d / self.alpha) * self.p1(t ** (-1.0 / self.alpha) * r)


@lru_cache(maxsize=16)
def stable_heat_table(model: LevyModel) -> StableHeatTable:
    return StableHeatTable(model)


def heat_evaluator(model: LevyModel):
    """Vectorised (t, radii) -> p_t evaluator; tabulated for stable models,
    direct quadrature otherwise (slow but exact path)."""
    if model.has_stable_symbol:
        table = stable_heat_table(model)
        return table.p

    def direct(t, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        spec = default_spec(model, t)
        return np.array([_radial_fourier(model, t, float(ri), spec, False)[0]
                         for ri in r])

    return direct


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov residual


def _conv_edges_1d(x: float, y: float, w_s: float, w_t: float, L: float) -> np.ndarray:
    """Panels on [-L, L] clustered around the two density peaks."""
    pieces = [np.array([-L, L])]
    for c, w in ((x, w_s), (y, w_t)):
        local = c + w * np.concatenate([-np.geomspace(1e-3, L / w, 40)[::-1],
                                        [0.0], np.geomspace(1e-3, L / w, 40)])
        pieces.append(local)
    edges = np.unique(np.concatenate(pieces))
    return edges[(edges >= -L) & (edges <= L)]


def ck_residual(model: LevyModel, s: float, t: float, grid,
                spec: Optional[QuadratureSpec] = None) -> float:
    """max over (x, y) pairs of |int p_s(x,z) p_t(z,y) dz - p_{s+t}(x,y)|.

    d = 1 only (the acceptance grid is one-dimensional); the convolution
    is a panel quadrature against the fast kernel evaluator.
    """
    if model.dim != 1:
        raise ValueError("ck_residual is implemented for d = 1")
    if s <= 0 or t <= 0:
        raise ValueError("times must be positive")
    ev = heat_evaluator(model)
    alpha = model.alpha
    w_s, w_t = s ** (1 / alpha), t ** (1 / alpha)
    worst = 0.0
    for (x, y) in grid:
        x, y = float(np.atleast_1d(x)[0]), float(np.atleast_1d(y)[0])
        # choose L so the discarded tail is ~1e-8
        L = max(abs(x), abs(y)) + (2e8 * (s + t)) ** (1.0 / (1 + alpha)) + 10.0
        edges = _conv_edges_1d(x, y, w_s, w_t, L)

        def f(z):
            return ev(s, np.abs(z - x)) * ev(t, np.abs(z - y))

        conv = float(np.sum(panel_integrals(f, edges, 32)))
        direct = float(ev(s + t, np.array([abs(x - y)]))[0])
        worst = max(worst, abs(conv - direct))
    return worst


# ---------------------------------------------------------------------------
# time integral of |grad p_t|


def grad_time_integral(model: LevyModel, x, spec: Optional[QuadratureSpec] = None
                       ) -> tuple[float, float]:
    """(int_0^{T} |grad p_t(x)| dt, analytic bound for the remaining tail)
    with T = V^2(8 (|x| v 1)).

    The tail bound integrates |grad p_t| <= |x| (2pi)^{-d} int e^{-t psi}
    |xi|^2 dxi over t > T in closed form in t.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    R = float(np.linalg.norm(x))
    if R == 0.0:
        raise ValueError("grad_time_integral requires x != 0")
    d = model.dim
    sf = scale_functions(model)
    T = float(sf.V2(np.array([8.0 * max(R, 1.0)]))[0])

    if model.has_stable_symbol:
        table = stable_heat_table(model)

        def grad_mag(ts):
            return np.array([table.dp_dr(float(ti), np.array([R]))[0] for ti in ts])
    else:
        def grad_mag(ts):
            out = []
            for ti in ts:
                sp = default_spec(model, float(ti))
                out.append(abs(_radial_fourier(model, float(ti), R, sp, True)[0]))
            return np.array(out)

    t_lo = T * 1e-10
    edges = log_edges(t_lo, T, 12)
    value = float(np.sum(panel_integrals(lambda ts: np.abs(grad_mag(ts)), edges, 8)))
    # |grad p_t| vanishes linearly in t at 0; trapezoid head on (0, t_lo)
    value += 0.5 * t_lo * abs(grad_mag(np.array([t_lo]))[0])

    # tail: |x| (2pi)^{-d} S_d int e^{-T psi(rho)} rho^{d+1} / psi(rho) drho
    psi = psi_radial(model)
    tail_spec = default_spec(model, T) if spec is None else spec
    e2 = log_edges(min(1e-8, tail_spec.cutoff * 1e-10), tail_spec.cutoff, 12)

    def f_tail(rho):
        return np.exp(-T * psi(rho)) * rho ** (d + 1) / psi(rho)

    pref = R * (2 * math.pi) ** (-d) * sphere_surface(d)
    tail = pref * float(np.sum(panel_integrals(f_tail, e2, 16)))
    return value, tail
