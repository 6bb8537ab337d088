"""Panel quadrature engine for radial and oscillatory integrals.

All the kernels in this package reduce to one-dimensional radial integrals
of the form ``int F(rho) * Lambda_d(rho * R) * rho^{d-1} drho`` where
``Lambda_d`` is the spherical average of ``cos(u . e)`` over the unit
sphere in dimension d (cos, J0, or sin(u)/u).  Three numerical issues
recur and are solved here once:

* edge singularities like ``u^{-a}`` near 0 (handled by series heads or
  algebraic substitutions),
* catastrophic cancellation in ``1 - Lambda_d(u)`` for tiny arguments
  (handled by stable evaluations / Taylor series),
* slowly decaying oscillatory tails (handled by zero-aligned panels and
  Wynn epsilon acceleration of the partial sums).
"""

from __future__ import annotations

import numpy as np
from scipy import special

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def panel_integrals(f, edges, n: int = 32) -> np.ndarray:
    """Gauss-Legendre integral of ``f`` over each consecutive panel.

    ``f`` must accept a flat numpy array.  Returns one value per panel.
    """
    edges = np.asarray(edges, dtype=float)
    gx, gw = _gl_nodes(n)
    a, b = edges[:-1], edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * gx[None, :]
    vals = f(x.ravel()).reshape(x.shape)
    return np.sum(vals * (half[:, None] * gw[None, :]), axis=1)


def panel_sum(f, edges, n: int = 32) -> float:
    return float(np.sum(panel_integrals(f, edges, n)))


def log_edges(a: float, b: float, per_decade: int = 8) -> np.ndarray:
    """Log-spaced panel edges on [a, b], at least 2 edges."""
    if not (0 < a < b):
        raise ValueError(f"need 0 < a < b, got [{a}, {b}]")
    k = max(2, int(np.ceil(np.log10(b / a) * per_decade)) + 1)
    return np.geomspace(a, b, k)


def wynn_epsilon(partial_sums) -> float:
    """Accelerated limit of a sequence of partial sums (Wynn's epsilon).

    Intended for alternating series of oscillatory panel integrals.
    Falls back to the last partial sum if the table degenerates.
    """
    s = [float(v) for v in partial_sums]
    n = len(s)
    if n < 3:
        return s[-1]
    e_prev = [0.0] * (n + 1)
    e_cur = s[:]
    best = s[-1]
    for k in range(1, n):
        m = n - k
        e_next = []
        for i in range(m):
            d = e_cur[i + 1] - e_cur[i]
            if d == 0.0 or not np.isfinite(d):
                e_next = []
                break
            e_next.append(e_prev[i + 1] + 1.0 / d)
        if not e_next:
            break
        e_prev, e_cur = e_cur, e_next
        if k % 2 == 0:
            best = e_cur[-1]
    return best


# ---------------------------------------------------------------------------
# spherical cosine averages Lambda_d and their derivatives


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1}; 2 for d=1 (two points)."""
    return float(2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0))


def ang_kernel(u, d: int):
    """Lambda_d(u): mean of cos(u * theta_1) over the unit sphere."""
    u = np.asarray(u, dtype=float)
    if d == 1:
        return np.cos(u)
    if d == 2:
        return special.j0(u)
    if d == 3:
        out = np.ones_like(u)
        nz = u != 0
        out[nz] = np.sin(u[nz]) / u[nz]
        return out
    raise ValueError(f"dimension {d} not supported (d <= 3)")


def ang_kernel_deriv(u, d: int):
    """d/du Lambda_d(u)."""
    u = np.asarray(u, dtype=float)
    if d == 1:
        return -np.sin(u)
    if d == 2:
        return -special.j1(u)
    if d == 3:
        # -j_1(u), the spherical Bessel function
        out = np.zeros_like(u)
        nz = np.abs(u) > 1e-6
        un = u[nz]
        out[nz] = (un * np.cos(un) - np.sin(un)) / un**2
        us = u[~nz]
        out[~nz] = -us / 3.0 + us**3 / 30.0
        return out
    raise ValueError(f"dimension {d} not supported (d <= 3)")


# Taylor coefficients of 1 - Lambda_d(u) = sum_k c_k u^{2k}, k >= 1
def _one_minus_ang_coeffs(d: int, kmax: int) -> np.ndarray:
    k = np.arange(1, kmax + 1, dtype=float)
    if d == 1:
        return (-1.0) ** (k + 1) / special.factorial(2 * k)
    if d == 2:
        return (-1.0) ** (k + 1) / (4.0**k * special.factorial(k) ** 2)
    if d == 3:
        return (-1.0) ** (k + 1) / special.factorial(2 * k + 1)
    raise ValueError(f"dimension {d} not supported (d <= 3)")


def one_minus_ang(u, d: int):
    """1 - Lambda_d(u) without cancellation for small u."""
    u = np.asarray(u, dtype=float)
    if d == 1:
        return 2.0 * np.sin(0.5 * u) ** 2
    out = np.empty_like(u)
    small = np.abs(u) < 1e-2
    out[~small] = 1.0 - ang_kernel(u[~small], d)
    us2 = u[small] ** 2
    c = _one_minus_ang_coeffs(d, 4)
    out[small] = us2 * (c[0] + us2 * (c[1] + us2 * (c[2] + us2 * c[3])))
    return out


def one_minus_ang_head_integral(u0: float, a: float, d: int, kmax: int = 10) -> float:
    """int_0^{u0} (1 - Lambda_d(u)) u^{-1-a} du by termwise integration.

    Requires a < 2 so the integral converges; accurate for u0 <= 1.
    """
    k = np.arange(1, kmax + 1, dtype=float)
    c = _one_minus_ang_coeffs(d, kmax)
    return float(np.sum(c * u0 ** (2 * k - a) / (2 * k - a)))


def ang_zero_edges(scale: float, start: float, count: int, d: int) -> np.ndarray:
    """Panel edges aligned with zeros of Lambda_d(scale * u), u >= start.

    For d=1 the zeros of cos are (k+1/2)pi; for d=3 those of sin are k*pi;
    for d=2 the J0 zeros (asymptotically (k-1/4)pi).  Zero-aligned panels
    make consecutive panel integrals alternate in sign, which is what the
    epsilon acceleration needs.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if d == 1:
        zeros = (np.arange(1, count + 1) - 0.5) * np.pi
    elif d == 3:
        zeros = np.arange(1, count + 1) * np.pi
    else:
        n_exact = min(count, 64)
        zeros = special.jn_zeros(0, n_exact)
        if count > n_exact:
            extra = (np.arange(n_exact + 1, count + 1) - 0.25) * np.pi
            zeros = np.concatenate([zeros, extra])
    u = zeros / scale
    u = u[u > start]
    return np.concatenate([[start], u])


def oscillatory_tail(f_envelope, scale: float, start: float, d: int,
                     n_panels: int = 48, gl: int = 32) -> float:
    """int_start^inf f_envelope(u) * Lambda_d(scale*u) du, envelope smooth,
    nonoscillatory and decaying.  Zero-aligned panels + epsilon acceleration.
    """
    edges = ang_zero_edges(scale, start, n_panels + 2, d)
    if len(edges) < 4:
        edges = np.linspace(start, start + n_panels * np.pi / scale, n_panels)

    def f(u):
        return f_envelope(u) * ang_kernel(scale * u, d)

    ints = panel_integrals(f, edges, gl)
    return wynn_epsilon(np.cumsum(ints))
