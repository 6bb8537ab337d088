import numpy as np
import pytest
from scipy import integrate, special

from levypot import heatkernel as HK
from levypot import model as M
from levypot.quadrature import panel_integrals, sphere_surface


@pytest.fixture(scope="module")
def stable1():
    return M.make_model("IsotropicStable", 1, 1.5)


@pytest.fixture(scope="module")
def stable3():
    return M.make_model("IsotropicStable", 3, 1.5)


def test_center_value_d1(stable1):
    # p_1(0) = (1/pi) int_0^inf e^{-rho^a} drho = Gamma(1 + 1/a)/pi
    expect = special.gamma(1.0 + 1.0 / 1.5) / np.pi
    assert HK.heat_kernel(stable1, 1.0, [0.0]) == pytest.approx(expect, rel=1e-9)


def test_center_value_d3(stable3):
    ref = (1.0 / (2 * np.pi**2)) * integrate.quad(
        lambda r: r**2 * np.exp(-(r**1.5)), 0, np.inf)[0]
    assert HK.heat_kernel(stable3, 1.0, [0, 0, 0]) == pytest.approx(ref, rel=1e-9)


def test_time_validation(stable1):
    with pytest.raises(ValueError):
        HK.heat_kernel(stable1, 0.0, [0.0])
    with pytest.raises(ValueError):
        HK.heat_kernel(stable1, -1.0, [0.0])


@pytest.mark.parametrize("r", [0.1, 0.7, 2.0, 5.0])
def test_stable_scaling_identity(stable1, r):
    # p_{2^a t}(2x) = 2^{-d} p_t(x), forced by psi(xi) = |xi|^a
    lhs = HK.heat_kernel(stable1, 2.0**1.5, [2.0 * r])
    rhs = 0.5 * HK.heat_kernel(stable1, 1.0, [r])
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_self_similarity_profile(stable1):
    for r in np.geomspace(0.05, 5.0, 20):
        t = 3.7
        lhs = HK.heat_kernel(stable1, t, [float(r)])
        rhs = t ** (-1 / 1.5) * HK.heat_kernel(stable1, 1.0, [float(r) * t ** (-1 / 1.5)])
        assert lhs == pytest.approx(rhs, rel=1e-7)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_normalization(stable1, t):
    ev = HK.heat_evaluator(stable1)
    w = t ** (1 / 1.5)
    edges = np.concatenate([[0.0], w * np.geomspace(1e-4, 1e6, 260)])
    total = 2.0 * float(np.sum(panel_integrals(lambda r: ev(t, r), edges, 16)))
    assert abs(total - 1.0) < 1e-6


def test_normalization_d3(stable3):
    ev = HK.heat_evaluator(stable3)
    edges = np.concatenate([[0.0], np.geomspace(1e-4, 1e6, 260)])
    total = sphere_surface(3) * float(np.sum(panel_integrals(
        lambda r: ev(1.0, r) * r**2, edges, 16)))
    assert abs(total - 1.0) < 1e-6


def test_positivity_undershoot(stable1):
    for r in (0.5, 3.0, 20.0, 100.0):
        hv = HK.heat_kernel_eval(stable1, 0.3, [r])
        assert hv.value >= 0.0
        assert hv.undershoot < 1e-9


def test_monotone_radial_decay(stable1):
    ev = HK.heat_evaluator(stable1)
    rr = np.linspace(0.0, 10.0, 60)
    vals = ev(1.0, rr)
    assert np.all(np.diff(vals) < 1e-12)


def test_gradient_against_finite_differences(stable1, stable3):
    for model, x in ((stable1, [1.0]), (stable1, [0.3]), (stable3, [0.6, 0.2, -0.1])):
        g = HK.heat_kernel_grad(model, 1.0, x)
        h = 1e-5
        fd = np.empty(model.dim)
        for i in range(model.dim):
            xp = np.array(x, dtype=float)
            xm = np.array(x, dtype=float)
            xp[i] += h
            xm[i] -= h
            fd[i] = (HK.heat_kernel(model, 1.0, xp) - HK.heat_kernel(model, 1.0, xm)) / (2 * h)
        mask = np.abs(g) > 1e-8
        assert np.allclose(g[mask], fd[mask], rtol=1e-5)


def test_gradient_zero_at_origin(stable3):
    assert np.all(HK.heat_kernel_grad(stable3, 1.0, [0.0, 0.0, 0.0]) == 0.0)


def test_gradient_scaling(stable1):
    lhs = HK.heat_kernel_grad(stable1, 2.0**1.5, [2.0 * 0.8])[0]
    rhs = 2.0 ** (-2.0) * HK.heat_kernel_grad(stable1, 1.0, [0.8])[0]
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_chapman_kolmogorov(stable1):
    grid = [([a], [b]) for a in (-0.5, 0.0, 1.0) for b in (-1.0, 0.3, 2.0)]
    res = HK.ck_residual(stable1, 0.5, 0.5, grid)
    assert res < 1e-5


def test_chapman_kolmogorov_center(stable1):
    res = HK.ck_residual(stable1, 0.25, 0.75, [([0.0], [0.0])])
    assert res < 1e-6


def test_grad_time_integral(stable1):
    sf = M.scale_functions(stable1)
    with pytest.raises(ValueError):
        HK.grad_time_integral(stable1, [0.0])
    vals = {}
    for r in (0.5, 2.0, 4.0):
        val, tail = HK.grad_time_integral(stable1, [r])
        assert np.isfinite(val) and np.isfinite(tail) and val > 0
        shape = r * float(sf.V2(np.array([min(r, 1.0)]))[0]) / min(r, 1.0) ** 3
        vals[r] = (val + tail) / shape
        assert vals[r] < 10.0
    # the |x| dependence of the bound is honoured within a factor 4
    assert max(vals[2.0], vals[4.0]) / min(vals[2.0], vals[4.0]) < 4.0


def test_frequency_cutoff_controls_tail(stable1):
    spec = HK.default_spec(stable1, 1.0)
    # the discarded tail (with the known symbol) must be below abs_tol
    def tail(rho):
        return np.exp(-(rho**1.5))
    val = integrate.quad(tail, spec.cutoff, np.inf)[0] / np.pi
    assert val < spec.abs_tol
