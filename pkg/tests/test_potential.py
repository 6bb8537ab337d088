import numpy as np
import pytest

import levypot.potential as P
from levypot import model as M


@pytest.fixture(scope="module")
def stable1():
    return M.make_model("IsotropicStable", 1, 1.5)


@pytest.fixture(scope="module")
def stable3():
    return M.make_model("IsotropicStable", 3, 1.5)


def test_classification():
    assert P.classify_transience(M.make_model("IsotropicStable", 1, 1.5)) == P.COMPENSATED
    assert P.classify_transience(M.make_model("IsotropicStable", 2, 1.5)) == P.TRANSIENT
    assert P.classify_transience(M.make_model("IsotropicStable", 3, 1.5)) == P.TRANSIENT
    assert P.classify_transience(M.make_model("IsotropicStable", 1, 0.7)) == P.TRANSIENT


def test_domain_error(stable3):
    with pytest.raises(ValueError):
        P.potential(stable3, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        P.potential_grad(stable3, [0.0, 0.0, 0.0])


def test_riesz_homogeneity(stable3):
    # ratio G(2x)/G(x) = 2^{a-d} forced by scaling
    g1 = P.potential(stable3, [1.0, 0, 0])
    g2 = P.potential(stable3, [2.0, 0, 0])
    assert g2 / g1 == pytest.approx(2.0 ** (1.5 - 3.0), rel=1e-10)
    grid = np.geomspace(0.01, 20.0, 25)
    pk = P.potential_kernel(stable3)
    vals = pk.G(grid)
    assert np.allclose(vals, vals[0] * (grid / grid[0]) ** (1.5 - 3.0), rtol=1e-6)


def test_transient_closed_form_vs_time_quadrature(stable3):
    # calibration happened at |x| = 1; check an independent radius
    num = P.potential_numeric(stable3, 2.0, P.TRANSIENT)
    assert P.potential(stable3, [2.0, 0, 0]) == pytest.approx(num, rel=1e-5)
    num_half = P.potential_numeric(stable3, 0.5, P.TRANSIENT)
    assert P.potential(stable3, [0.5, 0, 0]) == pytest.approx(num_half, rel=1e-5)


def test_compensated_anchor_and_consistency(stable1):
    assert P.potential(stable1, [1.0]) == 0.0
    for r in (0.25, 3.0):
        num = P.potential_numeric(stable1, r, P.COMPENSATED)
        assert P.potential(stable1, [r]) == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_compensated_difference_homogeneity(stable1):
    # G(x) - G(y) depends only on |y|^{a-1} - |x|^{a-1}
    pk = P.potential_kernel(stable1)
    pairs = [(0.2, 0.9), (0.5, 2.0), (1.5, 4.0)]
    consts = []
    for (a, b) in pairs:
        diff = float(pk.G(np.array([a]))[0] - pk.G(np.array([b]))[0])
        consts.append(diff / (b**0.5 - a**0.5))
    assert np.allclose(consts, consts[0], rtol=1e-5)


def test_gradient_symmetry_and_direction(stable3):
    g = P.potential_grad(stable3, [0.5, 0.2, -0.1])
    g2 = P.potential_grad(stable3, [-0.5, -0.2, 0.1])
    assert np.allclose(g, -g2, rtol=1e-12)


def test_gradient_closed_form_d3(stable3):
    pk = P.potential_kernel(stable3)
    x = np.array([0.5, 0.0, 0.0])
    expect = (1.5 - 3.0) * pk.constant * 0.5 ** (1.5 - 3.0 - 1.0)
    assert P.potential_grad(stable3, x)[0] == pytest.approx(expect, rel=1e-10)


def test_gradient_finite_difference_d1(stable1):
    h = 1e-5
    fd = (P.potential(stable1, [0.5 + h]) - P.potential(stable1, [0.5 - h])) / (2 * h)
    assert P.potential_grad(stable1, [0.5])[0] == pytest.approx(fd, rel=1e-4)


@pytest.mark.parametrize("dim", [1, 3])
def test_grad_bound_ratio_finite_and_stable(dim):
    model = M.make_model("IsotropicStable", dim, 1.5)
    pk = P.potential_kernel(model)
    sf = M.scale_functions(model)

    def sup_ratio(n):
        grid = np.geomspace(1e-3, 10.0, n)
        capped = np.minimum(grid, 1.0)
        ratios = np.abs(pk.Gp(grid)) * capped ** (dim + 1) / sf.V2(capped)
        return float(np.max(ratios))

    c1, c2 = sup_ratio(25), sup_ratio(49)
    assert np.isfinite(c2)
    assert abs(c2 - c1) / c1 < 0.25
