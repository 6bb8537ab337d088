import math

import numpy as np
import pytest

from levypot import harmonic as H
from levypot import killed as K
from levypot import model as M


@pytest.fixture(scope="module")
def stable1():
    return M.make_model("IsotropicStable", 1, 1.5)


@pytest.fixture(scope="module")
def stable3():
    return M.make_model("IsotropicStable", 3, 1.5)


UNIT1 = K.DomainSpec.ball([0.0], 1.0)
EXACT = K.SimConfig(master_seed=2001, n_paths=40000, scheme=K.EXACT_STABLE_EXIT)


class ConstantData:
    breakpoints = ()
    y_tag = "bounded"

    def radial(self, s):
        return np.ones_like(np.asarray(s, dtype=float))

    def __call__(self, points):
        return self.radial(np.linalg.norm(np.atleast_2d(points), axis=1))


@pytest.fixture(scope="module")
def indicator_field(stable1):
    return H.HarmonicField(stable1, UNIT1, H.IndicatorShell(1.0, 2.0))


def test_constants_are_harmonic(stable1, stable3):
    for model, dom in ((stable1, UNIT1), (stable3, K.DomainSpec.ball([0, 0, 0], 1.0))):
        fld = H.HarmonicField(model, dom, ConstantData())
        for q in (0.0, 0.5, 0.9, 0.99):
            assert fld.radial_value(q) == pytest.approx(1.0, abs=1e-6)


def test_field_validation(stable1):
    with pytest.raises(ValueError):
        H.HarmonicField(stable1, K.DomainSpec.ball([0.5], 1.0), ConstantData())

    class Negative(ConstantData):
        def radial(self, s):
            return -np.ones_like(np.asarray(s, dtype=float))

    with pytest.raises(ValueError):
        H.HarmonicField(stable1, UNIT1, Negative())


def test_indicator_values_and_monotonicity(indicator_field):
    v0 = indicator_field.radial_value(0.0)
    v5 = indicator_field.radial_value(0.5)
    assert 0.0 < v0 < v5 < 1.0


def test_extend_requires_interior(indicator_field):
    with pytest.raises(ValueError):
        H.harmonic_extend(indicator_field, [1.5])


def test_empirical_exit_oracle(stable1, indicator_field):
    fe = H.HarmonicField(stable1, UNIT1, H.IndicatorShell(1.0, 2.0),
                         eval_method=H.EMPIRICAL_EXIT)
    est = H.harmonic_extend(fe, [0.5], EXACT)
    ref = indicator_field.radial_value(0.5)
    assert abs(est.value - ref) <= 3.0 * est.ci_halfwidth


def test_iw_route_agrees(stable1, indicator_field):
    fiw = H.HarmonicField(stable1, UNIT1, H.IndicatorShell(1.0, 2.0),
                          eval_method=H.IW_QUADRATURE)
    est = H.harmonic_extend(fiw, [0.3],
                            K.SimConfig(master_seed=2002, n_paths=60000,
                                        scheme=K.EXACT_STABLE_EXIT))
    ref = indicator_field.radial_value(0.3)
    assert abs(est.value - ref) <= 3.0 * est.ci_halfwidth


def test_reexpansion_self_consistency(indicator_field):
    # evaluate on a strictly smaller ball with the already-extended field
    res, err = H.mvp_residual(indicator_field, [0.2], 0.3)
    assert res <= err
    res2, err2 = H.mvp_residual(indicator_field, [-0.4], 0.25)
    assert res2 <= err2


def test_mvp_residual_d3(stable3):
    fld = H.HarmonicField(stable3, K.DomainSpec.ball([0, 0, 0], 1.0),
                          H.IndicatorShell(1.0, 2.0))
    res, err = H.mvp_residual(fld, [0.2, 0.0, 0.0], 0.3)
    assert res <= err
    res2, err2 = H.mvp_residual(fld, [0.35, 0.1, 0.0], 0.25)
    assert res2 <= err2


def test_mvp_negative_control(stable1, indicator_field):
    # a non-harmonic function fails the mean value identity loudly
    quad_fn = lambda s: np.minimum(np.asarray(s, dtype=float) ** 2, 16.0)
    x = np.array([0.2])
    mean = H.sphere_mean_of(quad_fn, stable1, x)
    val = H.poisson_ball_quad(stable1, 0.3, 0.0, mean, (3.8, 4.2))
    ref = float(quad_fn(np.array([0.2]))[0])
    _, err = H.mvp_residual(indicator_field, [0.2], 0.3)
    assert abs(val - ref) > 10.0 * err


def test_mvp_ball_must_fit(indicator_field):
    with pytest.raises(ValueError):
        H.mvp_residual(indicator_field, [0.8], 0.3)


def test_dynkin_constant_exactly_zero(stable1):
    fld = H.HarmonicField(stable1, UNIT1, ConstantData())
    seq = H.dynkin_residual(fld, [0.1], [0.2, 0.1, 0.05])
    assert all(abs(v) < 1e-10 for v in seq)


def test_dynkin_harmonic_near_zero(indicator_field, stable1):
    radii = [0.2, 0.1, 0.05, 0.02]
    seq = H.dynkin_residual(indicator_field, [0.2], radii)
    for v, rho in zip(seq, radii):
        allow = 3e-6 * max(1.0, indicator_field.radial_value(0.2)) \
            / H.expected_exit_time_center(stable1, rho)
        assert abs(v) <= allow


def test_dynkin_control_matches_generator(stable1, indicator_field):
    quad_fn = lambda s: np.minimum(np.asarray(s, dtype=float) ** 2, 16.0)
    seq = H.dynkin_residual(indicator_field, [0.0], [0.2, 0.1, 0.05, 0.02],
                            reference_fn=quad_fn)
    gen = H.generator_apply(stable1, quad_fn, [0.0])
    assert gen > 0
    assert abs(seq[-1] - gen) / gen < 1e-3


def test_expected_exit_time_against_monte_carlo(stable1):
    # the occupation-identity route must agree with the Euler estimator
    mc = K.exit_moment(stable1, UNIT1, [0.0],
                       K.SimConfig(master_seed=2003, n_paths=8000, dt0=0.04,
                                   scheme=K.JUMP_ADAPTED_EULER))
    quad = H.expected_exit_time_center(stable1, 1.0)
    tol = 3.0 * mc.estimate.ci_halfwidth + mc.estimate.bias_bound
    assert abs(quad - mc.estimate.value) <= tol


def test_gradient_report_constant_field(stable1):
    fld = H.HarmonicField(stable1, UNIT1, ConstantData())
    rep = H.gradient_bound_report(fld, [[0.0], [0.5], [0.9]])
    assert rep.c_hat < 1e-5
    for row in rep.rows:
        assert abs(row[3]) < 1e-6 and abs(row[4]) < 1e-6


def test_gradient_report_dual_method_and_finiteness(indicator_field):
    deltas = [0.01, 0.05, 0.2, 0.5, 0.9]
    rep = H.gradient_bound_report(indicator_field, [[1.0 - dv] for dv in deltas])
    assert rep.finite() and rep.c_hat > 0
    for row in rep.rows:
        assert abs(row[3] - row[4]) <= 5e-4 * max(abs(row[4]), 1e-3)


def test_gradient_report_scale_covariance(stable1):
    # C is invariant under r -> r/2 with data rescaled accordingly
    # (gradients scale like 1/r, boundary distances like r, f like 1)
    rep1 = H.gradient_bound_report(
        H.HarmonicField(stable1, UNIT1, H.IndicatorShell(1.0, 2.0)),
        [[1.0 - dv] for dv in (0.02, 0.1, 0.3, 0.6)])
    half = K.DomainSpec.ball([0.0], 0.5)
    rep2 = H.gradient_bound_report(
        H.HarmonicField(stable1, half, H.IndicatorShell(0.5, 1.0)),
        [[0.5 - 0.5 * dv] for dv in (0.02, 0.1, 0.3, 0.6)])
    assert rep2.c_hat == pytest.approx(rep1.c_hat, rel=1e-6)


def test_harnack_constant_field(stable1):
    fld = H.HarmonicField(stable1, UNIT1, ConstantData())
    hr = H.harnack_report(fld, [0.0], 0.5)
    assert hr.ratio == pytest.approx(1.0, abs=1e-9)
    assert hr.verdict == "pass"


def test_harnack_scale_invariance(indicator_field):
    ratios = [H.harnack_report(indicator_field, [0.0], r).ratio
              for r in (0.25, 0.5, 0.99)]
    assert all(r >= 1.0 for r in ratios)
    assert max(ratios) / min(ratios) < 2.0


def test_harnack_validation(indicator_field):
    with pytest.raises(ValueError):
        H.harnack_report(indicator_field, [0.8], 0.5)


def test_gronwall_chain_consistency(indicator_field):
    rep = H.gradient_bound_report(indicator_field,
                                  [[0.0], [0.15], [0.25], [0.4]])
    hr = H.harnack_report(indicator_field, [0.0], 0.5)
    k = H.gronwall_chain(indicator_field, np.array([0.25]), np.array([-0.25]))
    bound = math.exp(rep.c_hat * math.log(2.0) * k)
    assert hr.ratio <= bound


def test_green_gradient_bound_report(stable1):
    pairs = [([0.0], [0.5]), ([0.0], [0.02]), ([0.3], [-0.4]), ([0.1], [0.9])]
    rep = H.green_gradient_bound(stable1, UNIT1, pairs, EXACT)
    assert rep.verdict == "pass"
    assert np.isfinite(rep.constant) and rep.constant > 0


def test_annulus_split_check(stable1, indicator_field):
    rep = H.annulus_split_check(stable1, 0.25, 0.125, indicator_field, EXACT)
    assert rep.verdict == "pass"
    (r, kappa, inner, outer, lo, hi, allowed) = rep.rows[0]
    assert np.isfinite(inner) and np.isfinite(outer)
    assert 1.0 / allowed <= lo <= hi <= allowed
    with pytest.raises(ValueError):
        H.annulus_split_check(stable1, 0.75, 0.125, indicator_field, EXACT)


def test_annulus_split_zero_data(stable1):
    # f == 0 on the complement extends to the zero field: both integrals 0
    class ZeroData(ConstantData):
        def radial(self, s):
            return np.zeros_like(np.asarray(s, dtype=float))

    fld = H.HarmonicField(stable1, UNIT1, ZeroData())
    rep = H.annulus_split_check(stable1, 0.25, 0.125, fld, EXACT)
    (_, _, inner, outer, _, _, _) = rep.rows[0]
    assert inner == 0.0 and outer == 0.0


def test_levy_comparability_bracket(stable1):
    lo, hi, allowed = H.levy_comparability_bracket(stable1, 0.25, 0.125)
    assert 1.0 / allowed <= lo <= 1.0 <= hi <= allowed


def test_green_function_satisfies_mvp(stable1):
    # y -> G_{B_1}(x0, y) has the mean value property on balls avoiding x0
    kappa = K.ball_green_constant(stable1)
    x0 = 0.6

    def g(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty(len(y))
        for i, yv in enumerate(y):
            if abs(yv) >= 1.0 or abs(yv - x0) < 1e-14:
                out[i] = 0.0
            else:
                out[i] = kappa * K.stable_ball_green_shape(stable1, UNIT1, [x0], [yv])
        return out

    y0, rho = -0.3, 0.25

    def mean(s):
        return 0.5 * (g(y0 + s) + g(y0 - s))

    bps = sorted({abs(1.0 - y0), 1.0 + y0 if 1.0 + y0 > 0 else 2.0, abs(x0 - y0)})
    val = H.poisson_ball_quad(stable1, rho, 0.0, mean, bps)
    ref = float(g(np.array([y0]))[0])
    assert val == pytest.approx(ref, rel=2e-4)


def test_grad_green_satisfies_mvp(stable1):
    # the y-derivative of G_{B_1}(x0, .) keeps the MVP componentwise
    kappa = K.ball_green_constant(stable1)
    x0 = 0.6
    h = 1e-5

    def gprime(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty(len(y))
        for i, yv in enumerate(y):
            if abs(yv) >= 1.0 - h or abs(yv - x0) < 1e-3:
                out[i] = 0.0
            else:
                gp = kappa * K.stable_ball_green_shape(stable1, UNIT1, [x0], [yv + h])
                gm = kappa * K.stable_ball_green_shape(stable1, UNIT1, [x0], [yv - h])
                out[i] = (gp - gm) / (2 * h)
        return out

    y0, rho = -0.3, 0.2

    def mean(s):
        return 0.5 * (gprime(y0 + s) + gprime(y0 - s))

    bps = sorted({abs(1.0 - y0), 1.0 + y0 if 1.0 + y0 > 0 else 2.0, abs(x0 - y0)})
    val = H.poisson_ball_quad(stable1, rho, 0.0, mean, bps)
    ref = float(gprime(np.array([y0]))[0])
    assert val == pytest.approx(ref, rel=5e-3)


def test_extension_of_nonnegative_data_is_nonnegative(indicator_field):
    for q in np.linspace(0.0, 0.99, 12):
        assert indicator_field.radial_value(float(q)) >= 0.0
