import numpy as np
import pytest
from scipy import stats

from levypot import batchio
from levypot import killed as K
from levypot import model as M
from levypot.quadrature import log_edges, panel_integrals


@pytest.fixture(scope="module")
def stable1():
    return M.make_model("IsotropicStable", 1, 1.5)


@pytest.fixture(scope="module")
def stable3():
    return M.make_model("IsotropicStable", 3, 1.5)


UNIT = K.DomainSpec.ball([0.0], 1.0)
EXACT = K.SimConfig(master_seed=1001, n_paths=30000, scheme=K.EXACT_STABLE_EXIT)
EULER = K.SimConfig(master_seed=1002, n_paths=8000, dt0=0.04,
                    scheme=K.JUMP_ADAPTED_EULER)


def test_domain_spec_validation():
    with pytest.raises(ValueError):
        K.DomainSpec.ball([0.0], 0.0)
    with pytest.raises(ValueError):
        K.DomainSpec.annulus([0.0], 0.5, 0.5)
    with pytest.raises(ValueError):
        K.SimConfig(master_seed=1, n_paths=0)
    with pytest.raises(ValueError):
        K.SimConfig(master_seed=1, n_paths=10, dt0=0.0, scheme=K.JUMP_ADAPTED_EULER)


def test_sample_exit_preconditions(stable1):
    with pytest.raises(ValueError):
        K.sample_exit(stable1, UNIT, [1.5], EXACT)
    ann = K.DomainSpec.annulus([0.0], 0.25, 1.0)
    with pytest.raises(ValueError):
        K.sample_exit(stable1, ann, [0.5], EXACT)  # exact sampler is ball-only


def test_exact_batch_support_and_determinism(stable1):
    b1 = K.sample_exit(stable1, UNIT, [0.3], EXACT)
    b2 = K.sample_exit(stable1, UNIT, [0.3], EXACT)
    assert np.array_equal(b1.exits, b2.exits)
    assert np.all(np.abs(b1.exits[:, 0]) > 1.0 + 1e-12)
    assert b1.tau is None


def test_exact_batch_d3_support(stable3):
    dom = K.DomainSpec.ball([0, 0, 0], 1.0)
    b = K.sample_exit(stable3, dom, [0.4, 0.1, -0.2],
                      K.SimConfig(master_seed=7, n_paths=20000,
                                  scheme=K.EXACT_STABLE_EXIT))
    rr = np.linalg.norm(b.exits, axis=1)
    assert np.all(rr > 1.0 + 1e-12)


def test_exit_density_normalises(stable1):
    # independent route: integrate the calibrated kernel in the exact
    # edge variable v = s^2 - 1 = w^4 (the boundary blow-up v^{-a/2}
    # becomes smooth), with the sampler's normalisation constant
    sampler = K.BallExitSampler(stable1, 1.0, np.array([0.5]))
    c = sampler.c
    norm = sampler.norm_const

    def one_sided(sign):
        def f(w):
            v = w**4
            s = np.sqrt(1.0 + v)
            jac = 4.0 * w**3 / (2.0 * s)
            return norm * (c / v) ** 0.75 / np.abs(s - sign * 0.5) * jac
        edges = np.concatenate([np.linspace(0.0, 2.0, 200),
                                np.geomspace(2.0, 1e3, 200)[1:]])
        return float(np.sum(panel_integrals(f, edges, 16)))

    assert one_sided(1.0) + one_sided(-1.0) == pytest.approx(1.0, abs=1e-8)
    # and the density method agrees with the formula away from the edge
    z = np.array([[1.7], [-2.4]])
    expect = norm * (c / (z[:, 0] ** 2 - 1.0)) ** 0.75 / np.abs(z[:, 0] - 0.5)
    assert np.allclose(sampler.density(z), expect, rtol=1e-13)


def test_euler_batch_and_determinism(stable1):
    b1 = K.sample_exit(stable1, UNIT, [0.0], EULER)
    b2 = K.sample_exit(stable1, UNIT, [0.0], EULER)
    assert np.array_equal(b1.exits, b2.exits)
    assert np.array_equal(b1.tau, b2.tau)
    assert np.all(np.abs(b1.exits[:, 0]) >= 1.0)
    assert np.all(b1.tau > 0)


def test_euler_annulus_exits(stable1):
    ann = K.DomainSpec.annulus([0.0], 0.25, 1.0)
    cfg = K.SimConfig(master_seed=9, n_paths=3000, dt0=0.04,
                      scheme=K.JUMP_ADAPTED_EULER)
    b = K.sample_exit(stable1, ann, [0.6], cfg)
    rr = np.abs(b.exits[:, 0])
    assert np.all((rr <= 0.25 + 1e-15) | (rr >= 1.0 - 1e-15))


def test_euler_vs_exact_ks(stable1):
    n = 20000
    be = K.sample_exit(stable1, UNIT, [0.0],
                       K.SimConfig(master_seed=5, n_paths=n, dt0=0.02,
                                   scheme=K.JUMP_ADAPTED_EULER))
    bx = K.sample_exit(stable1, UNIT, [0.0],
                       K.SimConfig(master_seed=6, n_paths=n,
                                   scheme=K.EXACT_STABLE_EXIT))
    ks = stats.ks_2samp(be.exits[:, 0], bx.exits[:, 0])
    assert ks.statistic < 1.628 * np.sqrt(2.0 / n)


def test_exit_moment_scaling_and_bracket(stable1):
    reps = {}
    for r in (0.5, 1.0):
        dom = K.DomainSpec.ball([0.0], r)
        reps[r] = K.exit_moment(stable1, dom, [0.0], EULER)
        est = reps[r].estimate
        assert reps[r].lower <= est.value + est.ci_halfwidth + est.bias_bound
        assert est.value - est.ci_halfwidth - est.bias_bound <= reps[r].upper
    ratio = reps[1.0].estimate.value / reps[0.5].estimate.value
    err = (reps[1.0].estimate.ci_halfwidth / reps[0.5].estimate.value
           + ratio * reps[0.5].estimate.ci_halfwidth / reps[0.5].estimate.value
           + 0.1)
    assert abs(ratio - 2.0**1.5) <= 3.0 * err


def test_exit_moment_requires_euler(stable1):
    with pytest.raises(ValueError):
        K.exit_moment(stable1, UNIT, [0.0], EXACT)


def test_killed_density_zero_off_domain(stable1):
    est = K.killed_density(stable1, UNIT, 0.5, [0.2], [1.5], EULER)
    assert est.value == 0.0


def test_killed_density_symmetry_and_sandwich(stable1):
    from levypot.heatkernel import heat_evaluator
    ev = heat_evaluator(stable1)
    cfg = K.SimConfig(master_seed=41, n_paths=6000, dt0=0.04,
                      scheme=K.JUMP_ADAPTED_EULER)
    cfg2 = K.SimConfig(master_seed=42, n_paths=6000, dt0=0.04,
                       scheme=K.JUMP_ADAPTED_EULER)
    for (x, y, t) in [(-0.3, 0.4, 0.25), (0.0, 0.5, 1.0), (0.2, -0.6, 0.25),
                      (0.5, -0.2, 1.0)]:
        a = K.killed_density(stable1, UNIT, t, [x], [y], cfg)
        b = K.killed_density(stable1, UNIT, t, [y], [x], cfg2)
        tol = 3.0 * (a.ci_halfwidth + b.ci_halfwidth + a.bias_bound + b.bias_bound)
        assert abs(a.value - b.value) <= tol
        free = float(ev(t, np.array([abs(x - y)]))[0])
        assert a.value <= free + 3.0 * (a.ci_halfwidth + a.bias_bound)
        assert a.value >= -3.0 * (a.ci_halfwidth + a.bias_bound)


def test_green_zero_and_validation(stable1):
    assert K.green_function(stable1, UNIT, [0.2], [1.5], EXACT).value == 0.0
    assert K.green_function(stable1, UNIT, [1.2], [0.2], EXACT).value == 0.0
    with pytest.raises(ValueError):
        K.green_function(stable1, UNIT, [0.2], [0.2], EXACT)


def test_green_matches_calibrated_closed_form(stable1):
    kappa = K.ball_green_constant(stable1)
    for (x, y) in [(0.0, 0.5), (-0.3, 0.4), (0.7, -0.5)]:
        mc = K.green_function(stable1, UNIT, [x], [y], EXACT)
        cf = kappa * K.stable_ball_green_shape(stable1, UNIT, [x], [y])
        assert abs(mc.value - cf) <= 3.0 * mc.ci_halfwidth


def test_green_symmetry(stable1):
    g1 = K.green_function(stable1, UNIT, [0.2], [-0.5], EXACT)
    g2 = K.green_function(stable1, UNIT, [-0.5], [0.2],
                          K.SimConfig(master_seed=1003, n_paths=30000,
                                      scheme=K.EXACT_STABLE_EXIT))
    assert g1.agrees_with(g2)


def test_green_scaling_across_radii(stable1):
    # G_{B_r}(x, y) = r^{a-d} G_{B_1}(x/r, y/r) for the stable model
    kappa = K.ball_green_constant(stable1)
    for r in (0.25, 0.5):
        dom = K.DomainSpec.ball([0.0], r)
        cf = kappa * K.stable_ball_green_shape(stable1, dom, [0.0], [r * 0.35])
        ref = (r ** 0.5) * kappa * K.stable_ball_green_shape(stable1, UNIT, [0.0], [0.35])
        assert cf == pytest.approx(ref, rel=1e-10)


def test_occupation_identity(stable1):
    x = np.array([0.3])
    ys = np.linspace(-0.999, 0.999, 401)[:, None]
    vals, cis, _, _ = K.green_values_shared_batch(stable1, UNIT, x, ys, EXACT)
    lhs = float(np.trapezoid(vals, ys[:, 0]))
    rep = K.exit_moment(stable1, UNIT, x, EULER)
    tol = 3.0 * rep.estimate.ci_halfwidth + rep.estimate.bias_bound + 0.02 * lhs
    assert abs(lhs - rep.estimate.value) <= tol


def test_poisson_validation(stable1):
    with pytest.raises(ValueError):
        K.poisson_kernel(stable1, UNIT, [0.0], [0.5], EXACT)  # z inside
    with pytest.raises(ValueError):
        K.poisson_kernel(stable1, UNIT, [1.5], [2.0], EXACT)  # x outside


def test_poisson_triangle(stable1):
    emp_cfg = K.SimConfig(master_seed=1004, n_paths=60000,
                          scheme=K.EXACT_STABLE_EXIT)
    for (x, z) in [(0.0, 1.5), (0.3, -1.6)]:
        ex = K.poisson_kernel(stable1, UNIT, [x], [z], EXACT, K.EXACT_STABLE)
        iw = K.poisson_kernel(stable1, UNIT, [x], [z], EXACT, K.IKEDA_WATANABE)
        em = K.poisson_kernel(stable1, UNIT, [x], [z], emp_cfg, K.EMPIRICAL)
        assert abs(iw.value - ex.value) <= 3.0 * (iw.ci_halfwidth + ex.ci_halfwidth)
        assert abs(em.value - ex.value) <= 3.0 * (em.ci_halfwidth + ex.ci_halfwidth)


def test_poisson_two_sided_bound(stable1):
    sf = M.scale_functions(stable1)
    for (x, z) in [(0.0, 1.3), (0.5, 2.0)]:
        p = K.poisson_kernel(stable1, UNIT, [x], [z], EXACT, K.EXACT_STABLE)
        delta_x, delta_z = 1.0 - abs(x), abs(z) - 1.0
        lower = float(sf.V2(np.array([delta_x]))[0]
                      * stable1.g(np.array([delta_z + 2.0]))[0])
        upper = float(sf.V2(np.array([2.0]))[0] * stable1.g(np.array([delta_z]))[0])
        # a single finite constant brackets the kernel both ways
        c = max(lower / p.value, p.value / upper)
        assert np.isfinite(c) and c > 0


def test_regularized_poisson(stable1):
    inside = K.regularized_poisson(stable1, 1.0, [0.2], EXACT)
    assert inside.value == 0.0
    with pytest.raises(ValueError):
        K.regularized_poisson(stable1, 1.5, [0.5], EXACT)
    vals = [K.regularized_poisson(stable1, 1.0, [z], EXACT).value
            for z in (0.3, 0.6, 2.0)]
    assert all(np.isfinite(v) and v >= 0 for v in vals)


def test_grad_green_oracles(stable1):
    gg = K.grad_green(stable1, UNIT, [0.1], [0.5], EXACT)
    h = 1e-3
    gp = K.green_function(stable1, UNIT, [0.1 + h], [0.5], EXACT)
    gm = K.green_function(stable1, UNIT, [0.1 - h], [0.5], EXACT)
    fd = (gp.value - gm.value) / (2 * h)
    assert abs(gg.value[0] - fd) <= 3.0 * (gg.ci_halfwidth[0]
                                           + (gp.ci_halfwidth + gm.ci_halfwidth) / (2 * h)
                                           + 1e-3 * abs(fd))
    with pytest.raises(ValueError):
        K.grad_green(stable1, UNIT, [0.95], [0.5], EXACT)  # outside a r


def test_grad_green_reflection(stable1):
    g1 = K.grad_green(stable1, UNIT, [0.0], [-0.5], EXACT)
    g2 = K.grad_green(stable1, UNIT, [0.0], [0.5],
                      K.SimConfig(master_seed=1005, n_paths=30000,
                                  scheme=K.EXACT_STABLE_EXIT))
    tol = 3.0 * (g1.ci_halfwidth[0] + g2.ci_halfwidth[0])
    assert abs(g1.value[0] + g2.value[0]) <= tol


def test_boundary_decay(stable1):
    rep = K.boundary_decay_check(stable1, 0.5, [0.39, 0.43, 0.47, 0.49], EXACT)
    assert rep.verdict == "pass"
    assert np.isfinite(rep.constant)
    with pytest.raises(ValueError):
        K.boundary_decay_check(stable1, 1.5, [1.2], EXACT)


def test_lower_green_bound_scale_invariant(stable1):
    # G_{B_r}(x,y) |x-y|^d / V^2(|x-y|) >= c for |x|,|y| <= r/8
    kappa = K.ball_green_constant(stable1)
    sf = M.scale_functions(stable1)
    consts = []
    for r in (0.25, 0.5, 1.0):
        dom = K.DomainSpec.ball([0.0], r)
        worst = np.inf
        for (xq, yq) in [(0.0, r / 8), (-r / 8, r / 8), (r / 16, -r / 16)]:
            g = kappa * K.stable_ball_green_shape(stable1, dom, [xq], [yq])
            gap = abs(xq - yq)
            worst = min(worst, g * gap / float(sf.V2(np.array([gap]))[0]))
        consts.append(worst)
    consts = np.array(consts)
    assert np.all(consts > 0)
    assert consts.max() / consts.min() < 1.2  # scale invariance


def test_v2_integral_identity(stable1):
    # int_{B_rho} V^2(|y|)/|y|^{d+1} dy <= c V^2(rho)/rho by quadrature
    sf = M.scale_functions(stable1)
    for rho in (0.1, 0.5, 2.0):
        val = 2.0 * float(np.sum(panel_integrals(
            lambda y: sf.V2(y) / y**2, log_edges(1e-9 * rho, rho, 12), 16)))
        bound_shape = float(sf.V2(np.array([rho]))[0]) / rho
        assert val <= 10.0 * bound_shape
        assert val > 0


def test_l1_gradient_integral_bound(stable1):
    # int_{B_rho} |grad_x G_{B_rho}(0, y)| dy <= C V^2(rho)/rho
    sf = M.scale_functions(stable1)
    cfg = K.SimConfig(master_seed=1006, n_paths=15000, scheme=K.EXACT_STABLE_EXIT)
    ratios = []
    for rho in (0.25, 0.5, 1.0):
        dom = K.DomainSpec.ball([0.0], rho)
        gx, gw = np.polynomial.legendre.leggauss(12)
        nodes = 0.98 * rho * gx
        wts = 0.98 * rho * gw
        mags = np.array([abs(K.grad_green(stable1, dom, [0.0], [float(y)], cfg).value[0])
                         for y in nodes])
        val = float(np.sum(wts * mags))
        ratios.append(val / (float(sf.V2(np.array([rho]))[0]) / rho))
    assert all(np.isfinite(r) and r > 0 for r in ratios)
    assert max(ratios) / min(ratios) < 1.5


def test_batch_io_roundtrip(tmp_path, stable1):
    b = K.sample_exit(stable1, UNIT, [0.3],
                      K.SimConfig(master_seed=77, n_paths=500, dt0=0.05,
                                  scheme=K.JUMP_ADAPTED_EULER))
    path = tmp_path / "batch.levx"
    batchio.save_batch(b, path)
    b2 = batchio.load_batch(path)
    assert np.array_equal(b.exits, b2.exits)
    assert np.array_equal(b.tau, b2.tau)
    assert np.array_equal(b.steps, b2.steps)
    assert b2.model == stable1
    assert b2.domain == b.domain
    csv_path = tmp_path / "batch.csv"
    batchio.export_batch_csv(b, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "path,tau,x1,steps"
    assert len(lines) == 501


def test_batch_io_magic(tmp_path):
    bad = tmp_path / "bad.levx"
    bad.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ValueError):
        batchio.load_batch(bad)


def test_annulus_green_and_poisson(stable1):
    ann = K.DomainSpec.annulus([0.0], 0.25, 1.0)
    cfg = K.SimConfig(master_seed=1100, n_paths=4000, dt0=0.05,
                      scheme=K.JUMP_ADAPTED_EULER)
    g = K.green_function(stable1, ann, [0.5], [0.7], cfg)
    assert g.value > 0
    assert K.green_function(stable1, ann, [0.5], [0.1], cfg).value == 0.0
    p_inner = K.poisson_kernel(stable1, ann, [0.5], [0.05], cfg, K.IKEDA_WATANABE)
    p_outer = K.poisson_kernel(stable1, ann, [0.5], [1.5], cfg, K.IKEDA_WATANABE)
    assert p_inner.value > 0 and p_outer.value > 0
    with pytest.raises(ValueError):
        K.poisson_kernel(stable1, ann, [0.5], [0.7], cfg)  # z inside the annulus
