import math

import numpy as np
import pytest

import oracles
from wsfbm.kernels import KernelSpec, PowerLawWeight, kernel_eval_quad
from wsfbm.quadrature import QuadConfig
from wsfbm.rdkernels import (DoubleExp, Matern, Periodic, RadialExponentialWeight,
                             RadialPowerWeight, RationalQuadratic,
                             RdKernelError, SetGeometry, c_af, k_haf,
                             mixed_cov, set_distance, stationary_eval)

BALL2 = SetGeometry((0.0, 0.0), 1.0)


def test_set_distance_examples():
    assert set_distance(BALL2, (0.0, 0.0)) == 0.0
    assert set_distance(BALL2, (2.0, 0.0)) == 1.0
    assert set_distance(BALL2, (3.0, 4.0)) == 4.0


def test_set_distance_dimension_mismatch():
    with pytest.raises(RdKernelError):
        set_distance(BALL2, (1.0, 2.0, 3.0))


def test_geometry_validation():
    with pytest.raises(RdKernelError):
        SetGeometry((0.0, 0.0), 0.0)


# ---------------------------------------------------------------------------
# shell-volume kernel
# ---------------------------------------------------------------------------

def test_c_af_zero_inside():
    for f in (RadialPowerWeight(0.5), RadialExponentialWeight(-1.0)):
        assert c_af(BALL2, f, (0.5, 0.0), (3.0, 0.0)) == 0.0
        assert c_af(BALL2, f, (1.0, 0.0), (3.0, 0.0)) == 0.0


def test_c_af_power_direct_value():
    # d = 2, a = 0, m = 2: pi (2^2 - 1) = 3 pi
    val = c_af(BALL2, RadialPowerWeight(0.0), (2.0, 0.0), (0.0, 3.0))
    assert val == pytest.approx(3.0 * math.pi, rel=1e-12)


def test_c_af_exponential_negative_quadrature_oracle():
    val = c_af(BALL2, RadialExponentialWeight(-1.0), (2.0, 0.0), (0.0, 2.5))
    oracle = 2 * math.pi * oracles.quad(lambda r: np.exp(-r) * r, 1.0, 2.0)
    assert val == pytest.approx(oracle, abs=1e-8)


def test_c_af_exponential_positive_quadrature_oracle():
    val = c_af(BALL2, RadialExponentialWeight(0.7), (2.0, 0.0), (0.0, 2.5))
    oracle = 2 * math.pi * oracles.quad(lambda r: np.exp(0.7 * r) * r, 1.0, 2.0)
    assert val == pytest.approx(oracle, abs=1e-8)


def test_c_af_monotone_in_min_norm():
    f = RadialPowerWeight(0.3)
    vals = [c_af(BALL2, f, (m, 0.0), (0.0, 5.0)) for m in (1.2, 1.8, 2.4, 4.0)]
    assert np.all(np.diff(vals) > 0)


def test_c_af_domain_errors():
    with pytest.raises(RdKernelError):
        c_af(BALL2, RadialPowerWeight(-2.5), (2.0, 0.0), (2.0, 0.0))
    with pytest.raises(RdKernelError):
        c_af(SetGeometry((1.0, 0.0), 1.0), RadialPowerWeight(0.0),
             (3.0, 0.0), (3.0, 0.0))


# ---------------------------------------------------------------------------
# set-distance weighted kernels
# ---------------------------------------------------------------------------

def test_k_haf_empty_shell():
    assert k_haf(BALL2, RadialPowerWeight(0.3), 0.4, "-",
                 (1.0, 0.0), (2.0, 1.0)) == 0.0


def test_k_haf_minus_diagonal_identity():
    # Q_{H,-}(z, z) = 2 ||z||^(2H): the integrand halves exactly
    x = (2.0, 0.5)
    cfg = QuadConfig(abs_tol=1e-8, rel_tol=1e-8)
    v = k_haf(BALL2, RadialPowerWeight(0.3), 0.4, "-", x, x, cfg)

    def radial(r):
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        u = np.stack([r[:, None] * np.cos(th)[None, :],
                      r[:, None] * np.sin(th)[None, :]], axis=2)
        d = np.linalg.norm(np.asarray(x)[None, None, :] - u, axis=2)
        vals = np.linalg.norm(u, axis=2) ** 0.3 * 2.0 * d ** 0.8
        return r * vals.mean(axis=1) * 2 * np.pi

    m = min(np.linalg.norm(x), np.linalg.norm(x))
    oracle = sum(oracles.gl_panel(radial, a, b)
                 for a, b in zip(np.linspace(1, m, 20)[:-1],
                                 np.linspace(1, m, 20)[1:]))
    assert v == pytest.approx(oracle, rel=1e-4)


def test_k_haf_d1_corresponds_to_scalar_kernel():
    # one-sided piece equals (1-b) R_{f,b}; the d = 1 shell integrates both
    # sides of the point set
    b, a = 0.8, 0.3
    h_index = b / 2.0
    eps = 1e-9
    ball1 = SetGeometry((0.0,), eps)
    x, y = 1.0, 2.0
    spec = KernelSpec(PowerLawWeight(a), b)
    r_val = kernel_eval_quad(spec, x, y)
    pos = oracles.quad_power_lo(
        lambda u: (x - u) ** b + (y - u) ** b - (x + y - 2 * u) ** b, a, 1.0)
    assert pos == pytest.approx((1.0 - b) * r_val, abs=1e-8)
    neg = oracles.quad_power_lo(
        lambda u: (x + u) ** b + (y + u) ** b - (x + y + 2 * u) ** b, a, 1.0)
    total = k_haf(ball1, RadialPowerWeight(a), h_index, "+", (x,), (y,))
    assert total == pytest.approx(pos + neg, abs=1e-4)


def test_k_haf_symmetry_and_minus_sign_psd():
    rng = np.random.default_rng(42)
    pts = []
    while len(pts) < 8:
        p = rng.uniform(-3, 3, 2)
        if np.linalg.norm(p) > 1.15:
            pts.append(p)
    cfg = QuadConfig(abs_tol=1e-7, rel_tol=1e-7)
    for sign in ("+", "-"):
        mat = np.zeros((8, 8))
        for i in range(8):
            for j in range(i + 1):
                mat[i, j] = mat[j, i] = k_haf(BALL2, RadialPowerWeight(0.3),
                                              0.35, sign, pts[i], pts[j], cfg)
        assert mat == pytest.approx(mat.T)
        if sign == "-":
            # mixture of fBm-type kernels: positive semidefinite
            eig = np.linalg.eigvalsh(mat)
            assert eig.min() >= -1e-8 * np.trace(mat)


def test_k_haf_plus_sign_indefinite_on_antipodes():
    # The sum-form Q is not a covariance over antipodal pairs in R^d:
    # Q_+(x, -x) = 2||x||^(2H) exceeds the diagonal (2 - 2^(2H)) ||x||^(2H),
    # so the integrated kernel inherits a negative eigenvalue.  Positivity
    # holds on the half-line configuration (see the d = 1 correspondence
    # test), not over the whole plane.
    cfg = QuadConfig(abs_tol=1e-7, rel_tol=1e-7)
    x = (2.0, 0.0)
    y = (-2.0, 0.0)
    on_diag = k_haf(BALL2, RadialPowerWeight(0.3), 0.35, "+", x, x, cfg)
    off_diag = k_haf(BALL2, RadialPowerWeight(0.3), 0.35, "+", x, y, cfg)
    assert abs(off_diag) > on_diag  # 2x2 Gram has a negative eigenvalue


def test_k_haf_d3_runs_and_is_symmetric():
    ball3 = SetGeometry((0.0, 0.0, 0.0), 1.0)
    cfg = QuadConfig(abs_tol=1e-6, rel_tol=1e-6)
    x, y = (2.0, 0.0, 0.5), (0.0, 1.8, 0.0)
    v1 = k_haf(ball3, RadialPowerWeight(0.2), 0.4, "-", x, y, cfg)
    v2 = k_haf(ball3, RadialPowerWeight(0.2), 0.4, "-", y, x, cfg)
    assert v1 == pytest.approx(v2, rel=1e-9)
    assert v1 > 0


def test_k_haf_rejects_bad_inputs():
    with pytest.raises(RdKernelError):
        k_haf(BALL2, RadialPowerWeight(0.3), 0.4, "x", (2, 0), (2, 0))
    with pytest.raises(RdKernelError):
        k_haf(BALL2, RadialPowerWeight(0.3), 1.5, "-", (2, 0), (2, 0))
    with pytest.raises(RdKernelError):
        k_haf(SetGeometry((0.0,) * 4, 1.0), RadialPowerWeight(0.3), 0.4, "-",
              (2, 0, 0, 0), (2, 0, 0, 0))


# ---------------------------------------------------------------------------
# stationary kernels
# ---------------------------------------------------------------------------

def test_stationary_values_at_zero_distance():
    assert stationary_eval(DoubleExp(1.5, 0.7), (1, 2), (1, 2)) == 1.5 ** 2
    assert stationary_eval(RationalQuadratic(1.2, 0.8, 2.0),
                           (0, 0), (0, 0)) == 1.2 ** 2
    assert stationary_eval(Matern(1.5, 1.0), (1, 1), (1, 1)) == math.inf


def test_periodic_kernel_period():
    k = Periodic(1.1, 2.0, 0.5)
    assert stationary_eval(k, (0, 0), (2.0, 0)) == pytest.approx(1.1 ** 2,
                                                                 rel=1e-12)


def test_stationary_depends_on_distance_only():
    rng = np.random.default_rng(1)
    kernel = RationalQuadratic(1.0, 1.3, 0.7)
    for _ in range(10):
        x = rng.uniform(-2, 2, 2)
        y = rng.uniform(-2, 2, 2)
        shift = rng.uniform(-5, 5, 2)
        assert stationary_eval(kernel, x, y) == pytest.approx(
            stationary_eval(kernel, x + shift, y + shift), abs=1e-12)


def test_matern_formula_against_bessel_oracle():
    kappa, rho = 1.5, 1.0
    d = 1.3
    pref = (math.gamma(kappa + 1) ** 0.5 * kappa ** ((kappa + 1) / 4)
            * d ** ((kappa - 1) / 2)
            / (math.pi ** 0.5 * math.gamma((kappa + 1) / 2)
               * math.gamma(kappa) ** 0.5
               * (2 * kappa ** 0.5 * rho) ** ((kappa + 1) / 2)))
    expected = pref * oracles.bessel_k_integral(kappa, d / rho)
    assert stationary_eval(Matern(kappa, rho), (0.0, 0.0),
                           (d, 0.0)) == pytest.approx(expected, rel=1e-8)


def test_stationary_symmetry_random_pairs():
    rng = np.random.default_rng(9)
    kernels = [Matern(1.2, 0.8), DoubleExp(1.0, 1.2),
               RationalQuadratic(0.9, 1.1, 1.4), Periodic(1.0, 1.7, 0.9)]
    for _ in range(25):
        x = rng.uniform(-3, 3, 2)
        y = rng.uniform(-3, 3, 2)
        for k in kernels:
            assert stationary_eval(k, x, y) == stationary_eval(k, y, x)


# ---------------------------------------------------------------------------
# mixed covariance
# ---------------------------------------------------------------------------

def test_mixed_cov_zero_inside_ball():
    k = DoubleExp(1.0, 1.0)
    assert mixed_cov(k, BALL2, RadialPowerWeight(0.0), (0.5, 0.0),
                     (3.0, 0.0)) == 0.0


def test_mixed_cov_at_reference_point():
    # at x = y = p the stationary factor is sigma^2
    k = DoubleExp(1.3, 0.9)
    p = (2.0, 2.0)
    caf = c_af(BALL2, RadialPowerWeight(0.0), p, p)
    assert mixed_cov(k, BALL2, RadialPowerWeight(0.0), p, p) == pytest.approx(
        1.3 ** 2 * caf, rel=1e-12)


def test_mixed_cov_zero_region_pattern():
    # zero inside / on the unit ball, positive outside (reference point fixed)
    k = DoubleExp(1.0, 0.6)
    f = RadialPowerWeight(0.0)
    p = (2.0, 2.0)
    for x in (-2.5, -1.0, 0.0, 0.7, 1.4, 2.5):
        for y in (-2.0, 0.0, 0.9, 2.0):
            val = mixed_cov(k, BALL2, f, (x, y), p)
            if math.hypot(x, y) <= 1.0:
                assert val == 0.0
            else:
                assert val > 0.0


def test_mixed_cov_gram_psd():
    rng = np.random.default_rng(12)
    pts = []
    while len(pts) < 15:
        p = rng.uniform(-4, 4, 2)
        if np.linalg.norm(p) > 1.05:
            pts.append(p)
    k = DoubleExp(1.0, 0.8)
    f = RadialPowerWeight(0.4)
    mat = np.zeros((15, 15))
    for i in range(15):
        for j in range(i + 1):
            mat[i, j] = mat[j, i] = mixed_cov(k, BALL2, f, pts[i], pts[j])
    eig = np.linalg.eigvalsh(mat)
    assert eig.min() >= -1e-8 * np.trace(mat)
