import math

import numpy as np
import pytest

import oracles
from wsfbm import specfun
from wsfbm.kernels import (ConstantWeight, ExponentialWeight, KernelError, KernelSpec, LongRangeDependenceProbe,
                           LongRangeMemoryProbe, PowerLawWeight,
                           PSDRepairError, SecondDifferenceProbe,
                           SmallTimeVarianceProbe, TimeGrid, continuity_gap,
                           gram, increment_cov, increment_variance,
                           kernel_eval_closed, kernel_eval_quad,
                           kernel_values, memory_limits, nu_cov,
                           nu_cov_values, psd_cholesky)

ONE = ConstantWeight(1.0)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

def test_weight_validation():
    with pytest.raises(KernelError):
        PowerLawWeight(-1.0)
    with pytest.raises(KernelError):
        ConstantWeight(0.0)


def test_kernel_spec_validation():
    with pytest.raises(KernelError):
        KernelSpec(ONE, 1.0)
    with pytest.raises(KernelError):
        KernelSpec(ONE, 2.5)
    assert KernelSpec(ONE, 0.0).is_log is False
    assert KernelSpec.log_kernel(ONE).is_log


def test_time_grid_validation():
    with pytest.raises(KernelError):
        TimeGrid(np.array([0.5, 1.0]))
    with pytest.raises(KernelError):
        TimeGrid(np.array([0.0, 1.0, 1.0]))
    grid = TimeGrid.uniform(10.0, 5)
    assert grid.n == 5
    assert grid.deltas == pytest.approx(np.full(5, 2.0))
    assert grid.interior[0] == 2.0


# ---------------------------------------------------------------------------
# scalar kernel evaluation
# ---------------------------------------------------------------------------

def test_brownian_reduction():
    spec = KernelSpec(ONE, 0.0)
    assert kernel_eval_quad(spec, 2.0, 3.0) == pytest.approx(2.0, abs=1e-12)
    assert kernel_eval_closed(spec, 2.0, 3.0) == pytest.approx(2.0, abs=1e-12)


def test_constant_weight_reference_value(tight_cfg):
    # f = (1-b)^2 (1+b), b = 1/2 at (1,1): (1-b)(2 - 2^b)
    b = 0.5
    spec = KernelSpec(ConstantWeight((1 - b) ** 2 * (1 + b)), b)
    expected = 0.5 * (2.0 - 0.5 * 2.0 ** 1.5)
    assert kernel_eval_quad(spec, 1.0, 1.0, tight_cfg) == pytest.approx(
        expected, abs=1e-10)


def test_log_kernel_unit_point(tight_cfg):
    spec = KernelSpec.log_kernel(ONE)
    assert kernel_eval_quad(spec, 1.0, 1.0, tight_cfg) == pytest.approx(
        math.log(2.0), abs=1e-11)


def test_zero_boundary():
    for spec in (KernelSpec(PowerLawWeight(0.42), 1.59),
                 KernelSpec.log_kernel(ONE)):
        assert kernel_eval_quad(spec, 0.0, 3.0) == 0.0
        assert kernel_eval_closed(spec, 3.0, 0.0) == 0.0


@pytest.mark.parametrize("method", [1, 2, 3])
def test_quadrature_methods_agree(method, tight_cfg):
    spec = KernelSpec(PowerLawWeight(0.21), 1.28)
    closed = kernel_eval_closed(spec, 1.5, 2.5)
    assert kernel_eval_quad(spec, 1.5, 2.5, tight_cfg,
                            method) == pytest.approx(closed, abs=1e-8)


@pytest.mark.parametrize("weight,b", [
    (PowerLawWeight(0.42), 1.59),
    (PowerLawWeight(-0.5), 0.3),
    (ExponentialWeight(0.21), 1.28),
    (ExponentialWeight(-0.6), 1.28),
    (ExponentialWeight(0.0), 0.7),
    (ConstantWeight(2.5), 1.8),
])
def test_closed_matches_quadrature_weighted(weight, b, tight_cfg):
    spec = KernelSpec(weight, b)
    for s, t in [(1.0, 2.0), (0.4, 7.3), (3.3, 3.3)]:
        q = kernel_eval_quad(spec, s, t, tight_cfg)
        c = kernel_eval_closed(spec, s, t)
        assert c == pytest.approx(q, abs=1e-6)


@pytest.mark.parametrize("weight", [
    PowerLawWeight(0.42), PowerLawWeight(-0.5),
    ExponentialWeight(-0.34), ExponentialWeight(0.8), ConstantWeight(1.0),
])
def test_closed_matches_quadrature_log(weight, tight_cfg):
    spec = KernelSpec.log_kernel(weight)
    for s, t in [(1.5, 2.5), (0.7, 4.0), (2.0, 2.0)]:
        q = kernel_eval_quad(spec, s, t, tight_cfg)
        c = kernel_eval_closed(spec, s, t)
        assert c == pytest.approx(q, abs=1e-6)


def test_closed_symmetry_random_pairs():
    rng = np.random.default_rng(17)
    spec = KernelSpec(PowerLawWeight(0.42), 1.59)
    log_spec = KernelSpec.log_kernel(ExponentialWeight(-0.34))
    for _ in range(50):
        s, t = rng.uniform(0.05, 8.0, 2)
        assert kernel_eval_closed(spec, s, t) == pytest.approx(
            kernel_eval_closed(spec, t, s), rel=1e-12)
        assert kernel_eval_closed(log_spec, s, t) == pytest.approx(
            kernel_eval_closed(log_spec, t, s), rel=1e-12)


def test_kernel_values_matches_scalar():
    rng = np.random.default_rng(3)
    s = rng.uniform(0.1, 9.0, 40)
    t = rng.uniform(0.1, 9.0, 40)
    for spec in (KernelSpec(PowerLawWeight(0.21), 1.28),
                 KernelSpec(ExponentialWeight(-0.6), 1.28),
                 KernelSpec(ExponentialWeight(0.21), 1.28),
                 KernelSpec(ConstantWeight(1.3), 0.4),
                 KernelSpec.log_kernel(PowerLawWeight(0.42))):
        vals = kernel_values(spec, s, t)
        ref = np.array([kernel_eval_closed(spec, si, ti)
                        for si, ti in zip(s, t)])
        assert vals == pytest.approx(ref, abs=2e-9)


# ---------------------------------------------------------------------------
# derivative-process kernel
# ---------------------------------------------------------------------------

def test_nu_cov_b_two_is_running_mass():
    spec = KernelSpec(ONE, 2.0)
    assert nu_cov(spec, 1.5, 3.0) == pytest.approx(1.5, abs=1e-10)


def test_nu_cov_diagonal_beta_formula(tight_cfg):
    # f = u^a, s = t: 2^(b-2) s^(a+b-1) B(a+1, b-1)
    a, b, s = 0.3, 1.7, 1.4
    spec = KernelSpec(PowerLawWeight(a), b)
    expected = 2.0 ** (b - 2.0) * s ** (a + b - 1.0) * specfun.beta(a + 1, b - 1)
    assert nu_cov(spec, s, s, tight_cfg) == pytest.approx(expected, rel=1e-9)


def test_nu_cov_quadrature_oracle(tight_cfg):
    a, b = 0.3, 1.7
    spec = KernelSpec(PowerLawWeight(a), b)
    oracle = oracles.quad_power_lo(lambda u: (3.0 - 2.0 * u) ** (b - 2.0),
                                   a, 1.0)
    assert nu_cov(spec, 1.0, 2.0, tight_cfg) == pytest.approx(oracle, abs=1e-9)


def test_nu_cov_values_vectorized(tight_cfg):
    rng = np.random.default_rng(8)
    s = rng.uniform(0.2, 5.0, 12)
    t = rng.uniform(0.2, 5.0, 12)
    for spec in (KernelSpec(PowerLawWeight(0.42), 1.59),
                 KernelSpec(ExponentialWeight(0.4), 1.3),
                 KernelSpec(ExponentialWeight(-0.7), 1.8)):
        vals = nu_cov_values(spec, s, t)
        ref = np.array([nu_cov(spec, si, ti, tight_cfg)
                        for si, ti in zip(s, t)])
        assert vals == pytest.approx(ref, abs=1e-8)


def test_nu_cov_requires_high_b():
    with pytest.raises(KernelError):
        nu_cov(KernelSpec(ONE, 0.5), 1.0, 1.0)


# ---------------------------------------------------------------------------
# Gram assembly
# ---------------------------------------------------------------------------

def test_gram_brownian_matrix():
    grid = TimeGrid(np.array([0.0, 1.0, 2.0, 3.0]))
    gm = gram(KernelSpec(ONE, 0.0), grid, method=1)
    expected = np.array([[1.0, 1, 1], [1, 2, 2], [1, 2, 3]])
    assert gm.entries == pytest.approx(expected, abs=1e-8)
    assert gm.method == "gauss_kronrod"


def test_gram_symmetry_and_psd():
    grid = TimeGrid.uniform(5.0, 12)
    gm = gram(KernelSpec(PowerLawWeight(0.42), 1.59), grid, method=4)
    assert gm.entries == pytest.approx(gm.entries.T, abs=1e-12)
    eig = np.linalg.eigvalsh(gm.entries)
    assert eig.min() >= -1e-8 * np.trace(gm.entries)


def test_gram_methods_1_vs_4_spec_example():
    # n = 50 on [0, 10]: coordinate-wise agreement at 1e-4
    grid = TimeGrid.uniform(10.0, 50)
    spec = KernelSpec(PowerLawWeight(0.21), 1.28)
    g1 = gram(spec, grid, method=1)
    g4 = gram(spec, grid, method=4)
    assert np.max(np.abs(g1.entries - g4.entries)) <= 1e-4


def test_gram_rejects_bad_method():
    grid = TimeGrid.uniform(1.0, 3)
    with pytest.raises(KernelError):
        gram(KernelSpec(ONE, 0.0), grid, method=5)


def test_psd_cholesky_repairs_and_fails():
    mat = np.eye(3)
    mat[2, 2] = -1e-13  # slightly indefinite
    chol, jitter = psd_cholesky(mat)
    assert jitter > 0
    bad = np.diag([1.0, -5.0, 1.0])
    with pytest.raises(PSDRepairError):
        psd_cholesky(bad)


def test_random_admissible_grams_psd():
    rng = np.random.default_rng(99)
    for _ in range(10):
        fam = rng.integers(0, 3)
        if fam == 0:
            weight = PowerLawWeight(rng.uniform(-0.8, 2.0))
        elif fam == 1:
            weight = ExponentialWeight(rng.uniform(-1.5, 1.5))
        else:
            weight = ConstantWeight(rng.uniform(0.2, 3.0))
        b = rng.uniform(0.0, 2.0)
        if 0.97 < b <= 1.0:
            b = None
        elif 1.0 < b < 1.03:
            b = 1.03
        spec = KernelSpec(weight, b)
        n = int(rng.integers(5, 12))
        pts = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 10.0, n))])
        gm = gram(spec, TimeGrid(pts), method=4 if b is not None else 1)
        eig = np.linalg.eigvalsh(gm.entries)
        assert eig.min() >= -1e-8 * np.trace(gm.entries)


# ---------------------------------------------------------------------------
# increments and memory behavior
# ---------------------------------------------------------------------------

def test_increment_decomposition_matches_kernel(tight_cfg):
    # E(zeta_t - zeta_s)^2 from the two-term split vs R(t,t)+R(s,s)-2R(s,t)
    for spec in (KernelSpec(PowerLawWeight(0.42), 1.59),
                 KernelSpec(ExponentialWeight(-0.6), 0.5),
                 KernelSpec(ONE, 0.8)):
        for s, t in [(0.5, 1.5), (2.0, 2.75)]:
            direct = (kernel_eval_closed(spec, t, t)
                      + kernel_eval_closed(spec, s, s)
                      - 2.0 * kernel_eval_closed(spec, s, t))
            split = increment_variance(spec, s, t, tight_cfg)
            assert split == pytest.approx(direct, abs=1e-8)


def test_increment_cov_matches_kernel_combination(tight_cfg):
    spec = KernelSpec(PowerLawWeight(0.42), 0.5)
    r, nu, p, q = 0.5, 1.0, 2.0, 3.0
    direct = (kernel_eval_closed(spec, nu, q) - kernel_eval_closed(spec, nu, p)
              - kernel_eval_closed(spec, r, q) + kernel_eval_closed(spec, r, p))
    assert increment_cov(spec, r, nu, p, q, tight_cfg) == pytest.approx(
        direct, abs=1e-9)


def test_increment_bounds_constant_weight(tight_cfg):
    # (2 - 2^b)(t-s)^(1+b) <= E(zeta_t - zeta_s)^2 <= (t-s)^(1+b)
    for b in (0.2, 0.5, 0.8):
        spec = KernelSpec(ConstantWeight((1 - b) * (1 + b)), b)
        for s, t in [(1.0, 2.0), (3.0, 7.0), (0.5, 0.9)]:
            inc = increment_variance(spec, s, t, tight_cfg)
            gap = (t - s) ** (1.0 + b)
            assert (2.0 - 2.0 ** b) * gap <= inc + 1e-10
            assert inc <= gap + 1e-10


def test_continuity_gap_examples(loose_cfg):
    gap = continuity_gap(ONE, 0.999, 1.0, 1.0, loose_cfg)
    assert gap <= 0.01
    gaps = [continuity_gap(ONE, b, 1.0, 2.0, loose_cfg)
            for b in (0.9, 0.99, 0.999)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_continuity_along_family_path(loose_cfg):
    # f = u^a with (a, b) -> (0, 1): R_{f,b} approaches K_f with f == 1
    target = kernel_eval_quad(KernelSpec.log_kernel(ONE), 1.0, 1.0, loose_cfg)
    gaps = []
    for a, b in [(0.1, 0.9), (0.01, 0.99), (0.001, 0.999)]:
        val = kernel_eval_quad(KernelSpec(PowerLawWeight(a), b), 1.0, 1.0,
                               loose_cfg)
        gaps.append(abs(val - target))
    assert gaps[0] > gaps[1] > gaps[2]


def test_memory_limit_long_range_dependence(tight_cfg):
    a = 0.42
    spec = KernelSpec(PowerLawWeight(a), 0.5)
    probe = LongRangeDependenceProbe(0.5, 1.0, 1.0, 2.0, 1e4)
    proxy = memory_limits(spec, probe, tight_cfg)
    target = 0.5 * 1.0 * (1.0 ** (a + 2) - 0.5 ** (a + 2)) / ((a + 1) * (a + 2))
    assert proxy == pytest.approx(target, rel=0.01)


def test_memory_limit_second_difference(tight_cfg):
    a, b, s = 0.3, 1.6, 1.0
    spec = KernelSpec(PowerLawWeight(a), b)
    proxy = memory_limits(spec, SecondDifferenceProbe(s, 1e-3), tight_cfg)
    target = 2.0 ** (b - 2.0) * b * s ** (a + b - 1.0) * specfun.beta(a + 1,
                                                                      b - 1)
    assert proxy == pytest.approx(target, rel=0.02)


def test_memory_limit_small_time_variance(tight_cfg):
    b = 0.5
    spec = KernelSpec(ONE, b)
    proxy = memory_limits(spec, SmallTimeVarianceProbe(1e-4), tight_cfg)
    target = (2.0 - 2.0 ** b) / ((1.0 - b) * (1.0 + b))
    assert proxy == pytest.approx(target, rel=0.01)


def test_memory_limit_long_range_memory(tight_cfg):
    a = 0.42
    spec = KernelSpec(PowerLawWeight(a), 0.5)
    proxy = memory_limits(spec, LongRangeMemoryProbe(1.0, 2.0, 1e4), tight_cfg)
    target = oracles.quad_power_lo(lambda u: (1 - u) ** 0.5, a, 1.0) / 0.5
    assert proxy == pytest.approx(target, rel=0.01)
    # b > 1: normalized by T^(b-1); limit (b/(b-1)) int f(u)(s-u) du
    b = 1.6
    spec = KernelSpec(PowerLawWeight(a), b)
    proxy = memory_limits(spec, LongRangeMemoryProbe(1.0, 2.0, 1e4), tight_cfg)
    target = b / (b - 1.0) * oracles.quad_power_lo(lambda u: 1.0 - u, a, 1.0)
    assert proxy == pytest.approx(target, rel=0.01)


def test_memory_limit_hypothesis_violations():
    with pytest.raises(KernelError):
        memory_limits(KernelSpec(ONE, 0.5), SecondDifferenceProbe(1.0))
    with pytest.raises(KernelError):
        memory_limits(KernelSpec(ONE, 0.0),
                      LongRangeDependenceProbe(0.5, 1.0, 1.0, 2.0))
    with pytest.raises(KernelError):
        memory_limits(KernelSpec.log_kernel(ONE), SmallTimeVarianceProbe())


# ---------------------------------------------------------------------------
# representation identity and constant-f sanity
# ---------------------------------------------------------------------------

def test_representation_identity_single_point(tight_cfg):
    # R_{f,b}(s,t) = b * double integral of C_{f,b} over [0,s^t] x [0,s v t]
    b, s, t = 1.7, 1.0, 2.0
    spec = KernelSpec(PowerLawWeight(0.3), b)

    def c_fun(u, v):
        return nu_cov_values(spec, u, v)

    square = oracles.quad2d_square_diag(c_fun, s)
    rect = oracles.quad2d_rect(c_fun, ((0.0, s), (s, t)), nsplit=10)
    rhs = b * (square + rect)
    lhs = kernel_eval_quad(spec, s, t, tight_cfg)
    assert lhs == pytest.approx(rhs, abs=1e-6)


def test_constant_f_reproduces_closed_form(tight_cfg):
    # f = (1-b)^2 (1+b): (1-b)[t^(b+1)+s^(b+1)-((t+s)^(b+1)+|t-s|^(b+1))/2]
    b = 0.5
    spec = KernelSpec(ConstantWeight((1 - b) ** 2 * (1 + b)), b)
    for s in (0.5, 1.0, 2.0):
        for t in (0.5, 1.5, 3.0):
            expected = (1 - b) * (t ** (b + 1) + s ** (b + 1)
                                  - 0.5 * ((t + s) ** (b + 1)
                                           + abs(t - s) ** (b + 1)))
            assert kernel_eval_quad(spec, s, t, tight_cfg) == pytest.approx(
                expected, abs=1e-8)


def test_gram_survives_quadrature_tolerance_failures():
    from wsfbm.quadrature import QuadConfig
    grid = TimeGrid.uniform(5.0, 6)
    starved = QuadConfig(abs_tol=1e-15, rel_tol=1e-15, max_subdiv=2)
    gm = gram(KernelSpec(PowerLawWeight(0.21), 1.28), grid, method=1,
              cfg=starved)
    assert gm.quad_failures > 0
    reference = gram(KernelSpec(PowerLawWeight(0.21), 1.28), grid, method=4)
    assert np.max(np.abs(gm.entries - reference.entries)) < 1e-2
