"""Covariance kernels of the weighted sub-fractional Brownian motion family.

The scalar kernel on the positive half-line is

    R_{f,b}(s,t) = 1/(1-b) * int_0^(s^t) f(r) [(s-r)^b + (t-r)^b
                                                - (s+t-2r)^b] dr,

for a nonnegative weight f and b in [0,1) u (1,2], together with its b -> 1
limit, the log kernel

    K_f(s,t) = int_0^(s^t) f(r) [(s+t-2r)ln(s+t-2r) - (s-r)ln(s-r)
                                 - (t-r)ln(t-r)] dr,

and the derivative-process kernel C_{f,b}(s,t) = int_0^(s^t) f(u)
(s+t-2u)^(b-2) du for b in (1,2].  Weights come in three families: power law
u^a (a > -1), exponential e^(au), and positive constants.

Every kernel can be evaluated by adaptive quadrature (three engines) or in
closed form through incomplete beta / incomplete gamma / Kummer functions;
Gram matrices over a time grid are assembled from either route and validated
positive semidefinite with a bounded, recorded jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from . import specfun
from . import quadrature as quad
from .quadrature import QuadConfig, ToleranceNotReached

__all__ = [
    "PowerLawWeight", "ExponentialWeight", "ConstantWeight", "WeightFn",
    "KernelSpec", "TimeGrid", "GramMatrix", "KernelError", "PSDRepairError",
    "kernel_eval_quad", "kernel_eval_closed", "kernel_values", "nu_cov",
    "nu_cov_values", "gram", "continuity_gap", "increment_variance",
    "increment_cov", "memory_limits", "LongRangeMemoryProbe",
    "LongRangeDependenceProbe", "SecondDifferenceProbe",
    "SmallTimeVarianceProbe", "psd_cholesky", "METHOD_NAMES",
]


class KernelError(ValueError):
    pass


class PSDRepairError(RuntimeError):
    """Jitter budget exhausted while repairing a Gram matrix."""


# ---------------------------------------------------------------------------
# weight functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawWeight:
    """f(u) = u^a with a > -1 (family of power-law weights)."""

    a: float

    def __post_init__(self):
        if not self.a > -1:
            raise KernelError(f"power-law exponent must be > -1, got {self.a}")

    def __call__(self, u):
        if self.a == 0:
            return np.ones_like(np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            return np.asarray(u, dtype=float) ** self.a

    def cumulative(self, t):
        """int_0^t f(u) du."""
        t = np.asarray(t, dtype=float)
        return t ** (self.a + 1.0) / (self.a + 1.0)


@dataclass(frozen=True)
class ExponentialWeight:
    """f(u) = e^(a u) (exponential weight family; any real a)."""

    a: float

    def __call__(self, u):
        return np.exp(self.a * np.asarray(u, dtype=float))

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        if self.a == 0:
            return t.copy() if t.ndim else float(t)
        return np.expm1(self.a * t) / self.a


@dataclass(frozen=True)
class ConstantWeight:
    """f(u) = c with c > 0."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise KernelError(f"constant weight must be > 0, got {self.c}")

    def __call__(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    def cumulative(self, t):
        return self.c * np.asarray(t, dtype=float)


WeightFn = Union[PowerLawWeight, ExponentialWeight, ConstantWeight]


@dataclass(frozen=True)
class KernelSpec:
    """A kernel choice: weight plus shape.

    ``b`` in [0,1) u (1,2] selects the weighted kernel R_{f,b}; ``b=None``
    selects the log kernel K_f (the b -> 1 limit object).
    """

    weight: WeightFn
    b: float | None

    def __post_init__(self):
        if self.b is not None:
            if not (0 <= self.b < 1 or 1 < self.b <= 2):
                raise KernelError(f"b must lie in [0,1) u (1,2], got {self.b}")

    @property
    def is_log(self) -> bool:
        return self.b is None

    @classmethod
    def log_kernel(cls, weight: WeightFn) -> "KernelSpec":
        return cls(weight, None)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing grid t_0 = 0 < t_1 < ... < t_n.

    Kernel Gram matrices live on the n interior points t_1..t_n; the pinned
    t_0 = 0 coordinate (where every process in this package starts at a fixed
    value) is carried along for path bookkeeping.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise KernelError("grid needs at least t_0 = 0 and one more point")
        if pts[0] != 0.0:
            raise KernelError("grid must start at t_0 = 0")
        if np.any(np.diff(pts) <= 0):
            raise KernelError("grid points must be strictly increasing")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, horizon: float, n: int) -> "TimeGrid":
        if horizon <= 0 or n < 1:
            raise KernelError("uniform grid needs horizon > 0 and n >= 1")
        return cls(np.linspace(0.0, horizon, n + 1))

    @property
    def n(self) -> int:
        return self.points.size - 1

    @property
    def interior(self) -> np.ndarray:
        return self.points[1:]

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def horizon(self) -> float:
        return float(self.points[-1])


METHOD_NAMES = {1: "gauss_kronrod", 2: "h_adaptive", 3: "p_adaptive",
                4: "closed_form"}

_JITTER_FLOOR = 1e-12
_JITTER_CEIL_FRACTION = 1e-6


def psd_cholesky(mat: np.ndarray):
    """Cholesky factor with the package jitter policy.

    Tries the matrix as given, then adds delta*I with delta doubling from
    1e-12 until 1e-6 * trace; returns (L, jitter) or raises PSDRepairError.
    """
    try:
        return np.linalg.cholesky(mat), 0.0
    except np.linalg.LinAlgError:
        pass
    trace = float(np.trace(mat))
    budget = _JITTER_CEIL_FRACTION * trace
    # start the doubling ladder no lower than the matrix's own rounding
    # scale, so extreme-scale matrices do not need hundreds of attempts
    delta = max(_JITTER_FLOOR, np.finfo(float).eps * trace / max(mat.shape[0], 1))
    eye = np.eye(mat.shape[0])
    while delta <= budget:
        try:
            return np.linalg.cholesky(mat + delta * eye), delta
        except np.linalg.LinAlgError:
            delta *= 2.0
    raise PSDRepairError(
        f"jitter budget {budget:.3e} exhausted; matrix is not PSD-repairable")


@dataclass
class GramMatrix:
    """Symmetric PSD-validated covariance matrix on a grid's interior points."""

    entries: np.ndarray
    method: str
    jitter_applied: float = 0.0
    quad_failures: int = 0

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self._chol = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower-triangular factor of entries + jitter_applied * I (cached)."""
        if self._chol is None:
            target = self.entries
            if self.jitter_applied > 0:
                target = target + self.jitter_applied * np.eye(self.dim)
            self._chol = np.linalg.cholesky(target)
        return self._chol


# ---------------------------------------------------------------------------
# quadrature-route evaluation (Methods 1-3)
# ---------------------------------------------------------------------------

def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return out


def _weighted_integrand(spec: KernelSpec, s: float, t: float) -> Callable:
    b = spec.b
    f = spec.weight

    def integrand(u):
        return f(u) * ((s - u) ** b + (t - u) ** b - (s + t - 2.0 * u) ** b) \
            / (1.0 - b)

    return integrand


def _log_integrand(spec: KernelSpec, s: float, t: float) -> Callable:
    f = spec.weight

    def integrand(u):
        return f(u) * (_xlogx(s + t - 2.0 * u) - _xlogx(s - u) - _xlogx(t - u))

    return integrand


def _power_flag(weight: WeightFn):
    """Flag the u = 0 endpoint substitution exponent for power-law weights."""
    if isinstance(weight, PowerLawWeight) and weight.a != 0 and weight.a < 1:
        return weight.a
    return None


_ENGINES = {1: quad.integrate_1d, 2: quad.h_adaptive_1d, 3: quad.p_adaptive_1d}


def kernel_eval_quad(spec: KernelSpec, s: float, t: float,
                     cfg: QuadConfig = quad.DEFAULT_CONFIG,
                     method: int = 1) -> float:
    """Evaluate R_{f,b}(s,t) (or K_f) by numerical integration.

    ``method`` selects the engine: 1 adaptive Gauss-Kronrod, 2 h-adaptive
    Clenshaw-Curtis, 3 p-adaptive degree escalation.  Tolerance failures
    propagate as ToleranceNotReached carrying the best estimate.
    """
    if s < 0 or t < 0:
        raise KernelError("kernel arguments must be nonnegative")
    if method not in _ENGINES:
        raise KernelError(f"quadrature method must be 1, 2 or 3, got {method}")
    m = min(s, t)
    if m == 0.0:
        return 0.0
    if not spec.is_log and spec.b == 0.0:
        # bracket collapses to 1: R reduces to the running mass of f
        return float(spec.weight.cumulative(m))
    integrand = (_log_integrand if spec.is_log else _weighted_integrand)(spec, s, t)
    engine = _ENGINES[method]
    res = engine(integrand, 0.0, m, cfg, singular_lo=_power_flag(spec.weight))
    return res.value


def nu_cov(spec: KernelSpec, s: float, t: float,
           cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """Covariance C_{f,b}(s,t) of the derivative-level process, b in (1,2].

    C_{f,b}(s,t) = int_0^(s^t) f(u) (s+t-2u)^(b-2) du; the u -> s = t corner
    has an integrable singularity handled by a power substitution.
    """
    b = _require_b_above_one(spec, "nu_cov")
    if s <= 0 or t <= 0:
        return 0.0
    m = min(s, t)
    f = spec.weight

    def integrand(u):
        return f(u) * (s + t - 2.0 * u) ** (b - 2.0)

    singular_hi = (b - 2.0) if (s == t and b < 2.0) else None
    res = quad.integrate_1d(integrand, 0.0, m, cfg,
                            singular_lo=_power_flag(f), singular_hi=singular_hi)
    return res.value


def _require_b_above_one(spec, who):
    if spec.is_log or not spec.b > 1:
        raise KernelError(f"{who} requires b in (1, 2]")
    return spec.b


# ---------------------------------------------------------------------------
# closed-form evaluation (Method 4)
# ---------------------------------------------------------------------------

def _split_min_max(s_arr, t_arr):
    m = np.minimum(s_arr, t_arr)
    mm = np.maximum(s_arr, t_arr)
    return m, mm


def _closed_weighted_power(a, b, m, M):
    """Power-law closed form: incomplete-beta representation."""
    out = np.zeros_like(m)
    pos = m > 0
    if not np.any(pos):
        return out
    mp, Mp = m[pos], M[pos]
    tot = mp + Mp
    e = a + b + 1.0
    term1 = mp ** e * specfun.beta(a + 1.0, b + 1.0)
    term2 = Mp ** e * specfun.inc_beta(mp / Mp, a + 1.0, b + 1.0)
    term3 = 2.0 ** (-a - 1.0) * tot ** e * specfun.inc_beta(
        2.0 * mp / tot, a + 1.0, b + 1.0)
    out[pos] = (term1 + term2 - term3) / (1.0 - b)
    return out


def _closed_weighted_exp_pos(a, b, m, M):
    """Exponential weight, a > 0: upper-incomplete-gamma representation."""
    out = np.zeros_like(m)
    pos = m > 0
    if not np.any(pos):
        return out
    mp, Mp = m[pos], M[pos]
    g = b + 1.0
    gam = math.gamma(g)
    uig = lambda x: specfun.upper_inc_gamma(x, g)
    t1 = np.exp(a * mp) * (gam - uig(a * mp))
    t2 = np.exp(a * Mp) * (uig(a * (Mp - mp)) - uig(a * Mp))
    t3 = 2.0 ** b * np.exp(a * (Mp + mp) / 2.0) * (
        uig(a * (Mp - mp) / 2.0) - uig(a * (Mp + mp) / 2.0))
    out[pos] = (t1 + t2 - t3) / ((1.0 - b) * a ** g)
    return out


def _closed_weighted_exp_neg(a, b, m, M):
    """Exponential weight, a < 0: Kummer-function representation."""
    out = np.zeros_like(m)
    pos = m > 0
    if not np.any(pos):
        return out
    mp, Mp = m[pos], M[pos]
    g = b + 1.0
    kum = lambda z: specfun.hyp1f1(z, g, g + 1.0)
    t1 = np.exp(a * mp) * mp ** g * kum(-a * mp)
    t2 = np.exp(a * Mp) * (Mp ** g * kum(-a * Mp)
                           - (Mp - mp) ** g * kum(-a * (Mp - mp)))
    half_sum = (Mp + mp) / 2.0
    half_diff = (Mp - mp) / 2.0
    t3 = 2.0 ** b * np.exp(a * half_sum) * (
        half_sum ** g * kum(-a * half_sum) - half_diff ** g * kum(-a * half_diff))
    out[pos] = (t1 + t2 - t3) / (1.0 - b * b)
    return out


# --- log-kernel closed forms -------------------------------------------------

def _int_power_onemu_log(a: float, x: float) -> float:
    """int_0^x u^a (1-u) ln(1-u) du via the Gauss-hypergeometric identity."""
    if x <= 0:
        return 0.0
    if x >= 1.0 - 1e-12:
        return _r_const(a)
    h1 = specfun.hyp2f1(x, 1.0, a + 3.0, a + 4.0)
    h2 = specfun.hyp2f1(x, 1.0, a + 2.0, a + 3.0)
    bracket = ((a + 1.0) * x * x * h1 - (a + 3.0) * x * h2
               + (a + 3.0) * (a * (x - 1.0) + x - 2.0) * math.log1p(-x))
    return -x ** (a + 1.0) * bracket / ((a + 1.0) * (a + 2.0) * (a + 3.0))


def _r_const(a: float) -> float:
    """r_a = int_0^1 u^a (1-u) ln(1-u) du = B(a+1,2)(psi(2) - psi(a+3))."""
    return specfun.beta(a + 1.0, 2.0) * (specfun.digamma(2.0)
                                         - specfun.digamma(a + 3.0))


def _log_closed_power(a: float, s: float, t: float) -> float:
    m, M = min(s, t), max(s, t)
    if m <= 0:
        return 0.0
    tot = m + M
    x2 = 2.0 * m / tot
    x1 = m / M
    i2 = specfun.inc_beta(x2, a + 1.0, 2.0)
    i1 = specfun.inc_beta(x1, a + 1.0, 2.0)
    term_sum = 2.0 ** (-a - 1.0) * tot ** (a + 2.0) * (
        math.log(tot) * i2 + _int_power_onemu_log(a, x2))
    term_max = M ** (a + 2.0) * (math.log(M) * i1 + _int_power_onemu_log(a, x1))
    term_min = m ** (a + 2.0) * (math.log(m) * specfun.beta(a + 1.0, 2.0)
                                 + _r_const(a))
    return term_sum - term_max - term_min


def _int_exp_onemu(alpha: float, x: float) -> float:
    """int_0^x e^(alpha u) (1-u) du (elementary; series guard near alpha=0)."""
    if abs(alpha) < 1e-8:
        return x - 0.5 * x * x + alpha * (x * x / 2.0 - x ** 3 / 3.0)
    return (math.exp(alpha * x) * (alpha * (1.0 - x) + 1.0)
            - (1.0 + alpha)) / (alpha * alpha)


def _gamma2_const(alpha: float) -> float:
    """gamma_2(alpha) = int_0^1 e^(alpha u)(1-u) ln(1-u) du."""
    if alpha > 0:
        e1 = specfun.upper_inc_gamma(alpha, 0.0)
        return -(math.exp(alpha)
                 * (e1 + specfun.EULER_GAMMA - 1.0 + math.log(alpha)
                    + math.exp(-alpha)) / (alpha * alpha))
    minus_ei = -specfun.exp_integral_ei(-alpha)
    return -(math.exp(alpha)
             * (minus_ei + specfun.EULER_GAMMA - 1.0 + math.log(-alpha)
                + math.exp(-alpha)) / (alpha * alpha))


def _int_exp_onemu_log(alpha: float, x: float) -> float:
    """int_0^x e^(alpha u) (1-u) ln(1-u) du (exponential-integral identity)."""
    if x <= 0:
        return 0.0
    if x >= 1.0 - 1e-12:
        return _gamma2_const(alpha)
    head = math.exp(alpha * x) * ((alpha * (1.0 - x) + 1.0) * math.log1p(-x)
                                  + 1.0)
    if alpha > 0:
        tail = (math.exp(alpha) * specfun.upper_inc_gamma(alpha * (1.0 - x), 0.0)
                - 1.0 - math.exp(alpha) * specfun.upper_inc_gamma(alpha, 0.0))
    else:
        g = (specfun.exp_integral_ei(-alpha)
             - specfun.exp_integral_ei(alpha * (x - 1.0)))
        tail = math.exp(alpha) * g - 1.0
    return (head + tail) / (alpha * alpha)


def _log_closed_exp(a: float, s: float, t: float) -> float:
    m, M = min(s, t), max(s, t)
    if m <= 0:
        return 0.0
    tot = m + M
    x2 = 2.0 * m / tot
    x1 = m / M
    term_sum = 0.5 * tot ** 2 * (
        math.log(tot) * _int_exp_onemu(a * tot / 2.0, x2)
        + _int_exp_onemu_log(a * tot / 2.0, x2))
    term_max = M ** 2 * (math.log(M) * _int_exp_onemu(a * M, x1)
                         + _int_exp_onemu_log(a * M, x1))
    am = a * m
    gamma1 = _int_exp_onemu(am, 1.0)
    term_min = m ** 2 * (math.log(m) * gamma1 + _gamma2_const(am))
    return term_sum - term_max - term_min


def kernel_eval_closed(spec: KernelSpec, s: float, t: float) -> float:
    """Evaluate the kernel through its special-function representation."""
    if s < 0 or t < 0:
        raise KernelError("kernel arguments must be nonnegative")
    if min(s, t) == 0:
        return 0.0
    weight = spec.weight
    scale = 1.0
    if isinstance(weight, ConstantWeight):
        scale, weight = weight.c, PowerLawWeight(0.0)
    if isinstance(weight, ExponentialWeight) and weight.a == 0:
        weight = PowerLawWeight(0.0)

    if spec.is_log:
        if isinstance(weight, PowerLawWeight):
            return scale * _log_closed_power(weight.a, s, t)
        if isinstance(weight, ExponentialWeight):
            return scale * _log_closed_exp(weight.a, s, t)
        raise KernelError(f"no closed form for weight {weight!r}")

    b = spec.b
    sa = np.asarray([float(s)])
    ta = np.asarray([float(t)])
    m, mm = _split_min_max(sa, ta)
    if b == 0.0:
        return scale * float(weight.cumulative(min(s, t)))
    if isinstance(weight, PowerLawWeight):
        return scale * float(_closed_weighted_power(weight.a, b, m, mm)[0])
    if isinstance(weight, ExponentialWeight):
        if weight.a > 0:
            return scale * float(_closed_weighted_exp_pos(weight.a, b, m, mm)[0])
        return scale * float(_closed_weighted_exp_neg(weight.a, b, m, mm)[0])
    raise KernelError(f"no closed form for weight {weight!r}")


# ---------------------------------------------------------------------------
# vectorized pairwise evaluation
# ---------------------------------------------------------------------------

_GK_X = quad._GK_NODES
_GK_W = quad._GK_WEIGHTS


@lru_cache(maxsize=None)
def _composite_rule(power_exponent=None):
    """Composite Gauss-Kronrod nodes/weights on (0,1), graded at both ends.

    When ``power_exponent`` a in (-1, 1) is given, the substitution
    v = eta^q with q = 2/(1+a) is folded in: the transformed integrand of a
    u^a-weighted kernel integral behaves like eta * smooth(eta), so the
    fixed rule keeps full accuracy down to the singular endpoint.
    """
    right = [1.0 - 2.0 ** (-j) for j in range(2, 23)]
    edges = np.array([0.0, 1 / 64, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 3 / 8, 1 / 2,
                      5 / 8, 3 / 4] + right + [1.0])
    nodes, weights = [], []
    for a_edge, b_edge in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b_edge - a_edge)
        mid = 0.5 * (a_edge + b_edge)
        nodes.append(mid + half * _GK_X)
        weights.append(half * _GK_W)
    eta = np.concatenate(nodes)
    w = np.concatenate(weights)
    if power_exponent is not None:
        q = 2.0 / (1.0 + power_exponent)
        v = eta ** q
        w = w * q * eta ** (q - 1.0)
        return v, w
    return eta, w


def _pairwise_quad(spec: KernelSpec, s_arr, t_arr, chunk: int = 20000):
    """Fixed-rule composite quadrature of the kernel integral, vectorized
    over pairs.  Used where many thousands of kernel values are needed at
    once (log-kernel Gram matrices, process covariance cells)."""
    s_arr = np.asarray(s_arr, dtype=float)
    t_arr = np.asarray(t_arr, dtype=float)
    m, mm = _split_min_max(s_arr.ravel(), t_arr.ravel())
    out = np.zeros_like(m)
    exponent = None
    if isinstance(spec.weight, PowerLawWeight) and spec.weight.a != 0:
        exponent = spec.weight.a if spec.weight.a < 1 else None
    v, w = _composite_rule(exponent)
    f = spec.weight
    b = spec.b
    pos = np.nonzero(m > 0)[0]
    for start in range(0, pos.size, chunk):
        idx = pos[start:start + chunk]
        u = m[idx, None] * v[None, :]
        lo = m[idx, None]
        hi = mm[idx, None]
        with np.errstate(all="ignore"):
            if spec.is_log:
                vals = f(u) * (_xlogx(lo + hi - 2.0 * u) - _xlogx(lo - u)
                               - _xlogx(hi - u))
            else:
                vals = f(u) * ((lo - u) ** b + (hi - u) ** b
                               - (lo + hi - 2.0 * u) ** b) / (1.0 - b)
        np.nan_to_num(vals, copy=False)
        out[idx] = m[idx] * (vals @ w)
    return out.reshape(s_arr.shape) if s_arr.shape else float(out[0])


def kernel_values(spec: KernelSpec, s_arr, t_arr):
    """Vectorized kernel evaluation over pair arrays.

    Dispatches to the closed forms where they exist (weighted kernels over
    the three families) and to fixed-rule composite quadrature for the log
    kernel.
    """
    s_arr = np.asarray(s_arr, dtype=float)
    t_arr = np.asarray(t_arr, dtype=float)
    if spec.is_log:
        return _pairwise_quad(spec, s_arr, t_arr)
    weight = spec.weight
    scale = 1.0
    if isinstance(weight, ConstantWeight):
        scale, weight = weight.c, PowerLawWeight(0.0)
    if isinstance(weight, ExponentialWeight) and weight.a == 0:
        weight = PowerLawWeight(0.0)
    m, mm = _split_min_max(s_arr.ravel(), t_arr.ravel())
    b = spec.b
    if b == 0.0:
        vals = weight.cumulative(m)
    elif isinstance(weight, PowerLawWeight):
        vals = _closed_weighted_power(weight.a, b, m, mm)
    elif weight.a > 0:
        vals = _closed_weighted_exp_pos(weight.a, b, m, mm)
    else:
        vals = _closed_weighted_exp_neg(weight.a, b, m, mm)
    vals = scale * vals
    return vals.reshape(s_arr.shape) if s_arr.shape else float(vals[0])


def nu_cov_values(spec: KernelSpec, s_arr, t_arr):
    """Vectorized C_{f,b} over pair arrays (closed forms), b in (1,2]."""
    b = _require_b_above_one(spec, "nu_cov_values")
    s_arr = np.asarray(s_arr, dtype=float)
    t_arr = np.asarray(t_arr, dtype=float)
    m, mm = _split_min_max(s_arr.ravel(), t_arr.ravel())
    out = np.zeros_like(m)
    pos = m > 0
    weight = spec.weight
    scale = 1.0
    if isinstance(weight, ConstantWeight):
        scale, weight = weight.c, PowerLawWeight(0.0)
    if isinstance(weight, ExponentialWeight) and weight.a == 0:
        weight = PowerLawWeight(0.0)
    if np.any(pos):
        mp, Mp = m[pos], mm[pos]
        tot = mp + Mp
        if isinstance(weight, PowerLawWeight):
            a = weight.a
            out[pos] = (2.0 ** (-a - 1.0) * tot ** (a + b - 1.0)
                        * specfun.inc_beta(2.0 * mp / tot, a + 1.0, b - 1.0))
        else:
            a = weight.a
            g = b - 1.0
            if a > 0:
                uig = lambda x: specfun.upper_inc_gamma(x, g)
                out[pos] = (2.0 ** (b - 2.0) * np.exp(a * tot / 2.0)
                            * a ** (-g)
                            * (uig(a * (tot / 2.0 - mp)) - uig(a * tot / 2.0)))
            else:
                # int_0^x e^(alpha u)(1-u)^(b-2) du via the Kummer identity
                kum = lambda z: specfun.hyp1f1(z, g, g + 1.0)
                alpha = a * tot / 2.0
                x = 2.0 * mp / tot
                inner = (np.exp(alpha) / g) * (
                    kum(-alpha) - (1.0 - x) ** g * kum(alpha * (x - 1.0)))
                out[pos] = 0.5 * tot ** (b - 1.0) * inner
    out *= scale
    return out.reshape(s_arr.shape) if s_arr.shape else float(out[0])


# ---------------------------------------------------------------------------
# Gram assembly
# ---------------------------------------------------------------------------

def gram(spec: KernelSpec, grid: TimeGrid, method: int = 1,
         cfg: QuadConfig = quad.DEFAULT_CONFIG) -> GramMatrix:
    """Covariance matrix M[i][j] = kernel(t_i, t_j) on the grid's interior.

    Only the lower triangle is computed and mirrored.  The result is
    PSD-validated with the jitter ladder; tolerance failures in quadrature
    entries are survived (best estimate used) and counted.
    """
    if method not in METHOD_NAMES:
        raise KernelError(f"method must be 1..4, got {method}")
    tt = grid.interior
    n = tt.size
    mat = np.zeros((n, n))
    failures = 0
    if method == 4:
        if spec.is_log:
            for i in range(n):
                for j in range(i + 1):
                    mat[i, j] = kernel_eval_closed(spec, tt[i], tt[j])
        else:
            ii, jj = np.tril_indices(n)
            mat[ii, jj] = kernel_values(spec, tt[ii], tt[jj])
    else:
        for i in range(n):
            for j in range(i + 1):
                try:
                    mat[i, j] = kernel_eval_quad(spec, tt[i], tt[j], cfg, method)
                except ToleranceNotReached as exc:
                    mat[i, j] = exc.result.value
                    failures += 1
    mat = mat + np.tril(mat, -1).T
    gm = GramMatrix(mat, METHOD_NAMES[method], quad_failures=failures)
    _validate_psd(gm)
    return gm


def _validate_psd(gm: GramMatrix):
    chol, jitter = psd_cholesky(gm.entries)
    gm.jitter_applied = jitter
    gm._chol = chol if jitter == 0.0 else None  # re-factor lazily with jitter


def gram_fast(spec: KernelSpec, grid: TimeGrid) -> GramMatrix:
    """Gram matrix through the vectorized evaluators.

    Same values as ``gram`` with the best method per shape (closed forms for
    the weighted kernels, fixed-rule composite Gauss-Kronrod for the log
    kernel), assembled in a few array operations; used by the samplers.
    """
    tt = grid.interior
    n = tt.size
    ii, jj = np.tril_indices(n)
    mat = np.zeros((n, n))
    if spec.is_log:
        mat[ii, jj] = _pairwise_quad(spec, tt[ii], tt[jj])
        label = METHOD_NAMES[1]
    else:
        mat[ii, jj] = kernel_values(spec, tt[ii], tt[jj])
        label = METHOD_NAMES[4]
    mat = mat + np.tril(mat, -1).T
    gm = GramMatrix(mat, label)
    _validate_psd(gm)
    return gm


# ---------------------------------------------------------------------------
# continuity, increments, memory behavior
# ---------------------------------------------------------------------------

def _quad_best(integrand, lo, hi, cfg, **flags):
    """integrate_1d that falls back to the best estimate on tolerance failure.

    Used by increment/memory probes whose integrands carry second-difference
    rounding noise below very tight tolerances.
    """
    try:
        return quad.integrate_1d(integrand, lo, hi, cfg, **flags).value
    except ToleranceNotReached as exc:
        return exc.result.value


def continuity_gap(weight: WeightFn, b: float, s: float, t: float,
                   cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """|R_{f,b}(s,t) - K_f(s,t)|: the gap closed by the b -> 1 limit."""
    r = kernel_eval_quad(KernelSpec(weight, b), s, t, cfg)
    k = kernel_eval_quad(KernelSpec.log_kernel(weight), s, t, cfg)
    return abs(r - k)


def increment_variance(spec: KernelSpec, s: float, t: float,
                       cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """E(zeta_t - zeta_s)^2 for s < t by the cancellation-free two-term split.

    First term integrates f(u)(t-u)^b over [s, t]; the second integrates
    f(u)[2(t+s-2u)^b - 2^b(t-u)^b - 2^b(s-u)^b] over [0, s].
    """
    if spec.is_log:
        raise KernelError("increment_variance implemented for weighted kernels")
    if not 0 <= s < t:
        raise KernelError("need 0 <= s < t")
    b = spec.b
    f = spec.weight
    if b == 0.0:
        return float(f.cumulative(t) - f.cumulative(s))
    flag = _power_flag(f) if s == 0.0 else None
    term1 = _quad_best(lambda u: f(u) * (t - u) ** b, s, t, cfg,
                       singular_lo=flag)
    term1 *= (2.0 - 2.0 ** b) / (1.0 - b)
    if s == 0.0:
        return term1
    two_b = 2.0 ** b

    def integrand(u):
        return f(u) * (2.0 * (t + s - 2.0 * u) ** b - two_b * (t - u) ** b
                       - two_b * (s - u) ** b)

    term2 = _quad_best(integrand, 0.0, s, cfg,
                       singular_lo=_power_flag(f)) / (1.0 - b)
    return term1 + term2


def increment_cov(spec: KernelSpec, r: float, nu: float, p: float, q: float,
                  cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """E[(zeta_nu - zeta_r)(zeta_q - zeta_p)] for 0 <= r < nu <= p < q.

    Grouped so the large-argument cancellation happens inside the integrand
    (second differences of x^b), keeping far-apart increment covariances
    accurate at horizons ~1e4.
    """
    if spec.is_log:
        raise KernelError("increment_cov implemented for weighted kernels")
    if not (0 <= r < nu <= p < q):
        raise KernelError("need 0 <= r < nu <= p < q")
    b = spec.b
    if b == 0.0:
        return 0.0  # independent increments of the time-changed Brownian case
    f = spec.weight

    def g1(u):
        return ((q - u) ** b - (p - u) ** b
                - (nu + q - 2.0 * u) ** b + (nu + p - 2.0 * u) ** b)

    def g2(u):
        return ((r + q - 2.0 * u) ** b - (r + p - 2.0 * u) ** b
                - (nu + q - 2.0 * u) ** b + (nu + p - 2.0 * u) ** b)

    total = _quad_best(lambda u: f(u) * g1(u), r, nu, cfg)
    if r > 0:
        total += _quad_best(lambda u: f(u) * g2(u), 0.0, r, cfg,
                            singular_lo=_power_flag(f))
    return total / (1.0 - b)


@dataclass(frozen=True)
class LongRangeMemoryProbe:
    """Finite-horizon proxy for the long-range memory limits."""

    s: float
    t: float
    horizon: float = 1e4


@dataclass(frozen=True)
class LongRangeDependenceProbe:
    """Proxy T^(2-b) cov of increments [r,nu] and [s+T, t+T]."""

    r: float
    nu: float
    s: float
    t: float
    horizon: float = 1e4


@dataclass(frozen=True)
class SecondDifferenceProbe:
    """Small-step ratio E(zeta_{s+eps}-zeta_s)^2 / eps^2 (b > 1 regime)."""

    s: float
    eps: float = 1e-3


@dataclass(frozen=True)
class SmallTimeVarianceProbe:
    """Small-time ratio E(zeta_eps^2) / eps^(1+b)."""

    eps: float = 1e-4


def memory_limits(spec: KernelSpec, probe,
                  cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """Numerically evaluated left-hand sides of the memory-limit statements.

    Returns the finite-T or finite-eps proxy for comparison against the
    closed-form limits; raises KernelError when the kernel is outside the
    hypotheses of the probed statement.
    """
    if isinstance(probe, LongRangeMemoryProbe):
        if spec.is_log:
            raise KernelError("long-range memory probe needs a weighted kernel")
        val = kernel_eval_quad(spec, probe.s, probe.t + probe.horizon, cfg)
        if spec.b > 1:
            return val / probe.horizon ** (spec.b - 1.0)
        return val
    if isinstance(probe, LongRangeDependenceProbe):
        if spec.is_log or spec.b == 0.0:
            raise KernelError("long-range dependence probe needs b in (0,1) u (1,2]")
        cov = increment_cov(spec, probe.r, probe.nu,
                            probe.s + probe.horizon, probe.t + probe.horizon, cfg)
        return probe.horizon ** (2.0 - spec.b) * cov
    if isinstance(probe, SecondDifferenceProbe):
        _require_b_above_one(spec, "second-difference probe")
        return increment_variance(spec, probe.s, probe.s + probe.eps, cfg) \
            / probe.eps ** 2
    if isinstance(probe, SmallTimeVarianceProbe):
        if spec.is_log:
            raise KernelError("small-time variance probe needs a weighted kernel")
        b = spec.b
        eps = probe.eps
        if b == 0.0:
            return float(spec.weight.cumulative(eps)) / eps
        f = spec.weight
        integral = _quad_best(lambda u: f(u) * (eps - u) ** b, 0.0, eps,
                              cfg, singular_lo=_power_flag(f))
        return (2.0 - 2.0 ** b) / (1.0 - b) * integral / eps ** (1.0 + b)
    raise KernelError(f"unknown probe {probe!r}")
