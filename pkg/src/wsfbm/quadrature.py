"""Adaptive numerical integration engines for 1-D and 2-D integrals.

Three strategies are provided, mirroring how the covariance integrals are
evaluated elsewhere in the package:

* ``integrate_1d`` -- globally adaptive 7-15 Gauss-Kronrod with
  largest-error-first interval subdivision, optionally accelerated by Wynn's
  epsilon algorithm applied to the sequence of running totals.
* ``h_adaptive_1d`` / ``integrate_2d(method_2d="h_adaptive")`` -- adaptive
  subdivision with embedded Clenshaw-Curtis panels.
* ``p_adaptive_1d`` / ``integrate_2d(method_2d="p_adaptive")`` -- degree
  escalation of (tensor) Clenshaw-Curtis rules on the whole domain.

Integrands are evaluated on numpy arrays of nodes.  Integrable power-law
endpoint singularities u^g with g in (-1, 0) can be flagged by the caller
(``singular_lo`` / ``singular_hi``), in which case the substitution
u = v^(1/(1+g)) is applied on that side; the substitution is exact for the
flagged power and leaves smooth factors smooth.

All routines are pure and deterministic: identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadConfig", "QuadResult", "QuadratureError", "NaNIntegrandError",
    "ToleranceNotReached", "integrate_1d", "integrate_2d",
    "h_adaptive_1d", "p_adaptive_1d",
]


class QuadratureError(RuntimeError):
    pass


class NaNIntegrandError(QuadratureError):
    """The integrand returned NaN at an interior quadrature node."""


class ToleranceNotReached(QuadratureError):
    """Raised when the error target was not met; carries the best estimate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdiv: int = 200
    wynn_epsilon: bool = False
    method_2d: str = "h_adaptive"

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.max_subdiv < 1:
            raise ValueError("max_subdiv must be >= 1")
        if self.method_2d not in ("h_adaptive", "p_adaptive"):
            raise ValueError("method_2d must be 'h_adaptive' or 'p_adaptive'")


DEFAULT_CONFIG = QuadConfig()


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_estimate: float
    subdivisions_used: int
    converged: bool = True


# 7-15 Gauss-Kronrod nodes and weights on [-1, 1] (QUADPACK qk15 constants).
_XGK = np.array([
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993945, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0,
])
_WGK = np.array([
    0.02293532201052922, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552592, 0.1690047266392679, 0.19035057806478542,
    0.20443294007529889, 0.20948214108472782,
])
_WG = np.array([
    0.1294849661688697, 0.2797053914892766,
    0.3818300505051189, 0.4179591836734694,
])

_GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])          # 15 ascending
_GK_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_G7_WEIGHTS = np.zeros(15)
_G7_WEIGHTS[1:-1:2] = np.concatenate([_WG[:-1], [_WG[-1]], _WG[-2::-1]])


@lru_cache(maxsize=None)
def _cc_rule(n):
    """Clenshaw-Curtis nodes (ascending) and weights on [-1, 1], n odd.

    Weights are obtained from exactness on the Chebyshev basis: solve
    T w = mu with T[k, j] = T_k(x_j) and mu_k = int_-1^1 T_k.
    """
    j = np.arange(n)
    x = np.cos(np.pi * j / (n - 1))
    k = np.arange(n)
    tmat = np.cos(np.outer(k, np.pi * j / (n - 1)))
    mu = np.zeros(n)
    even = k % 2 == 0
    mu[even] = 2.0 / (1.0 - k[even] ** 2.0 + (k[even] == 1))
    w = np.linalg.solve(tmat, mu)
    order = np.argsort(x)
    # pull nodes off the endpoints so integrable endpoint singularities stay
    # evaluable; the O(1e-9) shift is far below the rules' error estimates
    return x[order] * (1.0 - 1e-9), w[order]


def _substituted(f, lo, hi, singular_lo, singular_hi):
    """Fold endpoint power-law substitutions into (f, lo, hi).

    A flag g in (-1, 0) at an endpoint applies u = endpoint -+ v^p with
    p = 1/(1+g); both endpoints flagged splits the interval at its midpoint.
    """
    if singular_lo is not None and singular_hi is not None:
        mid = 0.5 * (lo + hi)
        f1, a1, b1 = _substituted(f, lo, mid, singular_lo, None)
        f2, a2, b2 = _substituted(f, mid, hi, None, singular_hi)
        return (f1, a1, b1), (f2, a2, b2)
    if singular_lo is not None:
        g = singular_lo
        if not -1.0 < g < 1.0:
            raise ValueError("singular exponent must be in (-1, 1)")
        p = 1.0 / (1.0 + g)

        def fsub(v, _f=f, _lo=lo, _p=p):
            return _p * v ** (_p - 1.0) * _f(_lo + v ** _p)

        return fsub, 0.0, (hi - lo) ** (1.0 / p)
    if singular_hi is not None:
        g = singular_hi
        if not -1.0 < g < 1.0:
            raise ValueError("singular exponent must be in (-1, 1)")
        p = 1.0 / (1.0 + g)

        def fsub(v, _f=f, _hi=hi, _p=p):
            return _p * v ** (_p - 1.0) * _f(_hi - v ** _p)

        return fsub, 0.0, (hi - lo) ** (1.0 / p)
    return f, lo, hi


def _gk_panel(f, a, b):
    """Return (I15, |I15 - I7|) for one Gauss-Kronrod panel on [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    with np.errstate(all="ignore"):
        fx = np.asarray(f(mid + half * _GK_NODES), dtype=float)
    if fx.shape != _GK_NODES.shape:
        raise QuadratureError("integrand must map an array of nodes to values")
    if np.any(np.isnan(fx)):
        raise NaNIntegrandError(f"integrand returned NaN on [{a}, {b}]")
    i15 = half * float(fx @ _GK_WEIGHTS)
    i7 = half * float(fx @ _G7_WEIGHTS)
    return i15, abs(i15 - i7)


def _wynn_epsilon(seq):
    """Wynn's epsilon extrapolation of a sequence; returns (value, err_proxy)."""
    cur = list(seq)
    prev = [0.0] * (len(seq) + 1)
    best = cur[-1]
    prev_best = cur[-2] if len(cur) > 1 else cur[-1]
    col = 0
    while len(cur) >= 2:
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0.0:
                return cur[i + 1], 0.0
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        col += 1
        if col % 2 == 0 and cur:
            prev_best, best = best, cur[-1]
    return best, abs(best - prev_best)


def integrate_1d(integrand, lo: float, hi: float, cfg: QuadConfig = DEFAULT_CONFIG,
                 *, singular_lo: float | None = None,
                 singular_hi: float | None = None) -> QuadResult:
    """Adaptive Gauss-Kronrod integration of ``integrand`` over [lo, hi].

    Subdivides the interval with the largest error estimate until
    |error| <= max(abs_tol, rel_tol * |value|).  Raises ToleranceNotReached
    (carrying the best estimate) if max_subdiv bisections are exhausted, and
    NaNIntegrandError if the integrand produces NaN.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    pieces = _substituted(integrand, lo, hi, singular_lo, singular_hi)
    if isinstance(pieces[0], tuple):  # both endpoints flagged: two sub-problems
        total, err, subs, ok = 0.0, 0.0, 0, True
        for fp, ap, bp in pieces:
            sub_cfg = cfg
            try:
                r = _adaptive_gk(fp, ap, bp, sub_cfg)
            except ToleranceNotReached as exc:
                r = exc.result
                ok = False
            total += r.value
            err += r.err_estimate
            subs += r.subdivisions_used
        result = QuadResult(total, err, subs, ok)
        if not ok:
            raise ToleranceNotReached("tolerance not reached", result)
        return result
    f, a, b = pieces
    return _adaptive_gk(f, a, b, cfg)


def _adaptive_gk(f, lo, hi, cfg):
    value, err = _gk_panel(f, lo, hi)
    # heap of (-err, tiebreak, a, b, value, err); tiebreak keeps it deterministic
    counter = 0
    heap = [(-err, counter, lo, hi, value, err)]
    total = value
    total_err = err
    history = [total]
    subdivisions = 0
    while total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        if subdivisions >= cfg.max_subdiv:
            return _finish_gk(total, total_err, subdivisions, cfg, history,
                              converged=False)
        neg_err, _, a, b, v, e = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        v1, e1 = _gk_panel(f, a, mid)
        v2, e2 = _gk_panel(f, mid, b)
        total += (v1 + v2) - v
        total_err += (e1 + e2) - e
        counter += 1
        heapq.heappush(heap, (-e1, counter, a, mid, v1, e1))
        counter += 1
        heapq.heappush(heap, (-e2, counter, mid, b, v2, e2))
        subdivisions += 1
        history.append(total)
    return _finish_gk(total, total_err, subdivisions, cfg, history, converged=True)


def _finish_gk(total, total_err, subdivisions, cfg, history, converged):
    if cfg.wynn_epsilon and len(history) >= 4:
        extrap, eerr = _wynn_epsilon(history)
        if math.isfinite(extrap) and eerr < total_err:
            total, total_err = extrap, eerr
            converged = converged or total_err <= max(cfg.abs_tol,
                                                      cfg.rel_tol * abs(total))
    result = QuadResult(total, total_err, subdivisions, converged)
    if not converged:
        raise ToleranceNotReached(
            f"GK subdivision budget exhausted (err={total_err:.3e})", result)
    return result


# ---------------------------------------------------------------------------
# Clenshaw-Curtis engines (h-adaptive subdivision and p-adaptive escalation)
# ---------------------------------------------------------------------------

def _zero_nonfinite(fx):
    """Closed rules touch domain endpoints, where integrable singularities
    evaluate non-finite; those nodes are dropped (their weight share vanishes
    under subdivision / escalation)."""
    if not np.all(np.isfinite(fx)):
        fx = np.where(np.isfinite(fx), fx, 0.0)
    return fx


def _cc_raw_1d(f, a, b):
    x9, w9 = _cc_rule(9)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    with np.errstate(all="ignore"):
        fx = np.asarray(f(mid + half * x9), dtype=float)
    fx = _zero_nonfinite(fx)
    return half * float(fx @ w9)


def _cc_panel_1d(f, a, b):
    """(refined value, error estimate) with the parent-vs-children signal.

    Comparing a panel's rule value against the sum over its two halves sees
    h-convergence directly; embedded same-node differences can agree while
    both are wrong near derivative kinks.
    """
    mid = 0.5 * (a + b)
    parent = _cc_raw_1d(f, a, b)
    left = _cc_raw_1d(f, a, mid)
    right = _cc_raw_1d(f, mid, b)
    refined = left + right
    return refined, abs(parent - refined)


def h_adaptive_1d(integrand, lo: float, hi: float,
                  cfg: QuadConfig = DEFAULT_CONFIG,
                  *, singular_lo: float | None = None,
                  singular_hi: float | None = None) -> QuadResult:
    """Interval-subdividing Clenshaw-Curtis integration."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    pieces = _substituted(integrand, lo, hi, singular_lo, singular_hi)
    if isinstance(pieces[0], tuple):
        (f1, a1, b1), (f2, a2, b2) = pieces
        r1 = h_adaptive_1d(f1, a1, b1, cfg)
        r2 = h_adaptive_1d(f2, a2, b2, cfg)
        return QuadResult(r1.value + r2.value,
                          r1.err_estimate + r2.err_estimate,
                          r1.subdivisions_used + r2.subdivisions_used, True)
    f, a, b = pieces
    value, err = _cc_panel_1d(f, a, b)
    counter = 0
    heap = [(-err, counter, a, b, value, err)]
    total, total_err = value, err
    subdivisions = 0
    while total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        if subdivisions >= cfg.max_subdiv:
            result = QuadResult(total, total_err, subdivisions, False)
            raise ToleranceNotReached("CC subdivision budget exhausted", result)
        _, _, aa, bb, v, e = heapq.heappop(heap)
        mid = 0.5 * (aa + bb)
        v1, e1 = _cc_panel_1d(f, aa, mid)
        v2, e2 = _cc_panel_1d(f, mid, bb)
        total += (v1 + v2) - v
        total_err += (e1 + e2) - e
        counter += 1
        heapq.heappush(heap, (-e1, counter, aa, mid, v1, e1))
        counter += 1
        heapq.heappush(heap, (-e2, counter, mid, bb, v2, e2))
        subdivisions += 1
    return QuadResult(total, total_err, subdivisions, True)


def p_adaptive_1d(integrand, lo: float, hi: float,
                  cfg: QuadConfig = DEFAULT_CONFIG,
                  *, singular_lo: float | None = None,
                  singular_hi: float | None = None) -> QuadResult:
    """Degree-escalating Clenshaw-Curtis on the whole interval.

    Doubles the rule (5, 9, 17, ..., 2049 points) until two consecutive
    estimates agree within tolerance.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    pieces = _substituted(integrand, lo, hi, singular_lo, singular_hi)
    if isinstance(pieces[0], tuple):
        (f1, a1, b1), (f2, a2, b2) = pieces
        r1 = p_adaptive_1d(f1, a1, b1, cfg)
        r2 = p_adaptive_1d(f2, a2, b2, cfg)
        return QuadResult(r1.value + r2.value,
                          r1.err_estimate + r2.err_estimate,
                          r1.subdivisions_used + r2.subdivisions_used, True)
    f, a, b = pieces
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    prev = None
    prev_diff = None
    n = 5
    for level in range(12):
        x, w = _cc_rule(n)
        with np.errstate(all="ignore"):
            fx = np.asarray(f(mid + half * x), dtype=float)
        fx = _zero_nonfinite(fx)
        val = half * float(fx @ w)
        if prev is not None:
            err = abs(val - prev)
            tol = max(cfg.abs_tol, cfg.rel_tol * abs(val))
            # two consecutive small differences: low-order rules can agree
            # by accident on kinked integrands before settling
            if err <= tol and prev_diff is not None and prev_diff <= 50 * tol:
                return QuadResult(val, err, level, True)
            prev_diff = err
        prev = val
        n = 2 * n - 1
    result = QuadResult(prev, abs(val - prev), 12, False)
    raise ToleranceNotReached("CC degree escalation did not converge", result)


# ---------------------------------------------------------------------------
# 2-D integration over rectangles
# ---------------------------------------------------------------------------

def _cc_raw_2d(f, rect):
    (a1, b1), (a2, b2) = rect
    x9, w9 = _cc_rule(9)
    hx, mx = 0.5 * (b1 - a1), 0.5 * (a1 + b1)
    hy, my = 0.5 * (b2 - a2), 0.5 * (a2 + b2)
    gx = mx + hx * x9
    gy = my + hy * x9
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    with np.errstate(all="ignore"):
        fx = np.asarray(f(xx.ravel(), yy.ravel()), dtype=float).reshape(9, 9)
    fx = _zero_nonfinite(fx)
    return hx * hy * float(w9 @ fx @ w9)


def _split_2d(rect):
    (a1, b1), (a2, b2) = rect
    if (b1 - a1) >= (b2 - a2):  # split the longer side
        mid = 0.5 * (a1 + b1)
        return ((a1, mid), (a2, b2)), ((mid, b1), (a2, b2))
    mid = 0.5 * (a2 + b2)
    return ((a1, b1), (a2, mid)), ((a1, b1), (mid, b2))


def _cc_panel_2d(f, rect):
    """(refined value, error estimate): parent rule vs two-child refinement."""
    parent = _cc_raw_2d(f, rect)
    c1, c2 = _split_2d(rect)
    refined = _cc_raw_2d(f, c1) + _cc_raw_2d(f, c2)
    return refined, abs(parent - refined)


def integrate_2d(integrand, rect, cfg: QuadConfig = DEFAULT_CONFIG) -> QuadResult:
    """Integrate ``integrand(x, y)`` (vectorized) over a rectangle.

    ``rect`` is ((lo1, hi1), (lo2, hi2)).  Dispatches between a
    subdivision-based strategy and tensor Clenshaw-Curtis degree escalation
    according to ``cfg.method_2d``.
    """
    (a1, b1), (a2, b2) = rect
    if not (a1 < b1 and a2 < b2):
        raise ValueError("degenerate rectangle")
    if cfg.method_2d == "p_adaptive":
        return _p_adaptive_2d(integrand, rect, cfg)
    return _h_adaptive_2d(integrand, rect, cfg)


def _h_adaptive_2d(f, rect, cfg):
    value, err = _cc_panel_2d(f, rect)
    counter = 0
    heap = [(-err, counter, rect, value, err)]
    total, total_err = value, err
    subdivisions = 0
    while total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        if subdivisions >= cfg.max_subdiv:
            result = QuadResult(total, total_err, subdivisions, False)
            raise ToleranceNotReached("2-D subdivision budget exhausted", result)
        _, _, r, v, e = heapq.heappop(heap)
        children = _split_2d(r)
        total -= v
        total_err -= e
        for child in children:
            cv, ce = _cc_panel_2d(f, child)
            total += cv
            total_err += ce
            counter += 1
            heapq.heappush(heap, (-ce, counter, child, cv, ce))
        subdivisions += 1
    return QuadResult(total, total_err, subdivisions, True)


def _p_adaptive_2d(f, rect, cfg):
    (a1, b1), (a2, b2) = rect
    hx, mx = 0.5 * (b1 - a1), 0.5 * (a1 + b1)
    hy, my = 0.5 * (b2 - a2), 0.5 * (a2 + b2)
    prev = None
    prev_diff = None
    n = 5
    for level in range(9):
        x, w = _cc_rule(n)
        gx = mx + hx * x
        gy = my + hy * x
        xx, yy = np.meshgrid(gx, gy, indexing="ij")
        with np.errstate(all="ignore"):
            fx = np.asarray(f(xx.ravel(), yy.ravel()), dtype=float).reshape(n, n)
        fx = _zero_nonfinite(fx)
        val = hx * hy * float(w @ fx @ w)
        if prev is not None:
            err = abs(val - prev)
            tol = max(cfg.abs_tol, cfg.rel_tol * abs(val))
            if err <= tol and prev_diff is not None and prev_diff <= 50 * tol:
                return QuadResult(val, err, level, True)
            prev_diff = err
        prev = val
        n = 2 * n - 1
    result = QuadResult(prev, abs(val - prev), 9, False)
    raise ToleranceNotReached("2-D degree escalation did not converge", result)
