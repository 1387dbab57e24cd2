"""Self-contained special functions backing the closed-form kernel evaluations.

Everything here is implemented from series / continued fractions on top of
``math`` and ``numpy`` only: beta and incomplete beta, upper incomplete gamma
(including the b=0 exponential-integral case), Kummer and Gauss hypergeometric
functions, the exponential integral Ei, and the modified Bessel function of
the second kind.  Functions whose first argument is a point of evaluation
(``inc_beta``, ``upper_inc_gamma``, ``hyp1f1``) accept either a float or a
numpy array there; parameters are scalars.

All routines are pure and hold no global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015328606065120900824024
_ZETA3 = 1.2020569031595942853997381615114500
_FPMIN = 1e-300


class SpecFunDomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


class SpecFunConvergenceError(RuntimeError):
    """Series or continued fraction failed to converge within max_terms."""


@dataclass(frozen=True)
class SpecFunConfig:
    series_tol: float = 1e-12
    max_terms: int = 10000

    def __post_init__(self):
        if self.series_tol <= 0:
            raise SpecFunDomainError("series_tol must be > 0")
        if self.max_terms < 1:
            raise SpecFunDomainError("max_terms must be >= 1")


DEFAULT_CONFIG = SpecFunConfig()


def _as_array(x):
    """Return (array, was_scalar) for a float-or-array argument."""
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


# ---------------------------------------------------------------------------
# beta family
# ---------------------------------------------------------------------------

def beta(a: float, b: float) -> float:
    """Euler beta function B(a, b) = Gamma(a) Gamma(b) / Gamma(a+b)."""
    if a <= 0 or b <= 0:
        raise SpecFunDomainError(f"beta requires a, b > 0, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def _betacf(a, b, x, cfg):
    """Continued fraction for the incomplete beta (modified Lentz).

    ``x`` is an ndarray on the convergent side x < (a+1)/(a+b+2).
    Elements that have converged are retired from the working set, so the
    iteration cost tracks the slowest entries only.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    out = np.empty_like(x)
    live = np.arange(x.size)
    xw = x.copy()
    c = np.ones_like(xw)
    d = 1.0 - qab * xw / qap
    np.copyto(d, _FPMIN, where=np.abs(d) < _FPMIN)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, cfg.max_terms + 1):
        m2 = 2 * m
        aa = m * (b - m) * xw / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        np.copyto(d, _FPMIN, where=np.abs(d) < _FPMIN)
        c = 1.0 + aa / c
        np.copyto(c, _FPMIN, where=np.abs(c) < _FPMIN)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * xw / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        np.copyto(d, _FPMIN, where=np.abs(d) < _FPMIN)
        c = 1.0 + aa / c
        np.copyto(c, _FPMIN, where=np.abs(c) < _FPMIN)
        d = 1.0 / d
        delt = d * c
        h *= delt
        done = np.abs(delt - 1.0) < cfg.series_tol
        if np.all(done):
            out[live] = h
            return out
        if m % 4 == 0 and np.count_nonzero(done) > done.size // 4:
            out[live[done]] = h[done]
            keep = ~done
            live, xw, c, d, h = live[keep], xw[keep], c[keep], d[keep], h[keep]
    raise SpecFunConvergenceError("incomplete beta continued fraction stalled")


def inc_beta(x, a: float, b: float, cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Unregularized incomplete beta IB(x; a, b) = int_0^x u^(a-1) (1-u)^(b-1) du."""
    if a <= 0 or b <= 0:
        raise SpecFunDomainError(f"inc_beta requires a, b > 0, got ({a}, {b})")
    xa, scalar = _as_array(x)
    if np.any((xa < 0) | (xa > 1)):
        raise SpecFunDomainError("inc_beta requires x in [0, 1]")
    out = np.empty_like(xa)
    bfun = beta(a, b)
    direct = xa < (a + 1.0) / (a + b + 2.0)
    interior = (xa > 0) & (xa < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = direct & interior
        if np.any(m):
            xs = xa[m]
            front = np.exp(a * np.log(xs) + b * np.log1p(-xs))
            out[m] = front * _betacf(a, b, xs, cfg) / a
        m = (~direct) & interior
        if np.any(m):
            xs = xa[m]
            front = np.exp(a * np.log(xs) + b * np.log1p(-xs))
            out[m] = bfun - front * _betacf(b, a, 1.0 - xs, cfg) / b
    out[xa == 0] = 0.0
    out[xa == 1] = bfun
    return _ret(out, scalar)


def betainc_reg(x, a: float, b: float, cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Regularized incomplete beta I_x(a, b) = IB(x; a, b) / B(a, b)."""
    return inc_beta(x, a, b, cfg) / beta(a, b)


# ---------------------------------------------------------------------------
# incomplete gamma / exponential integrals
# ---------------------------------------------------------------------------

def _gamma_lower_series(x, b, cfg):
    """Unregularized lower incomplete gamma by series, for x < b + 1."""
    out = np.empty_like(x)
    live = np.arange(x.size)
    xw = x.copy()
    term = np.full_like(xw, 1.0 / b)
    total = term.copy()
    ap = b
    for m in range(1, cfg.max_terms + 1):
        ap += 1.0
        term = term * xw / ap
        total += term
        done = np.abs(term) <= cfg.series_tol * np.maximum(np.abs(total), _FPMIN)
        if np.all(done):
            out[live] = total
            break
        if m % 8 == 0 and np.count_nonzero(done) > done.size // 4:
            out[live[done]] = total[done]
            keep = ~done
            live, xw, term, total = live[keep], xw[keep], term[keep], total[keep]
    else:
        raise SpecFunConvergenceError("lower incomplete gamma series stalled")
    with np.errstate(divide="ignore"):
        return out * np.exp(-x + b * np.log(x))


def _gamma_upper_cf(x, b, cfg):
    """Upper incomplete gamma by continued fraction, for x >= b + 1 (b >= 0)."""
    out = np.empty_like(x)
    live = np.arange(x.size)
    xw = x.copy()
    b0 = xw + 1.0 - b
    c = np.full_like(xw, 1.0 / _FPMIN)
    d = 1.0 / b0
    h = d.copy()
    for i in range(1, cfg.max_terms + 1):
        an = -i * (i - b)
        b0 = b0 + 2.0
        d = an * d + b0
        np.copyto(d, _FPMIN, where=np.abs(d) < _FPMIN)
        c = b0 + an / c
        np.copyto(c, _FPMIN, where=np.abs(c) < _FPMIN)
        d = 1.0 / d
        delt = d * c
        h *= delt
        done = np.abs(delt - 1.0) < cfg.series_tol
        if np.all(done):
            out[live] = h
            break
        if i % 8 == 0 and np.count_nonzero(done) > done.size // 4:
            out[live[done]] = h[done]
            keep = ~done
            live, xw, b0, c, d, h = (live[keep], xw[keep], b0[keep], c[keep],
                                     d[keep], h[keep])
    else:
        raise SpecFunConvergenceError(
            "upper incomplete gamma continued fraction stalled")
    with np.errstate(divide="ignore"):
        return out * np.exp(-x + b * np.log(x)) if b != 0 else out * np.exp(-x)


def _e1_series(x, cfg):
    """E1(x) for 0 < x <= 1 via the alternating series."""
    total = -EULER_GAMMA - np.log(x)
    term = np.ones_like(x)
    for n in range(1, cfg.max_terms + 1):
        term = term * (-x) / n
        total = total - term / n
        if np.max(np.abs(term / n)) < cfg.series_tol:
            return total
    raise SpecFunConvergenceError("E1 series stalled")


def upper_inc_gamma(x, b: float, cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Upper incomplete gamma Gamma(x; b) = int_x^inf u^(b-1) e^(-u) du.

    Requires x >= 0 and b >= 0.  For b = 0 this is the exponential integral
    E1(x), which diverges at x = 0, so x > 0 is required there.
    """
    if b < 0:
        raise SpecFunDomainError("upper_inc_gamma requires b >= 0")
    xa, scalar = _as_array(x)
    if np.any(xa < 0):
        raise SpecFunDomainError("upper_inc_gamma requires x >= 0")
    if b == 0 and np.any(xa == 0):
        raise SpecFunDomainError("Gamma(0; 0) diverges (E1 at x = 0)")
    out = np.empty_like(xa)
    zero = xa == 0.0
    if np.any(zero):
        out[zero] = math.gamma(b)
    small = (~zero) & (xa < b + 1.0)
    if np.any(small):
        if b == 0:
            out[small] = _e1_series(xa[small], cfg)
        else:
            out[small] = math.gamma(b) - _gamma_lower_series(xa[small], b, cfg)
    large = (~zero) & (xa >= b + 1.0)
    if np.any(large):
        out[large] = _gamma_upper_cf(xa[large], b, cfg)
    return _ret(out, scalar)


def exp_integral_ei(x: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Exponential integral Ei(x) (principal value for x > 0).

    Uses the reflection Ei(x) = -E1(-x) for x < 0, the ascending series
    gamma + ln x + sum x^n/(n n!) for moderate x > 0, and the asymptotic
    expansion e^x/x sum k!/x^k for large x.
    """
    if x == 0:
        raise SpecFunDomainError("Ei is singular at x = 0")
    if x < 0:
        return -float(upper_inc_gamma(-x, 0.0, cfg))
    if x <= 40.0:
        total = EULER_GAMMA + math.log(x)
        term = 1.0
        for n in range(1, cfg.max_terms + 1):
            term *= x / n
            delta = term / n
            total += delta
            if abs(delta) < cfg.series_tol * abs(total):
                return total
        raise SpecFunConvergenceError("Ei series stalled")
    # asymptotic branch: truncate at the smallest term
    total = 1.0
    term = 1.0
    for k in range(1, cfg.max_terms + 1):
        nxt = term * k / x
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        if abs(term) < cfg.series_tol * abs(total):
            break
    return math.exp(x) / x * total


# ---------------------------------------------------------------------------
# hypergeometric functions
# ---------------------------------------------------------------------------

def hyp1f1(x, a: float, b: float, cfg: SpecFunConfig = DEFAULT_CONFIG):
    """Kummer confluent hypergeometric M(a, b, x) = sum (a)_n x^n / ((b)_n n!).

    For negative x the Kummer transformation M(a,b,x) = e^x M(b-a, b, -x) is
    applied so every series summed has positive terms (no cancellation).
    """
    if a <= 0 or b <= a:
        raise SpecFunDomainError(f"hyp1f1 requires 0 < a < b, got ({a}, {b})")
    xa, scalar = _as_array(x)
    out = np.empty_like(xa)
    neg = xa < 0
    if np.any(neg):
        out[neg] = np.exp(xa[neg]) * _kummer_series(-xa[neg], b - a, b, cfg)
    if np.any(~neg):
        out[~neg] = _kummer_series(xa[~neg], a, b, cfg)
    return _ret(out, scalar)


def _kummer_series(x, a, b, cfg):
    out = np.empty_like(x)
    live = np.arange(x.size)
    xw = x.copy()
    total = np.ones_like(xw)
    term = np.ones_like(xw)
    for n in range(cfg.max_terms):
        term = term * (a + n) * xw / ((b + n) * (n + 1.0))
        total += term
        done = np.abs(term) < cfg.series_tol * np.maximum(np.abs(total), _FPMIN)
        if np.all(done):
            out[live] = total
            return out
        if n % 8 == 7 and np.count_nonzero(done) > done.size // 4:
            out[live[done]] = total[done]
            keep = ~done
            live, xw, term, total = live[keep], xw[keep], term[keep], total[keep]
    raise SpecFunConvergenceError("Kummer series stalled (|x| too large?)")


def hyp2f1(x: float, a: float, b: float, c: float,
           cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Gauss hypergeometric 2F1(a, b; c; x) for 0 <= x < 1 by direct series."""
    if not (0 <= x < 1):
        raise SpecFunDomainError("hyp2f1 requires 0 <= x < 1")
    if b <= 0 or c < b:
        raise SpecFunDomainError(f"hyp2f1 requires b > 0 and c >= b, got ({b}, {c})")
    total = 1.0
    term = 1.0
    tail_factor = max(1.0, x / (1.0 - x))  # geometric tail bound, ratio -> x
    for n in range(cfg.max_terms):
        term *= (a + n) * (b + n) * x / ((c + n) * (n + 1.0))
        total += term
        if abs(term) * tail_factor < cfg.series_tol * abs(total):
            return total
    raise SpecFunConvergenceError(
        f"2F1 series needs more than {cfg.max_terms} terms at x = {x}")


# ---------------------------------------------------------------------------
# modified Bessel function of the second kind
# ---------------------------------------------------------------------------

def _temme_gammas(mu):
    """Temme's Gamma-combination coefficients for the small-x K_nu series.

    gampl = 1/Gamma(1+mu), gammi = 1/Gamma(1-mu),
    gam1 = (gammi - gampl) / (2 mu)  (-> -euler_gamma as mu -> 0),
    gam2 = (gammi + gampl) / 2.
    """
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    if abs(mu) > 1e-4:
        gam1 = (gammi - gampl) / (2.0 * mu)
    else:
        g3 = (EULER_GAMMA ** 3 - EULER_GAMMA * math.pi ** 2 / 2.0 + 2.0 * _ZETA3) / 6.0
        gam1 = -EULER_GAMMA - g3 * mu * mu
    gam2 = (gammi + gampl) / 2.0
    return gam1, gam2, gampl, gammi


def bessel_k(kappa: float, x: float, cfg: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Modified Bessel function of the second kind K_kappa(x), kappa > 0, x > 0.

    Temme's series for x < 2 and Steed's continued fraction for x >= 2, with
    upward recurrence in the order.  Signals OverflowError when the result
    exceeds the floating range (x near 0 with large kappa).
    """
    if x <= 0 or kappa <= 0:
        raise SpecFunDomainError("bessel_k requires kappa > 0 and x > 0")
    n = int(kappa + 0.5)
    mu = kappa - n  # |mu| <= 1/2
    if x < 2.0:
        kmu, knu1 = _bessel_k_temme(mu, x, cfg)
    else:
        kmu, knu1 = _bessel_k_cf2(mu, x, cfg)
    # upward recurrence K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu
    for i in range(n):
        kmu, knu1 = knu1, kmu + 2.0 * (mu + i + 1.0) / x * knu1
    if not math.isfinite(kmu):
        raise OverflowError(f"bessel_k overflow at kappa={kappa}, x={x}")
    return kmu


def _bessel_k_temme(mu, x, cfg):
    half_x = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
    d = -math.log(half_x)
    e = mu * d
    fact2 = 1.0 if abs(e) < 1e-15 else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    ee = math.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = 1.0
    d2 = half_x * half_x
    total1 = p
    for i in range(1, cfg.max_terms + 1):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d2 / i
        p /= (i - mu)
        q /= (i + mu)
        delt = c * ff
        total += delt
        delt1 = c * (p - i * ff)
        total1 += delt1
        if abs(delt) < abs(total) * cfg.series_tol:
            return total, total1 * (2.0 / x)
    raise SpecFunConvergenceError("bessel_k Temme series stalled")


def _bessel_k_cf2(mu, x, cfg):
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu2
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, cfg.max_terms + 1):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (a * d + b)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < cfg.series_tol:
            h = a1 * h
            kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
            knu1 = kmu * (mu + x + 0.5 - h) / x
            return kmu, knu1
    raise SpecFunConvergenceError("bessel_k continued fraction stalled")


# ---------------------------------------------------------------------------
# digamma (internal; needed for log-kernel closed-form constants)
# ---------------------------------------------------------------------------

def digamma(x: float) -> float:
    """Digamma psi(x) for x > 0 via recurrence plus asymptotic series."""
    if x <= 0:
        raise SpecFunDomainError("digamma implemented for x > 0 only")
    result = 0.0
    while x < 10.0:
        result -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    result += (math.log(x) - 0.5 * inv
               - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0
                         - inv2 * (1.0 / 240.0 - inv2 / 132.0)))))
    return result
