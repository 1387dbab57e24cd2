"""Gaussian likelihood, maximum-likelihood fitting of the weight/shape
parameters (a, b), profile-deviance confidence intervals, AIC, and
conditional (kriging) prediction.

The parameter space is a in the family's domain and b in [0, 2], with b = 1
mapped to the log kernel so the likelihood is continuous across the shape
boundary.  Fitting runs a coarse grid search over the admissible rectangle
followed by Nelder-Mead refinement; deviance-based confidence intervals are
found by bisection on each side of the estimate, profiling out the other
parameter with a bounded scalar optimizer.

Covariance matrices are cached per (family, a, b, grid): the coarse-grid
cells keep their inverse and log-determinant so repeated fits on the same
grid (e.g. replicate studies) pay the assembly cost once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels, specfun
from . import quadrature as quad
from .kernels import (ExponentialWeight, KernelSpec, PowerLawWeight,
                      TimeGrid, psd_cholesky)
from .processes import _path_rng

__all__ = [
    "Dataset", "FitResult", "PredictionResult", "InferenceError", "GramCache",
    "FAMILIES", "family_spec", "loglik", "fit_mle", "profile_ci", "aic",
    "predict", "mse", "chi2_quantile_1df", "DEFAULT_BOUNDS",
]

_LOG_2PI = math.log(2.0 * math.pi)

FAMILIES = ("C1", "C2")

# search rectangles: (a_lo, a_hi); b always spans [0, 2]
DEFAULT_BOUNDS = {"C1": (-0.9, 3.0), "C2": (-3.0, 3.0)}


class InferenceError(ValueError):
    pass


@dataclass
class Dataset:
    """Observations of a zero-start process on a time grid."""

    grid: TimeGrid
    observations: np.ndarray

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        if self.observations.size != self.grid.points.size:
            raise InferenceError("observations must align with the grid")
        if abs(self.observations[0]) > 1e-12:
            raise InferenceError("zero-start process: observation at t_0 must be 0")

    @classmethod
    def from_path(cls, path) -> "Dataset":
        return cls(path.grid, path.values)

    @property
    def interior_obs(self) -> np.ndarray:
        return self.observations[1:]


@dataclass
class FitResult:
    family: str
    a_hat: float
    b_hat: float
    loglik: float
    aic: float
    ci_a: tuple
    ci_b: tuple
    profile_a: np.ndarray
    profile_b: np.ndarray
    convergence: bool
    k: int = 2


@dataclass
class PredictionResult:
    times: np.ndarray
    mean: np.ndarray
    cond_sd: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    n_sims: int


def family_spec(family: str, a: float, b: float) -> KernelSpec:
    """Kernel for family parameters; b near 1 selects the log kernel.

    The snap window (|b - 1| < 1e-6) keeps the likelihood continuous across
    the shape boundary while staying clear of the weighted closed forms'
    1/(1-b) cancellation; the kernel gap across the window is O(1e-6).
    """
    if family == "C1":
        weight = PowerLawWeight(a)
    elif family == "C2":
        weight = ExponentialWeight(a)
    else:
        raise InferenceError(f"unknown family {family!r} (use 'C1' or 'C2')")
    if abs(b - 1.0) < 1e-6:
        return KernelSpec.log_kernel(weight)
    return KernelSpec(weight, b)


def _build_cov(family: str, a: float, b: float, tt: np.ndarray) -> np.ndarray:
    spec = family_spec(family, a, b)
    if spec.is_log:
        ii, jj = np.tril_indices(tt.size)
        mat = np.zeros((tt.size, tt.size))
        mat[ii, jj] = kernels._pairwise_quad(spec, tt[ii], tt[jj])
        return mat + np.tril(mat, -1).T
    ii, jj = np.tril_indices(tt.size)
    mat = np.zeros((tt.size, tt.size))
    mat[ii, jj] = kernels.kernel_values(spec, tt[ii], tt[jj])
    return mat + np.tril(mat, -1).T


class GramCache:
    """Cache of factorized covariance matrices keyed by (family, a, b, grid).

    Cells stored through ``store=True`` (the coarse-grid stage) keep the
    covariance inverse and log-determinant so later fits on the same grid
    reuse them; ad-hoc optimizer points are solved directly and not kept.
    """

    def __init__(self):
        self._store: dict = {}

    def _key(self, family, a, b, tt):
        return (family, float(a), float(b), tt.shape[0], float(tt[0]),
                float(tt[-1]))

    def quad_form(self, family, a, b, tt, x, store=False):
        """Return (logdet, x' Sigma^-1 x) for the covariance at (a, b)."""
        key = self._key(family, a, b, tt)
        hit = self._store.get(key)
        if hit is not None:
            logdet, inv = hit
            return logdet, float(x @ (inv @ x))
        cov = _build_cov(family, a, b, tt)
        chol, jitter = psd_cholesky(cov)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        if store:
            if jitter:
                cov = cov + jitter * np.eye(cov.shape[0])
            inv = np.linalg.inv(cov)
            self._store[key] = (logdet, inv)
            return logdet, float(x @ (inv @ x))
        alpha = np.linalg.solve(chol, x)
        return logdet, float(alpha @ alpha)

    def clear(self):
        self._store.clear()


def loglik(data: Dataset, family: str, a: float, b: float,
           cfg: quad.QuadConfig = quad.DEFAULT_CONFIG,
           cache: GramCache | None = None, store: bool = False) -> float:
    """Zero-mean Gaussian log-density of the observations at (a, b).

    The pinned t_0 = 0 observation (zero variance) is excluded.  ``cfg`` is
    accepted for interface uniformity; covariance entries use the closed
    forms with a fixed-rule quadrature fallback for the log kernel.
    """
    _check_params(family, a, b)
    tt = data.grid.interior
    x = data.interior_obs
    cache = cache if cache is not None else GramCache()
    logdet, quad_form = cache.quad_form(family, a, b, tt, x, store=store)
    n = x.size
    return -0.5 * (n * _LOG_2PI + logdet + quad_form)


def _check_params(family, a, b):
    if family not in FAMILIES:
        raise InferenceError(f"unknown family {family!r}")
    if family == "C1" and not a > -1:
        raise InferenceError("family C1 needs a > -1")
    if not 0.0 <= b <= 2.0:
        raise InferenceError("b must lie in [0, 2]")


# ---------------------------------------------------------------------------
# optimization machinery (self-contained, deterministic)
# ---------------------------------------------------------------------------

def _nelder_mead(fn, x0, step, max_evals=120, xtol=2e-3, ftol=2e-4):
    """Maximize fn over R^2 (fn returns -inf outside its domain)."""
    pts = [np.asarray(x0, dtype=float)]
    pts.append(pts[0] + np.array([step[0], 0.0]))
    pts.append(pts[0] + np.array([0.0, step[1]]))
    vals = [fn(p) for p in pts]
    evals = len(pts)
    while evals < max_evals:
        order = np.argsort(vals)[::-1]  # descending: best first
        pts = [pts[i] for i in order]
        vals = [vals[i] for i in order]
        spread = max(np.max(np.abs(pts[0] - pts[1])),
                     np.max(np.abs(pts[0] - pts[2])))
        if spread < xtol and abs(vals[0] - vals[2]) < ftol:
            break
        centroid = 0.5 * (pts[0] + pts[1])
        worst = pts[2]
        refl = centroid + (centroid - worst)
        f_refl = fn(refl)
        evals += 1
        if f_refl > vals[0]:
            expand = centroid + 2.0 * (centroid - worst)
            f_exp = fn(expand)
            evals += 1
            if f_exp > f_refl:
                pts[2], vals[2] = expand, f_exp
            else:
                pts[2], vals[2] = refl, f_refl
        elif f_refl > vals[1]:
            pts[2], vals[2] = refl, f_refl
        else:
            contract = centroid + 0.5 * (worst - centroid)
            f_con = fn(contract)
            evals += 1
            if f_con > vals[2]:
                pts[2], vals[2] = contract, f_con
            else:  # shrink toward the best vertex
                for i in (1, 2):
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                    vals[i] = fn(pts[i])
                    evals += 1
    order = np.argsort(vals)[::-1]
    best = order[0]
    converged = evals < max_evals
    return pts[best], vals[best], converged


def _brent_max(fn, lo, hi, tol=1e-4, max_evals=40):
    """Golden-section maximization of fn on [lo, hi] (deterministic)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    evals = 2
    while abs(b - a) > tol and evals < max_evals:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        evals += 1
    return (c, fc) if fc > fd else (d, fd)


def chi2_quantile_1df(level: float) -> float:
    """Quantile of chi-square with 1 degree of freedom, by bisection on the
    regularized incomplete gamma."""
    if not 0.0 < level < 1.0:
        raise InferenceError("level must be in (0, 1)")
    sqrt_pi = math.sqrt(math.pi)

    def cdf(x):
        return 1.0 - specfun.upper_inc_gamma(x / 2.0, 0.5) / sqrt_pi

    lo, hi = 0.0, 1.0
    while cdf(hi) < level:
        hi *= 2.0
        if hi > 1e6:
            raise InferenceError("chi-square quantile bisection diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < level:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _penalized_ll(data, family, cache, bounds):
    a_lo, a_hi = bounds

    def fn(theta):
        a, b = float(theta[0]), float(theta[1])
        if not (a_lo <= a <= a_hi and 0.0 <= b <= 2.0):
            return -math.inf
        return loglik(data, family, a, b, cache=cache)

    return fn


def fit_mle(data: Dataset, family: str, *, fix_b: float | None = None,
            bounds: tuple | None = None, grid_shape: tuple = (21, 21),
            ci_level: float = 0.95, compute_ci: bool = True,
            cache: GramCache | None = None,
            nm_max_evals: int = 120) -> FitResult:
    """Maximum-likelihood fit of (a, b) over the chosen weight family.

    Coarse grid search over the admissible rectangle (cached across calls
    sharing a ``GramCache``), then Nelder-Mead refinement.  ``fix_b`` pins
    the shape (k = 1 parameter); non-convergence is flagged, never raised.
    """
    if data.grid.n < 20:
        raise InferenceError("fit needs at least 20 observations")
    cache = cache if cache is not None else GramCache()
    bounds = bounds if bounds is not None else DEFAULT_BOUNDS[family]
    a_lo, a_hi = bounds
    obs = data.interior_obs
    if np.all(obs == 0.0):
        nan = float("nan")
        return FitResult(family, nan, fix_b if fix_b is not None else nan,
                         -math.inf, math.inf, (nan, nan), (nan, nan),
                         np.empty((0, 2)), np.empty((0, 2)),
                         convergence=False, k=1 if fix_b is not None else 2)
    tt = data.grid.interior

    if fix_b is not None:
        a_grid = np.linspace(a_lo, a_hi, grid_shape[0])
        lls = [loglik(data, family, ag, fix_b, cache=cache, store=True)
               for ag in a_grid]
        best = int(np.argmax(lls))
        lo = a_grid[max(best - 1, 0)]
        hi = a_grid[min(best + 1, a_grid.size - 1)]
        a_hat, ll = _brent_max(
            lambda av: loglik(data, family, av, fix_b, cache=cache),
            lo, hi, tol=1e-5, max_evals=60)
        fit = FitResult(family, float(a_hat), float(fix_b), float(ll),
                        2.0 * 1 - 2.0 * ll, (math.nan, math.nan),
                        (fix_b, fix_b), np.empty((0, 2)), np.empty((0, 2)),
                        convergence=True, k=1)
        if compute_ci:
            fit.ci_a = profile_ci(data, fit, "a", ci_level, cache=cache,
                                  bounds=bounds)
        return fit

    a_grid = np.linspace(a_lo, a_hi, grid_shape[0])
    b_grid = np.linspace(0.0, 2.0, grid_shape[1])
    ll_grid = np.full((a_grid.size, b_grid.size), -np.inf)
    for i, ag in enumerate(a_grid):
        for j, bg in enumerate(b_grid):
            ll_grid[i, j] = loglik(data, family, ag, bg, cache=cache,
                                   store=True)
    i0, j0 = np.unravel_index(np.argmax(ll_grid), ll_grid.shape)
    start = np.array([a_grid[i0], b_grid[j0]])
    step = np.array([(a_hi - a_lo) / (a_grid.size - 1),
                     2.0 / (b_grid.size - 1)]) * 0.5
    fn = _penalized_ll(data, family, cache, bounds)
    theta, ll, converged = _nelder_mead(fn, start, step,
                                        max_evals=nm_max_evals)
    fit = FitResult(family, float(theta[0]), float(theta[1]), float(ll),
                    2.0 * 2 - 2.0 * ll, (math.nan, math.nan),
                    (math.nan, math.nan), np.empty((0, 2)), np.empty((0, 2)),
                    convergence=bool(converged), k=2)
    if compute_ci and fit.convergence:
        fit.ci_a = profile_ci(data, fit, "a", ci_level, cache=cache,
                              bounds=bounds)
        fit.ci_b = profile_ci(data, fit, "b", ci_level, cache=cache,
                              bounds=bounds)
    return fit


def _profile_value(data, family, which, theta, other_start, cache, bounds,
                   window):
    """Profile log-likelihood at ``theta``: maximize over the other param."""
    a_lo, a_hi = bounds
    if which == "a":
        dlo, dhi = 0.0, 2.0

        def fn(other):
            return loglik(data, family, theta, other, cache=cache)
    else:
        dlo, dhi = a_lo, a_hi

        def fn(other):
            return loglik(data, family, other, theta, cache=cache)
    lo = max(dlo, other_start - window)
    hi = min(dhi, other_start + window)
    if hi <= lo:
        return fn(max(lo, min(hi, other_start))), other_start
    other, val = _brent_max(fn, lo, hi, tol=4e-3, max_evals=10)
    if min(other - lo, hi - other) < 0.02 * (hi - lo):
        # optimum pinned at the window edge: recenter once and retry
        lo2 = max(dlo, other - window)
        hi2 = min(dhi, other + window)
        other, val = _brent_max(fn, lo2, hi2, tol=4e-3, max_evals=10)
    return val, other


def profile_ci(data: Dataset, fit: FitResult, which: str, level: float = 0.95,
               cache: GramCache | None = None, bounds: tuple | None = None
               ) -> tuple:
    """Deviance-based confidence interval for one parameter.

    The interval is {theta : 2(ll_hat - profile_ll(theta)) <= chi2_1(level)},
    located by stepping outward from the estimate and bisecting the deviance
    crossing on each side.  Hitting the domain edge emits a warning and
    clamps the endpoint there.  Profile evaluations are appended to the
    fit's profile curve for the parameter.
    """
    if which not in ("a", "b"):
        raise InferenceError("which must be 'a' or 'b'")
    if not fit.convergence:
        raise InferenceError("profile_ci needs a converged fit")
    cache = cache if cache is not None else GramCache()
    bounds = bounds if bounds is not None else DEFAULT_BOUNDS[fit.family]
    if fit.k == 1 and which == "b":
        return (fit.b_hat, fit.b_hat)
    q = chi2_quantile_1df(level)
    ll_hat = fit.loglik
    theta_hat = fit.a_hat if which == "a" else fit.b_hat
    if which == "a":
        domain = bounds
        other_hat = fit.b_hat
    else:
        domain = (0.0, 2.0)
        other_hat = fit.a_hat
    window = 0.18
    curve = []

    def deviance(theta, other_start):
        if fit.k == 1:
            ll = loglik(data, fit.family, theta, fit.b_hat, cache=cache)
            other = other_start
        else:
            ll, other = _profile_value(data, fit.family, which, theta,
                                       other_start, cache, bounds, window)
        curve.append((theta, ll))
        return 2.0 * (ll_hat - ll), other

    result = []
    for direction in (-1.0, 1.0):
        edge = domain[0] if direction < 0 else domain[1]
        step = max(0.02, 0.05 * abs(theta_hat))
        inner = theta_hat
        other_start = other_hat
        outer = None
        for _ in range(14):
            candidate = inner + direction * step
            if (candidate - edge) * direction >= 0:
                dev, _ = deviance(edge, other_start)
                if dev <= q:
                    warnings.warn(
                        f"{which}-interval reached the domain edge {edge}",
                        RuntimeWarning)
                    result.append(edge)
                    outer = "edge"
                    break
                outer = edge
                break
            dev, other_start = deviance(candidate, other_start)
            if dev > q:
                outer = candidate
                break
            inner = candidate
            step *= 1.7
        if outer == "edge":
            continue
        if outer is None:  # never crossed inside the domain
            warnings.warn(
                f"{which}-interval reached the domain edge {edge}",
                RuntimeWarning)
            result.append(edge)
            continue
        lo_pt, hi_pt = (outer, inner) if direction < 0 else (inner, outer)
        for _ in range(8):
            mid = 0.5 * (lo_pt + hi_pt)
            dev, other_start = deviance(mid, other_start)
            crossing_right = dev > q if direction > 0 else dev <= q
            if crossing_right:
                hi_pt = mid
            else:
                lo_pt = mid
        result.append(0.5 * (lo_pt + hi_pt))
    curve_arr = np.array(sorted(curve)) if curve else np.empty((0, 2))
    if which == "a":
        fit.profile_a = curve_arr
    else:
        fit.profile_b = curve_arr
    return (min(result), max(result))


def aic(fit: FitResult) -> float:
    """Akaike information criterion 2k - 2 loglik of a converged fit."""
    if not fit.convergence:
        raise InferenceError("aic needs a converged fit")
    return 2.0 * fit.k - 2.0 * fit.loglik


# ---------------------------------------------------------------------------
# conditional prediction
# ---------------------------------------------------------------------------

def predict(data: Dataset, fit: FitResult, horizon_times, n_sims: int,
            seed: int) -> PredictionResult:
    """Conditional Gaussian prediction on strictly later horizon points.

    Returns the kriging mean, per-point conditional standard deviation, and
    a simulated central 95% band from ``n_sims`` conditional draws.
    """
    horizon = np.asarray(horizon_times, dtype=float).ravel()
    if horizon.size == 0:
        return PredictionResult(horizon, np.empty(0), np.empty(0),
                                np.empty(0), np.empty(0), n_sims)
    t_obs = data.grid.interior
    if np.min(horizon) <= t_obs[-1]:
        raise InferenceError("horizon times must exceed observed times")
    joint = np.concatenate([t_obs, horizon])
    cov = _build_cov(fit.family, fit.a_hat, fit.b_hat, joint)
    n = t_obs.size
    s11 = cov[:n, :n]
    s21 = cov[n:, :n]
    s22 = cov[n:, n:]
    chol, jitter = psd_cholesky(s11)
    x = data.interior_obs
    alpha = np.linalg.solve(chol, x)
    w = np.linalg.solve(chol, s21.T)          # chol^-1 s12
    mean = w.T @ alpha
    cond = s22 - w.T @ w
    cond = 0.5 * (cond + cond.T)
    var = np.clip(np.diag(cond), 0.0, None)
    sd = np.sqrt(var)
    if n_sims > 0:
        cchol, _ = psd_cholesky(cond + 1e-12 * np.eye(cond.shape[0]))
        sims = np.empty((n_sims, horizon.size))
        for sid in range(n_sims):
            z = _path_rng(seed, sid).standard_normal(horizon.size)
            sims[sid] = mean + cchol @ z
        lo = np.quantile(sims, 0.025, axis=0)
        hi = np.quantile(sims, 0.975, axis=0)
    else:
        lo = mean - 1.959963984540054 * sd
        hi = mean + 1.959963984540054 * sd
    return PredictionResult(horizon, mean, sd, lo, hi, n_sims)


def mse(pred, actual) -> float:
    """Mean squared difference of two equal-length vectors."""
    p = np.asarray(pred, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.size != a.size:
        raise InferenceError(f"length mismatch: {p.size} vs {a.size}")
    diff = p - a
    return float(diff @ diff) / p.size
