"""d-dimensional kernel generalizations: set-distance weighted kernels,
the shell-volume kernel with its closed forms, and stationary kernels.

For a ball A and points x, y outside it, the integration domain of the
weighted kernels is the shell {u : 0 < A_u <= A_x ^ A_y}, where
A_x = dist(x, A).  Shell integrals are computed in polar (d = 2) or
spherical (d = 3) coordinates: the radial direction is handled by adaptive
quadrature and the angular directions by fixed-order rules (trapezoid over
the periodic angle, Gauss-Legendre over the polar cosine).  In d = 1 the
shell is the union of two intervals, one on each side of the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import quadrature as quad
from . import specfun
from .quadrature import QuadConfig

__all__ = [
    "SetGeometry", "RadialPowerWeight", "RadialExponentialWeight",
    "RdWeightFn", "Matern", "DoubleExp", "RationalQuadratic", "Periodic",
    "StationaryKernel", "RdKernelError", "set_distance", "c_af", "k_haf",
    "stationary_eval", "mixed_cov",
]

_ANGULAR_ORDER = 256     # trapezoid points over the periodic angle
_POLAR_ORDER = 48        # Gauss-Legendre points over cos(polar angle)


class RdKernelError(ValueError):
    pass


@dataclass(frozen=True)
class SetGeometry:
    """A closed ball B(center, radius): the only set family implemented.

    Every concrete d-dimensional example in scope uses a ball; general sets
    would need a distance-field representation.
    """

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise RdKernelError("ball radius must be > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class RadialPowerWeight:
    """f(u) = ||u||^a; requires a > -d at evaluation dimension d."""

    a: float

    def __call__(self, r):
        return np.asarray(r, dtype=float) ** self.a


@dataclass(frozen=True)
class RadialExponentialWeight:
    """f(u) = e^(a ||u||)."""

    a: float

    def __call__(self, r):
        return np.exp(self.a * np.asarray(r, dtype=float))


RdWeightFn = Union[RadialPowerWeight, RadialExponentialWeight]


@dataclass(frozen=True)
class Matern:
    kappa: float
    rho: float

    def __post_init__(self):
        if self.kappa <= 0 or self.rho <= 0:
            raise RdKernelError("Matern parameters must be > 0")


@dataclass(frozen=True)
class DoubleExp:
    sigma: float
    beta: float

    def __post_init__(self):
        if self.sigma <= 0 or self.beta <= 0:
            raise RdKernelError("DoubleExp parameters must be > 0")


@dataclass(frozen=True)
class RationalQuadratic:
    sigma: float
    rho: float
    kappa: float

    def __post_init__(self):
        if min(self.sigma, self.rho, self.kappa) <= 0:
            raise RdKernelError("RationalQuadratic parameters must be > 0")


@dataclass(frozen=True)
class Periodic:
    sigma: float
    rho: float
    beta: float

    def __post_init__(self):
        if min(self.sigma, self.rho, self.beta) <= 0:
            raise RdKernelError("Periodic parameters must be > 0")


StationaryKernel = Union[Matern, DoubleExp, RationalQuadratic, Periodic]


def _point(x, dim=None):
    p = np.asarray(x, dtype=float).ravel()
    if dim is not None and p.size != dim:
        raise RdKernelError(f"point has dimension {p.size}, expected {dim}")
    return p


def set_distance(geom: SetGeometry, x) -> float:
    """Distance from x to the ball: max(||x - center|| - radius, 0)."""
    p = _point(x, geom.dim)
    return max(float(np.linalg.norm(p - np.asarray(geom.center))) - geom.radius,
               0.0)


def _sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 pi^(d/2) / Gamma(d/2))."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def c_af(geom: SetGeometry, f: RdWeightFn, x, y,
         cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """Shell-volume kernel C_{A,f}(x, y) = int over the shell of f.

    Requires an origin-centered ball (the radial weights are taken about
    the origin, so no closed form exists for shifted centers).  Zero when
    either point is inside or on the ball; otherwise the radial integral
    over (radius, min ||x||, ||y||] evaluated in closed form where known.
    """
    if any(c != 0.0 for c in geom.center):
        raise RdKernelError("c_af closed forms need an origin-centered ball")
    d = geom.dim
    px, py = _point(x, d), _point(y, d)
    m = min(float(np.linalg.norm(px)), float(np.linalg.norm(py)))
    rad = geom.radius
    if m <= rad:
        return 0.0
    area = _sphere_area(d)
    if isinstance(f, RadialPowerWeight):
        if not f.a > -d:
            raise RdKernelError(f"radial power needs a > -d, got a={f.a}, d={d}")
        e = f.a + d
        return area * (m ** e - rad ** e) / e
    a = f.a
    if a == 0:
        return area * (m ** d - rad ** d) / d
    if a < 0:
        scale = area / (-a) ** d
        return scale * (specfun.upper_inc_gamma(-a * rad, float(d))
                        - specfun.upper_inc_gamma(-a * m, float(d)))
    # growing exponential: radial quadrature
    res = quad.integrate_1d(lambda r: np.exp(a * r) * r ** (d - 1.0),
                            rad, m, cfg)
    return area * res.value


def _q_form(sign: str, zx, zy, two_h):
    """Q_{H,+/-}(zx, zy) = |zx|^2H + |zy|^2H -+ |zx -+ zy|^2H, rowwise."""
    nx = np.linalg.norm(zx, axis=-1)
    ny = np.linalg.norm(zy, axis=-1)
    if sign == "-":
        nz = np.linalg.norm(zx - zy, axis=-1)
    else:
        nz = np.linalg.norm(zx + zy, axis=-1)
    return nx ** two_h + ny ** two_h - nz ** two_h


def k_haf(geom: SetGeometry, f: RdWeightFn, h_index: float, sign: str, x, y,
          cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """Set-distance weighted kernel: shell integral of f(u) Q_{H,+/-}(x-u, y-u).

    ``h_index`` is the exponent H in (0, 1]; ``sign`` selects the
    difference ('-') or sum ('+') form of Q.  Supported for d <= 3.
    """
    if sign not in ("+", "-"):
        raise RdKernelError("sign must be '+' or '-'")
    if not 0 < h_index <= 1:
        raise RdKernelError("H must lie in (0, 1]")
    d = geom.dim
    if d > 3:
        raise RdKernelError("k_haf supports dimensions 1, 2 and 3 only")
    px, py = _point(x, d), _point(y, d)
    depth = min(set_distance(geom, px), set_distance(geom, py))
    if depth <= 0.0:
        return 0.0
    center = np.asarray(geom.center)
    r_lo, r_hi = geom.radius, geom.radius + depth
    two_h = 2.0 * h_index
    if isinstance(f, RadialPowerWeight) and not f.a > -d:
        raise RdKernelError(f"radial power needs a > -d, got a={f.a}, d={d}")

    if d == 1:
        total = 0.0
        for direction in (-1.0, 1.0):
            def integrand(r, _dir=direction):
                u = center[0] + _dir * r
                zx = (px[0] - u)[:, None]
                zy = (py[0] - u)[:, None]
                return f(np.abs(u)) * _q_form(sign, zx, zy, two_h)

            total += quad.integrate_1d(integrand, r_lo, r_hi, cfg).value
        return total

    if d == 2:
        theta = np.linspace(0.0, 2.0 * math.pi, _ANGULAR_ORDER, endpoint=False)
        unit = np.stack([np.cos(theta), np.sin(theta)], axis=1)

        def radial(r):
            r = np.asarray(r, dtype=float)
            u = center[None, None, :] + r[:, None, None] * unit[None, :, :]
            zx = px[None, None, :] - u
            zy = py[None, None, :] - u
            rad_norm = np.linalg.norm(u, axis=-1)
            vals = f(rad_norm) * _q_form(sign, zx, zy, two_h)
            return r * vals.mean(axis=1) * 2.0 * math.pi

        return quad.integrate_1d(radial, r_lo, r_hi, cfg).value

    mu_nodes, mu_weights = np.polynomial.legendre.leggauss(_POLAR_ORDER)
    theta = np.linspace(0.0, 2.0 * math.pi, _ANGULAR_ORDER, endpoint=False)
    sin_phi = np.sqrt(1.0 - mu_nodes ** 2)
    dirs = np.stack([
        np.outer(sin_phi, np.cos(theta)).ravel(),
        np.outer(sin_phi, np.sin(theta)).ravel(),
        np.repeat(mu_nodes, theta.size),
    ], axis=1)
    dir_w = np.repeat(mu_weights, theta.size) * (2.0 * math.pi / theta.size)

    def radial3(r):
        r = np.asarray(r, dtype=float)
        u = center[None, None, :] + r[:, None, None] * dirs[None, :, :]
        zx = px[None, None, :] - u
        zy = py[None, None, :] - u
        rad_norm = np.linalg.norm(u, axis=-1)
        vals = f(rad_norm) * _q_form(sign, zx, zy, two_h)
        return r ** 2 * (vals @ dir_w)

    return quad.integrate_1d(radial3, r_lo, r_hi, cfg).value


def stationary_eval(kernel: StationaryKernel, x, y) -> float:
    """Evaluate a stationary kernel at the pair (x, y); depends on ||x-y||.

    The Matern form is kept exactly as specified, with its distance-power
    prefactor; it diverges at coincident points (returns inf there).
    """
    px = _point(x)
    py = _point(y, px.size)
    dist = float(np.linalg.norm(px - py))
    if isinstance(kernel, Matern):
        k, rho = kernel.kappa, kernel.rho
        if dist == 0.0:
            return math.inf
        pref = (math.gamma(k + 1.0) ** 0.5 * k ** ((k + 1.0) / 4.0)
                * dist ** ((k - 1.0) / 2.0)
                / (math.pi ** 0.5 * math.gamma((k + 1.0) / 2.0)
                   * math.gamma(k) ** 0.5
                   * (2.0 * k ** 0.5 * rho) ** ((k + 1.0) / 2.0)))
        return pref * specfun.bessel_k(k, dist / rho)
    if isinstance(kernel, DoubleExp):
        return kernel.sigma ** 2 * math.exp(-dist ** 2 * kernel.beta ** 2 / 2.0)
    if isinstance(kernel, RationalQuadratic):
        return kernel.sigma ** 2 * (1.0 + dist ** 2
                                    / (2.0 * kernel.kappa * kernel.rho ** 2)
                                    ) ** (-kernel.kappa)
    if isinstance(kernel, Periodic):
        s = math.sin(math.pi * dist / kernel.rho)
        return kernel.sigma ** 2 * math.exp(-2.0 * s * s / kernel.beta ** 2)
    raise RdKernelError(f"unknown stationary kernel {kernel!r}")


def mixed_cov(kernel: StationaryKernel, geom: SetGeometry, f: RdWeightFn,
              x, y, cfg: QuadConfig = quad.DEFAULT_CONFIG) -> float:
    """Product covariance K(x, y) * C_{A,f}(x, y)."""
    caf = c_af(geom, f, x, y, cfg)
    if caf == 0.0:
        return 0.0
    return stationary_eval(kernel, x, y) * caf
