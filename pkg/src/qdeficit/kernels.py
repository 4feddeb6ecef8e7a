"""Spherical averages of power-law and logarithmic kernels.

For |x| = r, |y| = s, every average over the sphere {|z| = r} of a kernel
k(|z - y|) reduces to one polar integral.  With the half-angle substitution
x = sin(phi/2):

    |z - y|^2 = (r - s)^2 + 4 r s x^2,

    avg k = (2^{n-1} / A_n) * int_0^1 k(d(x)) x^{n-2} (1 - x^2)^{(n-3)/2} dx,

where A_n = int_0^pi sin^{n-2} = sqrt(pi) Gamma((n-1)/2) / Gamma(n/2).

The x-integral is evaluated on one fixed composite rule: dyadic
Gauss-Legendre panels accumulating at x = 0 (which resolves the
near-singularity of half-width ~ |r-s| / 2 sqrt(rs) for any separation down
to ~1e-10 relative) and a Gauss-Jacobi panel carrying the (1-x)^{(n-3)/2}
endpoint weight.  One rule serves the power kernels K_p(r,s) =
avg |z-y|^{-p}, the log kernel Lambda(r,s) = avg log|z-y|, and the
combined quantity I(r,s) = |r^2 - s^2| * K_2(r,s).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre
from scipy.stats import norm, qmc

from .errors import DomainError, SingularAverageError

logger = logging.getLogger(__name__)

_DYADIC_LEVELS = 34
_GL_POINTS = 10
_GJ_POINTS = 12


def _sin_power_integral(n: int) -> float:
    return math.sqrt(math.pi) * gamma((n - 1) / 2.0) / gamma(n / 2.0)


@lru_cache(maxsize=16)
def _x_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights absorbing x^{n-2} (1-x^2)^{(n-3)/2} on [0, 1]."""
    beta = (n - 3) / 2.0
    xg, wg = roots_legendre(_GL_POINTS)
    nodes = []
    weights = []
    bounds = [0.0] + [2.0 ** (-k) for k in range(_DYADIC_LEVELS, 0, -1)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid + half * xg
        nodes.append(x)
        weights.append(half * wg * x ** (n - 2) * (1.0 - x**2) ** beta)
    # [1/2, 1] with Gauss-Jacobi absorbing the (1-x)^beta endpoint factor
    xj, wj = roots_jacobi(_GJ_POINTS, beta, 0.0)
    x = 0.75 + 0.25 * xj
    nodes.append(x)
    weights.append(wj * 0.25 ** (beta + 1.0) * x ** (n - 2) * (1.0 + x) ** beta)
    scale = 2.0 ** (n - 1) / _sin_power_integral(n)
    return np.concatenate(nodes), scale * np.concatenate(weights)


def _check_dim(n: int):
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n}")


def avg_power(n: int, p: float, r, s) -> np.ndarray:
    """Vectorized K_p(r, s) = average over |z| = r of |z - y|^{-p}, |y| = s."""
    _check_dim(n)
    x, w = _x_rule(n)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if p == 0:
        return np.ones(np.broadcast(r, s).shape)
    d2 = (r - s)[..., None] ** 2 + (4.0 * r * s)[..., None] * x**2
    return (d2 ** (-p / 2.0)) @ w


def avg_log(n: int, r, s) -> np.ndarray:
    """Vectorized Lambda(r, s) = average over |z| = r of log|z - y|, |y| = s."""
    _check_dim(n)
    x, w = _x_rule(n)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    d2 = (r - s)[..., None] ** 2 + (4.0 * r * s)[..., None] * x**2
    return (0.5 * np.log(d2)) @ w


@dataclass(frozen=True)
class SphereKernelQuery:
    """One sphere-average request: dimension, exponent, sphere and source radii."""

    n: int
    p: float
    r: float
    s: float

    def __post_init__(self):
        _check_dim(self.n)
        if self.p < 0:
            raise DomainError(f"exponent p must be nonnegative, got {self.p}")
        if not (self.r > 0):
            raise DomainError(f"sphere radius must be positive, got {self.r}")
        if self.s < 0:
            raise DomainError(f"source radius must be nonnegative, got {self.s}")


def sphere_average_power(q: SphereKernelQuery) -> float:
    """K_p(r, s), with the integrable-singularity threshold enforced.

    At r = s the average is finite only for p < n - 1; exponents within
    1e-6 of the threshold are refused as ill-conditioned.
    """
    if q.p == 0:
        return 1.0
    if q.s == 0.0:
        return q.r ** (-q.p)
    if q.r == q.s and q.p >= q.n - 1 - 1e-6:
        raise SingularAverageError(
            f"average of |z-y|^-{q.p} on the source sphere diverges for p >= n-1 = {q.n - 1} "
            f"(p is capped at n-1-1e-6)"
        )
    return float(avg_power(q.n, q.p, q.r, q.s))


def sphere_average_log(n: int, r: float, s: float) -> float:
    """Lambda(r, s); symmetric in (r, s), = log max(r,s) + O((min/max)^2)."""
    _check_dim(n)
    if r < 0 or s < 0 or (r == 0 and s == 0):
        raise DomainError(f"need r, s >= 0 and not both zero, got r={r}, s={s}")
    if s == 0.0:
        return math.log(r)
    if r == 0.0:
        return math.log(s)
    return float(avg_log(n, r, s))


def kernel_I(n: int, r: float, s: float) -> float:
    """Average over |z| = r of ||z|^2 - |y|^2| / |z - y|^2.

    The modulus factor is constant on the sphere, so this is
    |r^2 - s^2| * K_2(r, s); on the diagonal the integrand vanishes
    identically.
    """
    _check_dim(n)
    if not (r > 0 and s > 0):
        raise DomainError(f"need r, s > 0, got r={r}, s={s}")
    if r == s:
        return 0.0
    return abs(r**2 - s**2) * float(avg_power(n, 2.0, r, s))


@dataclass(frozen=True)
class SupScan:
    """Empirical maxima of the bounded kernel combinations over a log grid."""

    n: int
    decades: int
    points_per_decade: int
    sup_I: float
    argmax_I: Tuple[float, float]
    sup_weighted: float
    argmax_weighted: Tuple[float, float]
    weighted_kind: str


def kernel_sup_scan(n: int, decades: int, points_per_decade: int = 8) -> SupScan:
    """Scan I(r,s) and the dimension-appropriate weighted kernel for maxima.

    n = 3 uses (r+s)*K_1; n > 3 uses (r^2+s^2)*K_2.  Both combinations are
    homogeneous of degree zero, so the scan effectively resolves the ratio
    s/r and its maxima are stable under refinement.
    """
    _check_dim(n)
    if decades < 3:
        raise DomainError(f"need decades >= 3, got {decades}")
    radii = np.logspace(-decades / 2.0, decades / 2.0, decades * points_per_decade + 1)
    R, S = np.meshgrid(radii, radii, indexing="ij")
    I_vals = np.abs(R**2 - S**2) * avg_power(n, 2.0, R, S)
    if n == 3:
        weighted = (R + S) * avg_power(n, 1.0, R, S)
        kind = "(r+s)*K_1"
    else:
        weighted = (R**2 + S**2) * avg_power(n, 2.0, R, S)
        kind = "(r^2+s^2)*K_2"
    iI = np.unravel_index(np.argmax(I_vals), I_vals.shape)
    iw = np.unravel_index(np.argmax(weighted), weighted.shape)
    return SupScan(
        n, decades, points_per_decade,
        float(I_vals[iI]), (float(R[iI]), float(S[iI])),
        float(weighted[iw]), (float(R[iw]), float(S[iw])),
        kind,
    )


def monte_carlo_sphere_average(n: int, r: float, s: float, kind: str = "power",
                               p: Optional[float] = None, samples_log2: int = 20,
                               seed: int = 0) -> float:
    """Brute-force sphere-sampling oracle for the kernel averages.

    Draws 2^samples_log2 scrambled-Sobol points, maps them through the
    Gaussian to uniform directions on S^{n-1}, and averages the kernel
    against the fixed source y = (s, 0, ..., 0).  Seeded and deterministic.
    """
    _check_dim(n)
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    u = sob.random_base2(m=samples_log2)
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    g = norm.ppf(u)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    z = r * g
    z[:, 0] -= s
    dist = np.linalg.norm(z, axis=1)
    if kind == "power":
        if p is None:
            raise DomainError("power kernel needs an exponent p")
        vals = dist ** (-p)
    elif kind == "log":
        vals = np.log(dist)
    else:
        raise DomainError(f"unknown kernel kind {kind!r}")
    return float(vals.mean())
