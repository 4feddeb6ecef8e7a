"""Radial conformal-factor profiles with analytic derivative stacks.

A profile is a smooth even function u(r) on [0, inf) together with its
derivatives to arbitrary (or declared) order and a declared tail

    u(r) = -alpha * log r + c + O(r^{-correction_order}),    r -> infinity.

The log-slope alpha controls everything asymptotic: completeness of
g = e^{2u} g_0 along rays, the sign of scalar curvature at infinity, and
the total integral of (-Delta)^{n/2} u (= alpha times the fundamental
constant for admissible profiles).

Derivatives of the log families are closed forms through complex partial
fractions: for k >= 1

    d^k/dr^k log(1 + r^2)  = 2 (-1)^{k-1} (k-1)! Re[ i^k / (1 + i r)^k ],
    d^k/dr^k log(1 + r^4)  = (-1)^{k-1} (k-1)! sum_j (r - zeta_j)^{-k},

with zeta_j the four primitive eighth roots of -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UnsupportedOrderError

ANALYTIC_ORDER = 128  # effectively unlimited derivative order


@dataclass(frozen=True)
class ProfileTail:
    """Declared asymptotics u ~ -alpha log r + constant + O(r^-correction_order)."""

    alpha: float
    constant: float = 0.0
    correction_order: float = 2.0


@dataclass(frozen=True)
class RadialProfile:
    """Radial factor u with derivative evaluator and tail declaration.

    ``derivative(r, k)`` returns the k-th derivative at the radii ``r`` for
    0 <= k <= k_max.  ``grid_backed`` marks profiles whose higher
    derivatives come from spectral differentiation of grid data (the
    operator core then prefers routes needing fewer of them).
    """

    derivative: Callable[[np.ndarray, int], np.ndarray]
    k_max: int = ANALYTIC_ORDER
    tail: Optional[ProfileTail] = None
    origin_regular: bool = True
    grid_backed: bool = False
    label: str = "profile"
    structure_window: Optional[tuple] = None  # (lo, hi) needing dense quadrature

    def d(self, r, k: int):
        if k < 0:
            raise DomainError(f"derivative order must be >= 0, got {k}")
        if k > self.k_max:
            raise UnsupportedOrderError(
                f"profile {self.label!r} only supports derivatives up to order {self.k_max}"
            )
        r_arr = np.asarray(r, dtype=float)
        out = np.asarray(self.derivative(r_arr, k), dtype=float)
        return float(out) if np.ndim(r) == 0 else out

    def u(self, r):
        return self.d(r, 0)

    def derivatives(self, r, k_top: int) -> np.ndarray:
        """Stack of derivatives 0..k_top, shape (k_top+1, len(r))."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        return np.stack([self.d(r_arr, k) for k in range(k_top + 1)])


def _log_one_plus_r2_deriv(r: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return np.log1p(r**2)
    z = (1.0 + 1j * r) ** (-k)
    return 2.0 * (-1.0) ** (k - 1) * math.factorial(k - 1) * (1j**k * z).real


_QUARTIC_ROOTS = np.exp(1j * math.pi * (2 * np.arange(4) + 1) / 4.0)


def _log_one_plus_r4_deriv(r: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return np.log1p(r**4)
    terms = (r[..., None] - _QUARTIC_ROOTS[None, :]) ** (-k)
    return (-1.0) ** (k - 1) * math.factorial(k - 1) * terms.sum(axis=-1).real


def log_profile(alpha: float, constant: float = 0.0, label: Optional[str] = None) -> RadialProfile:
    """u(r) = constant - (alpha/2) log(1 + r^2); no admissibility restriction.

    This is the raw constructor; ``family_alpha`` is the validated entry
    point for the test family.
    """

    def deriv(r, k):
        if k == 0:
            return constant - 0.5 * alpha * _log_one_plus_r2_deriv(r, 0)
        return -0.5 * alpha * _log_one_plus_r2_deriv(r, k)

    return RadialProfile(
        derivative=deriv,
        tail=ProfileTail(alpha=alpha, constant=constant, correction_order=2.0),
        label=label or f"log_profile(alpha={alpha:g})",
    )


def family_alpha(alpha: float) -> RadialProfile:
    """Test family u_alpha(r) = -(alpha/2) log(1 + r^2), 0 <= alpha < 2.

    Asymptotically -alpha log r; complete iff alpha <= 1; scalar curvature
    positive everywhere for alpha in (0, 2).
    """
    if not (0.0 <= alpha < 2.0):
        raise DomainError(f"family parameter must lie in [0, 2), got {alpha}")
    return log_profile(alpha, 0.0, label=f"alpha={alpha:g}")


def sphere_factor() -> RadialProfile:
    """u(r) = log(2/(1+r^2)): round-sphere factor, the canonical incomplete
    negative control (tail slope 2, total curvature twice the bound)."""
    prof = log_profile(2.0, math.log(2.0), label="sphere_factor")
    return prof


def flat_profile() -> RadialProfile:
    """u identically zero."""

    def deriv(r, k):
        return np.zeros_like(np.asarray(r, dtype=float))

    return RadialProfile(derivative=deriv, tail=ProfileTail(0.0, 0.0, math.inf), label="flat")


def capped_log_profile(variant: str = "rational") -> RadialProfile:
    """-log r capped smoothly through the origin; unit log-slope.

    Two caps with different correction orders; the total integral of
    (-Delta)^{n/2} u depends only on the log-slope, so results must agree
    across caps.
    """
    if variant == "rational":
        prof = log_profile(1.0, 0.0, label="capped_log[rational]")
        return prof
    if variant == "quartic":

        def deriv(r, k):
            return -0.25 * _log_one_plus_r4_deriv(r, k)

        return RadialProfile(
            derivative=deriv,
            tail=ProfileTail(1.0, 0.0, 4.0),
            label="capped_log[quartic]",
        )
    raise DomainError(f"unknown cap variant {variant!r}")


def dilate_profile(profile: RadialProfile, lam: float) -> RadialProfile:
    """u_lam(r) = u(lam r).  Same log-slope; constant shifts by -alpha log lam."""
    if not (lam > 0):
        raise DomainError(f"dilation factor must be positive, got {lam}")

    def deriv(r, k):
        return lam**k * profile.derivative(lam * np.asarray(r, dtype=float), k)

    tail = None
    if profile.tail is not None:
        tail = ProfileTail(
            alpha=profile.tail.alpha,
            constant=profile.tail.constant - profile.tail.alpha * math.log(lam),
            correction_order=profile.tail.correction_order,
        )
    return RadialProfile(
        derivative=deriv, k_max=profile.k_max, tail=tail,
        grid_backed=profile.grid_backed, label=f"{profile.label}@dilation{lam:g}",
    )


def shift_profile(profile: RadialProfile, offset: float) -> RadialProfile:
    """u + offset (constant conformal rescaling)."""

    def deriv(r, k):
        vals = profile.derivative(np.asarray(r, dtype=float), k)
        return vals + offset if k == 0 else vals

    tail = None
    if profile.tail is not None:
        tail = ProfileTail(profile.tail.alpha, profile.tail.constant + offset,
                           profile.tail.correction_order)
    return RadialProfile(derivative=deriv, k_max=profile.k_max, tail=tail,
                         grid_backed=profile.grid_backed, label=f"{profile.label}+{offset:g}")
