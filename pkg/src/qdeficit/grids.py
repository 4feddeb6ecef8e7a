"""Collocation grids on [0, inf), spectral differentiation, radial
integration, and limit extrapolation.

The half line is parameterized by the rational map

    r = L * t / (1 - t),        t in [0, 1),

with Chebyshev-Radau collocation points in t (t = 0 included, t = 1
excluded, so r = 0 is a node and no node sits at infinity).  Functions are
represented through the weighted interpolant

    f(r) = F(t) / (1 - t)**2,   F polynomial of degree < node_count,

which makes differentiation exact for polynomials composed with the
inverse map t(r) = r/(L+r) (and for 1, r, r**2), and keeps profiles with
logarithmic tails, u ~ -alpha*log r + c + O(r^-2), well resolved: in t the
weighted representative carries only a (1-t)^2*log(1-t) endpoint term
whose Chebyshev coefficients decay like N^-5.

Radial integrals of f against r^{n-1} dr are evaluated by composite
Gauss-Legendre panels in t on [0, t(R)], plus an analytic contribution
from the declared power-law tail model beyond R.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma, roots_legendre

from .errors import (
    ConfigurationError,
    DomainError,
    TailDivergenceError,
    UnsupportedOrderError,
)

logger = logging.getLogger(__name__)

MAX_DERIVATIVE_ORDER = 8

#: Lebesgue measure of the unit ball in R^n.
def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (= n * omega_n)."""
    return n * unit_ball_volume(n)


@dataclass(frozen=True)
class GridSpec:
    """Static description of a mapped radial collocation grid.

    node_count : number of collocation nodes (>= 16)
    map_scale  : the length L of the rational map r = L t/(1-t)
    tail_cutoff: radius R beyond which integrals use the analytic tail model
    rel_tol    : relative accuracy target for quadrature/tail decisions
    """

    node_count: int = 256
    map_scale: float = 1.0
    tail_cutoff: float = 1.0e6
    rel_tol: float = 1.0e-8

    def __post_init__(self):
        if self.node_count < 16:
            raise ConfigurationError(f"node_count must be >= 16, got {self.node_count}")
        if not (self.map_scale > 0):
            raise ConfigurationError(f"map_scale must be positive, got {self.map_scale}")
        if not (self.tail_cutoff > self.map_scale):
            raise ConfigurationError(
                f"tail_cutoff must exceed map_scale, got {self.tail_cutoff} <= {self.map_scale}"
            )
        if not (0.0 < self.rel_tol < 1.0):
            raise ConfigurationError(f"rel_tol must lie in (0,1), got {self.rel_tol}")

    def t_of_r(self, r):
        return np.asarray(r, dtype=float) / (self.map_scale + np.asarray(r, dtype=float))

    def r_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return self.map_scale * t / (1.0 - t)


@dataclass(frozen=True)
class PowerTail:
    """Declared large-r behaviour f(r) ~ coeff * r^-power.

    coeff None means "measure from data at the matching radius".
    """

    power: float
    coeff: Optional[float] = None


class _GridData:
    """Nodes, barycentric weights and the mapped differentiation matrix."""

    def __init__(self, spec: GridSpec):
        N = spec.node_count
        j = np.arange(N)
        # Chebyshev-Radau angles: theta in [0, pi), so t strictly inside [0,1)
        theta = 2.0 * np.pi * j / (2 * N - 1)
        t = 0.5 * (1.0 - np.cos(theta))
        self.spec = spec
        self.t = t
        self.r = spec.r_of_t(t)
        self.one_minus_t = 1.0 - t

        # node differences in the cancellation-free trig product form:
        # t_i - t_j = sin((th_i+th_j)/2) sin((th_i-th_j)/2)
        s_plus = np.sin(0.5 * (theta[:, None] + theta[None, :]))
        s_minus = np.sin(0.5 * (theta[:, None] - theta[None, :]))
        diff = s_plus * s_minus
        np.fill_diagonal(diff, 1.0)
        np.fill_diagonal(s_plus, 1.0)
        np.fill_diagonal(s_minus, 1.0)

        # barycentric weights in log scale (raw products underflow for N ~ 256)
        logw = -(np.sum(np.log(np.abs(s_plus)), axis=1)
                 + np.sum(np.log(np.abs(s_minus)), axis=1))
        logw -= logw.max()
        sign = np.where((N - 1 - j) % 2 == 0, 1.0, -1.0)
        self.bary_w = sign * np.exp(logw)

        # Chebyshev synthesis matrix for x = 2t - 1 = -cos(theta):
        # T_k(x_j) = (-1)^k cos(k theta_j)
        k = np.arange(N)
        self._synth = (-1.0) ** k[None, :] * np.cos(k[None, :] * theta[:, None])

    def to_cheb_coeffs(self, values: np.ndarray) -> np.ndarray:
        """Chebyshev coefficients (in x = 2t-1) of the interpolant of the
        weighted representative F = (1-t)^2 f.

        The Radau angles are equispaced on the odd circle of length 2N-1,
        so the even-mirrored FFT diagonalizes the transform exactly.
        """
        N = self.spec.node_count
        F = values * self.one_minus_t**2
        mirrored = np.concatenate([F, F[:0:-1]])
        b = np.real(np.fft.fft(mirrored))[:N]
        a = 2.0 * b / (2 * N - 1)
        a[0] *= 0.5
        a *= (-1.0) ** np.arange(N)
        # chop the roundoff plateau: the derivative recurrence amplifies
        # tail coefficients by k^2 per order, so noise-level modes must go
        mags = np.abs(a)
        tiny = 8.0 * np.finfo(float).eps * (mags.max() or 1.0)
        above = np.nonzero(mags > tiny)[0]
        if len(above) and above[-1] + 1 < N:
            a[above[-1] + 1:] = 0.0
        return a

    @staticmethod
    def _cheb_deriv_coeffs(a: np.ndarray) -> np.ndarray:
        """Coefficient recurrence for d/dx of a Chebyshev series."""
        N = len(a)
        out = np.zeros_like(a)
        if N < 2:
            return out
        out[N - 2] = 2.0 * (N - 1) * a[N - 1]
        for kk in range(N - 3, -1, -1):
            out[kk] = out[kk + 2] + 2.0 * (kk + 1) * a[kk + 1]
        out[0] *= 0.5
        return out

    def weighted_deriv_values(self, values: np.ndarray, order: int) -> np.ndarray:
        """Node values of d^k/dr^k f through the weighted representative.

        With s = 1 - t and F = s^2 f, the chain rule for r = L(1/s - 1)
        gives f^(k) = L^-k sum_j c_{k,j} s^{k+j-2} F^(j)(t); the integer
        coefficients follow the two-term recursion of d/dr = (s^2/L) d/dt.
        F^(j) is differentiated in coefficient space (stable at the grid
        ends, unlike high-order differentiation matrices).
        """
        s = self.one_minus_t
        a = self.to_cheb_coeffs(values)
        f_j = [self._synth @ a]
        for _ in range(order):
            a = 2.0 * self._cheb_deriv_coeffs(a)  # d/dt = 2 d/dx
            f_j.append(self._synth @ a)
        terms = {0: 1.0}
        for kk in range(order):
            nxt: dict = {}
            for jj, c in terms.items():
                p = kk + jj - 2
                nxt[jj] = nxt.get(jj, 0.0) - c * p
                nxt[jj + 1] = nxt.get(jj + 1, 0.0) + c
            terms = nxt
        out = np.zeros_like(values)
        for jj, c in terms.items():
            out += c * s ** (order + jj - 2) * f_j[jj]
        return out / self.spec.map_scale**order

    def interpolate(self, values: np.ndarray, r):
        """Barycentric evaluation of the weighted interpolant at radii r."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        tq = np.atleast_1d(self.spec.t_of_r(r))
        F = values * self.one_minus_t**2
        d = tq[:, None] - self.t[None, :]
        exact = np.isclose(d, 0.0, atol=1e-15)
        d = np.where(exact, 1.0, d)
        num = (self.bary_w[None, :] / d * F[None, :]).sum(axis=1)
        den = (self.bary_w[None, :] / d).sum(axis=1)
        out = num / den / (1.0 - tq) ** 2
        hit = exact.any(axis=1)
        if hit.any():
            idx = exact.argmax(axis=1)
            out[hit] = values[idx[hit]]
        return float(out[0]) if scalar else out


@lru_cache(maxsize=32)
def _grid_data(spec: GridSpec) -> _GridData:
    return _GridData(spec)


@dataclass(frozen=True)
class GridFunction:
    """Values of a radial function on a mapped collocation grid.

    ``parity_at_origin`` records the parity of the smooth extension through
    r = 0 ('even' or 'odd'); differentiation flips it and pins the exact
    zero at the origin node.  ``tail`` optionally declares power-law decay
    used by radial integration beyond the grid, and ``evaluator`` optionally
    overrides off-grid evaluation (set when the generating callable is
    known, giving exact values instead of interpolation).
    """

    spec: GridSpec
    nodes: np.ndarray
    values: np.ndarray
    parity_at_origin: str = "even"
    tail: Optional[PowerTail] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.parity_at_origin not in ("even", "odd"):
            raise ConfigurationError(f"parity must be 'even' or 'odd', got {self.parity_at_origin!r}")
        if len(self.nodes) != self.spec.node_count or len(self.values) != self.spec.node_count:
            raise ConfigurationError("nodes/values length must match spec.node_count")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("GridFunction values must be finite")

    @classmethod
    def from_callable(cls, spec: GridSpec, fn, parity: str = "even",
                      tail: Optional[PowerTail] = None, keep_evaluator: bool = True) -> "GridFunction":
        data = _grid_data(spec)
        vals = np.asarray(fn(data.r), dtype=float)
        return cls(spec, data.r, vals, parity, tail, fn if keep_evaluator else None)

    def __call__(self, r):
        if self.evaluator is not None:
            r_arr = np.asarray(r, dtype=float)
            out = np.asarray(self.evaluator(r_arr), dtype=float)
            return float(out) if np.ndim(r) == 0 else out
        return _grid_data(self.spec).interpolate(self.values, r)

    def with_values(self, values, parity=None, tail=None, evaluator=None) -> "GridFunction":
        return GridFunction(self.spec, self.nodes, np.asarray(values, dtype=float),
                            parity or self.parity_at_origin, tail, evaluator)


def build_grid(spec: GridSpec) -> GridFunction:
    """Grid skeleton: the node set of ``spec`` with zero values."""
    data = _grid_data(spec)
    return GridFunction(spec, data.r, np.zeros_like(data.r), "even")


def reliable_radius(f: GridFunction) -> float:
    """Largest radius where interpolated values are trustworthy.

    The weighted representative F = (1-t)^2 f carries a global roundoff
    floor ~ eps * max|F|; unweighting divides by (1-t)^2, so interpolated
    values of a decaying f below that floor explode quadratically in r.
    Evaluator-backed functions are exact everywhere.
    """
    if f.evaluator is not None:
        return f.spec.tail_cutoff
    data = _grid_data(f.spec)
    F = np.abs(f.values) * data.one_minus_t**2
    floor = 64.0 * np.finfo(float).eps * F.max()
    above = np.nonzero(F >= floor)[0]
    if len(above) == 0 or above[-1] == 0:
        return float(f.nodes[-1])
    return float(f.nodes[above[-1]])


def differentiate(f: GridFunction, order: int = 1) -> GridFunction:
    """k-th radial derivative through the mapped differentiation matrix.

    Parity bookkeeping: each derivative flips the parity flag, and the
    origin value of an odd-parity result is pinned to exactly zero (smooth
    even/odd extensions have no odd/even derivatives at r = 0).
    """
    if order < 1:
        raise DomainError(f"derivative order must be >= 1, got {order}")
    if order > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"derivative order {order} exceeds the configured maximum {MAX_DERIVATIVE_ORDER}"
        )
    data = _grid_data(f.spec)
    vals = data.weighted_deriv_values(f.values, order)
    parity = f.parity_at_origin if order % 2 == 0 else ("odd" if f.parity_at_origin == "even" else "even")
    if parity == "odd":
        vals = vals.copy()
        vals[0] = 0.0
    return GridFunction(f.spec, f.nodes, vals, parity)


# ---------------------------------------------------------------------------
# radial quadrature


def _panel_gauss(fn, a: float, b: float, boundaries: np.ndarray, npts: int = 12) -> float:
    """Composite Gauss-Legendre quadrature of ``fn`` with given panel boundaries."""
    x, w = roots_legendre(npts)
    lo = boundaries[:-1]
    hi = boundaries[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return float(np.dot(wts, fn(pts)))


def _sin_squared_panels(t_end: float, count: int) -> np.ndarray:
    k = np.arange(count + 1)
    return t_end * np.sin(0.5 * np.pi * k / count) ** 2


def radial_quadrature(fn, spec: GridSpec, n: int, r_end: float,
                      panels: int = 48, rel_tol: Optional[float] = None) -> float:
    """integral of fn(r) * r^{n-1} dr over [0, r_end] via mapped panels.

    Panels follow a sin^2 distribution in t, clustering at both the origin
    and the far end of the map; the count is doubled once as an accuracy
    check.  The default tolerance is spec.rel_tol; integrands built on
    grid interpolants carry a roundoff floor around 1e-7 of their peak, so
    callers integrating those pass a matching tolerance.
    """
    t_end = float(spec.t_of_r(r_end))
    tol = spec.rel_tol if rel_tol is None else rel_tol

    def integrand(t):
        r = spec.r_of_t(t)
        jac = spec.map_scale / (1.0 - t) ** 2
        return np.asarray(fn(r), dtype=float) * r ** (n - 1) * jac

    coarse = _panel_gauss(integrand, 0.0, t_end, _sin_squared_panels(t_end, panels))
    fine = _panel_gauss(integrand, 0.0, t_end, _sin_squared_panels(t_end, 2 * panels))
    if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
        finer = _panel_gauss(integrand, 0.0, t_end, _sin_squared_panels(t_end, 4 * panels))
        if abs(finer - fine) > 10 * tol * max(abs(finer), 1e-300):
            logger.warning("radial quadrature did not settle: %.3e vs %.3e", fine, finer)
        fine = finer
    return fine


def log_panel_quadrature(fn, a: float, b: float, per_decade: int = 8, npts: int = 12) -> float:
    """integral of fn over [a, b] with log-uniform panels (a > 0)."""
    if not (0 < a < b):
        raise DomainError(f"need 0 < a < b, got [{a}, {b}]")
    count = max(8, int(per_decade * math.log10(b / a)) + 1)
    bounds = np.geomspace(a, b, count + 1)
    return _panel_gauss(fn, a, b, bounds, npts)


def integrate_radial(f: GridFunction, n: int) -> float:
    """integral of f over R^n for radial f: n*omega_n * int f(r) r^{n-1} dr.

    Quadrature runs to R = min(tail_cutoff, largest node for purely
    grid-borne data); beyond R the declared tail model contributes
    analytically.  The tail must both be integrable (power > n) and stay
    below rel_tol relative contribution.
    """
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    spec = f.spec
    r_end = min(spec.tail_cutoff, reliable_radius(f))
    quad_tol = spec.rel_tol if f.evaluator is not None else max(spec.rel_tol, 1e-6)
    main = sphere_area(n) * radial_quadrature(f, spec, n, r_end, rel_tol=quad_tol)

    scale = max(abs(main), 1e-300)
    tail_val = 0.0
    if f.tail is not None:
        q = f.tail.power
        if q <= n:
            raise TailDivergenceError(
                f"tail power {q} is not integrable against r^{n - 1} in dimension {n}"
            )
        coeff = f.tail.coeff
        if coeff is None:
            coeff = float(f(r_end)) * r_end**q
        tail_val = sphere_area(n) * coeff * r_end ** (n - q) / (q - n)
        # the modeled region is included; only the contribution beyond the
        # declared cutoff must be negligible at rel_tol
        beyond = sphere_area(n) * coeff * spec.tail_cutoff ** (n - q) / (q - n)
        if abs(beyond) > spec.rel_tol * max(scale, abs(beyond)):
            raise TailDivergenceError(
                f"tail contribution {beyond:.3e} beyond the cutoff {spec.tail_cutoff:.3e} "
                f"exceeds rel_tol = {spec.rel_tol:.1e} of the integral {main:.3e}"
            )
    else:
        # undeclared tail: require the endpoint value itself to be negligible
        check = sphere_area(n) * float(f(r_end)) * r_end**n
        if abs(check) > spec.rel_tol * max(scale, abs(check)):
            raise TailDivergenceError(
                f"undeclared tail is not negligible at r = {r_end:.3e} "
                f"(estimate {check:.3e} vs integral {main:.3e})"
            )
    return main + tail_val


# ---------------------------------------------------------------------------
# limit extrapolation


@dataclass(frozen=True)
class LimitEstimate:
    """Extrapolated value of a radius-indexed quantity as r -> 0 or infinity.

    ``samples`` holds the raw (radius, value) pairs; ``diagnostics`` the
    successive extrapolant differences (one per Aitken level).
    """

    value: float
    error_bar: float
    samples: tuple
    converged: bool
    diagnostics: tuple = field(default_factory=tuple)


def extrapolate_limit(samples: Sequence, ratio: float, rel_tol: float = 1.0e-6) -> LimitEstimate:
    """Accelerate a sequence sampled at geometrically spaced radii.

    With successive radius ratio fixed, every inverse-power error term is a
    geometric mode, so iterated Aitken elimination converges regardless of
    the (possibly non-integer) exponents.  ``converged`` requires the last
    two extrapolants to agree within rel_tol (relative to scale).
    """
    samples = [(float(r), float(v)) for r, v in samples]
    if len(samples) < 4:
        raise DomainError(f"need at least 4 samples, got {len(samples)}")
    if ratio <= 0 or ratio == 1.0:
        raise DomainError(f"radius ratio must be positive and != 1, got {ratio}")
    radii = np.array([r for r, _ in samples])
    logs = np.log(radii[1:] / radii[:-1])
    if not np.allclose(logs, math.log(ratio), rtol=1e-8, atol=1e-12):
        raise DomainError("samples are not geometrically spaced at the stated ratio")

    level = np.array([v for _, v in samples])
    scale = max(np.max(np.abs(level)), 1e-300)
    levels = [level]
    while len(levels[-1]) >= 3:
        cur = levels[-1]
        d1 = np.diff(cur)
        d2 = np.diff(cur, 2)
        safe = np.abs(d2) > 1e-15 * scale
        nxt = np.where(safe, cur[2:] - np.divide(d1[1:] ** 2, d2, out=np.zeros_like(d2), where=safe), cur[2:])
        levels.append(nxt)

    # agreement of the two youngest entries at each acceleration level;
    # convergence requires it at the deepest level carrying two entries
    diffs = tuple(float(abs(lv[-1] - lv[-2])) for lv in levels if len(lv) >= 2)
    final = levels[-1] if len(levels[-1]) >= 2 else levels[-2]
    value = float(levels[-1][-1])
    error_bar = float(abs(final[-1] - final[-2]))
    converged = error_bar <= rel_tol * max(1.0, abs(value))
    # raw-sample divergence guard: growing increments defeat acceleration
    # (a diverging pure geometric mode extrapolates to a spurious finite value)
    raw_inc = np.abs(np.diff(level))
    if len(raw_inc) >= 2 and raw_inc[-1] > raw_inc[0] and raw_inc[-1] > rel_tol * scale:
        converged = False
    return LimitEstimate(value, error_bar, tuple(samples), converged, diffs)
