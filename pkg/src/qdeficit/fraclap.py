"""The operator core: (-Delta)^{n/2} on radial profiles, the order-1 Riesz
potential, the log potential, and the fundamental-solution constant.

Realization.  For even n the operator is the iterated Laplacian
(-Delta)^{n/2} = (-Delta)^m, m = n/2.  For odd n = 2m+1 it is the
half-Laplacian composed with m Laplacians, with the half power realized
through the order-1 Riesz potential

    I_1 f(x) = c_n  int |x-y|^{1-n} f(y) dH^n(y),
    c_n      = Gamma((n-1)/2) / (2 pi^{(n+1)/2}),
    (-Delta)^{1/2} f = (-Delta)(I_1 f).

On smooth decaying inputs (-Delta) and I_1 commute, so for profiles with
analytic derivative stacks the chain is evaluated as

    (-Delta)^{n/2} u = I_1[ (-Delta)^{(n+1)/2} u ],

which needs no numerical differentiation at all: the iterated Laplacian of
a profile is the exact radial recursion

    Delta^m u = sum_k  a_{m,k}(n) r^{k-2m} u^{(k)},   k = 1..2m,

with the r = 0 value from the even limit Delta^m u(0) =
u^{(2m)}(0) prod_{j<=m} 2j(2j+n-2) / (2m)!.  Grid-borne inputs go through
the literal (-Delta) o I_1 composition with spectral differentiation.

An independent half-Laplacian backend for n = 3 goes through the radial
Fourier (sine) transform: multiply the transform by |xi| and invert.  The
two odd backends are cross-validated in an r^{n-1}-weighted L1 norm.

The total mass produced by (-Delta)^{n/2}(-log|x|) is the fundamental
constant C_n = 2^{n-1} Gamma(n/2) pi^{n/2}; `green_constant_check`
recovers it numerically from a smoothly capped log profile (the total
depends only on the log-slope, so any cap works).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional

import numpy as np
from scipy.fft import dst
from scipy.interpolate import CubicSpline
from scipy.special import gamma, roots_legendre

from .errors import (
    AliasingError,
    BackendDisagreementError,
    DimensionError,
    DivergentPotentialError,
    DomainError,
    HypothesisViolationError,
    ParityError,
)
from .grids import (
    GridFunction,
    GridSpec,
    LimitEstimate,
    PowerTail,
    _grid_data,
    extrapolate_limit,
    integrate_radial,
    reliable_radius,
    sphere_area,
)
from .kernels import avg_log, avg_power
from .profiles import RadialProfile

logger = logging.getLogger(__name__)

CROSS_TOL = 1.0e-3
CONDITION_WARN = 1.0e-3


def green_constant(n: int) -> float:
    """Fundamental-solution constant C_n = 2^{n-1} Gamma(n/2) pi^{n/2}."""
    return 2.0 ** (n - 1) * gamma(n / 2.0) * math.pi ** (n / 2.0)


def riesz_order1_constant(n: int) -> float:
    """Normalization of the order-1 Riesz potential."""
    return gamma((n - 1) / 2.0) / (2.0 * math.pi ** ((n + 1) / 2.0))


# ---------------------------------------------------------------------------
# Laplacians


def radial_laplacian(f: GridFunction, n: int) -> GridFunction:
    """Delta f = f'' + (n-1)/r f' for radial f; r = 0 via the limit n f''(0)."""
    if f.parity_at_origin != "even":
        raise ParityError("radial Laplacian needs an even function at the origin")
    from .grids import differentiate

    d1 = differentiate(f, 1)
    d2 = differentiate(f, 2)
    vals = np.empty_like(f.values)
    vals[1:] = d2.values[1:] + (n - 1) * d1.values[1:] / f.nodes[1:]
    vals[0] = n * d2.values[0]
    tail = None
    if f.tail is not None and f.tail.coeff is not None:
        q = f.tail.power
        tail = PowerTail(q + 2, f.tail.coeff * q * (q + 2 - n))
    elif f.tail is not None:
        tail = PowerTail(f.tail.power + 2, None)
    return GridFunction(f.spec, f.nodes, vals, "even", tail)


def iterated_laplacian(u: GridFunction, n: int, m: int) -> GridFunction:
    """(-Delta)^m u by m spectral Laplacian applications.

    Grid noise is amplified by roughly node_count^{2m} * eps; the estimate
    is logged (and surfaced by the operator dispatcher), not fatal.
    """
    if m < 1:
        raise DomainError(f"power m must be >= 1, got {m}")
    cond = iterated_condition(u.spec, m)
    if cond > CONDITION_WARN:
        logger.warning("iterated Laplacian m=%d ill-conditioned: estimate %.2e", m, cond)
    g = u
    for _ in range(m):
        lap = radial_laplacian(g, n)
        g = lap.with_values(-lap.values, parity="even", tail=lap.tail)
    return g


def iterated_condition(spec: GridSpec, m: int) -> float:
    """Noise-amplification heuristic for m spectral Laplacians."""
    return float(spec.node_count) ** (2 * m) * np.finfo(float).eps


@lru_cache(maxsize=64)
def _lap_power_coeffs(n: int, m: int) -> Dict[int, float]:
    """Coefficients a_{m,k}: Delta^m u = sum_k a_{m,k} r^{k-2m} u^{(k)}."""
    coeffs = {0: 1.0}
    for j in range(m):
        nxt: Dict[int, float] = {}
        for k, c in coeffs.items():
            p = k - 2 * j
            for key, val in ((k, c * p * (p + n - 2)),
                             (k + 1, c * (2 * p + n - 1)),
                             (k + 2, c)):
                if val != 0.0:
                    nxt[key] = nxt.get(key, 0.0) + val
        coeffs = nxt
    return coeffs


def _origin_lap_power_factor(n: int, m: int) -> float:
    out = 1.0
    for j in range(1, m + 1):
        out *= 2 * j * (2 * j + n - 2)
    return out / math.factorial(2 * m)


_TAYLOR_TERMS = 9
_TAYLOR_SWITCH = 0.15


def _lap_power_monomial(n: int, m: int, k: int) -> float:
    """Delta^m r^{2k} = beta * r^{2k-2m}."""
    beta = 1.0
    for j in range(m):
        beta *= (2 * k - 2 * j) * (2 * k - 2 * j + n - 2)
    return beta


def profile_neg_lap_power(profile: RadialProfile, n: int, m: int, r) -> np.ndarray:
    """(-Delta)^m u at radii r from the profile's analytic derivative stack.

    The direct sum sum_k c_k r^{k-2m} u^{(k)}(r) cancels catastrophically
    as r -> 0 once m >= 3; profiles carrying enough derivatives switch to
    the even Taylor expansion of Delta^m u around the origin there.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r_arr)
    taylor_order = 2 * (m + _TAYLOR_TERMS - 1)
    use_taylor = profile.k_max >= taylor_order
    cut = _TAYLOR_SWITCH if (use_taylor and m >= 2) else 0.0
    near = r_arr <= cut if cut > 0 else r_arr == 0.0
    far = ~near

    coeffs = _lap_power_coeffs(n, m)
    rp = r_arr[far]
    acc = np.zeros_like(rp)
    for k, c in sorted(coeffs.items()):
        if k == 0:
            continue
        acc += c * rp ** (k - 2 * m) * profile.d(rp, k)
    out[far] = acc

    if near.any():
        if cut > 0:
            rn = r_arr[near]
            zero = np.zeros(1)
            acc_n = np.zeros_like(rn)
            for i in range(_TAYLOR_TERMS):
                k = m + i
                u2k = profile.d(zero, 2 * k)[0]
                acc_n += (u2k / math.factorial(2 * k)) * _lap_power_monomial(n, m, k) * rn ** (2 * i)
            out[near] = acc_n
        else:
            u2m0 = profile.d(np.zeros(1), 2 * m)[0]
            out[near] = u2m0 * _origin_lap_power_factor(n, m)
    out *= (-1.0) ** m
    return out if np.ndim(r) else float(out[0])


def _log_tail_coeff(alpha: float, n: int, m: int) -> float:
    """Leading coefficient of (-Delta)^m (-alpha log r) = coeff * r^{-2m}."""
    c = alpha * (n - 2)
    for k in range(1, m):
        c *= 2 * k * (n - 2 - 2 * k)
    return c


# ---------------------------------------------------------------------------
# Riesz potential of order 1 (odd dimensions)

_GL12 = roots_legendre(12)


def _panel_points(bounds: np.ndarray):
    x, w = _GL12
    lo, hi = bounds[:-1], bounds[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def _source_panels(spec: GridSpec, r: float, r_end: float,
                   window: Optional[tuple] = None) -> np.ndarray:
    """Panel boundaries in s: geometric base grid (bounded ratio per panel,
    so Gauss panels resolve power-law integrands across all decades) plus
    dyadic grading toward the kernel singularity at s = r (innermost
    sliver dropped), plus uniform refinement across a declared structure
    window (bump shells oscillate on scales the geometric grid misses)."""
    r0 = 1.0e-4 * min(spec.map_scale, r if r > 0 else spec.map_scale)
    decades = max(1.0, math.log10(r_end / r0))
    base = np.geomspace(r0, r_end, int(4 * decades) + 2)
    if window is not None and window[1] > window[0]:
        base = np.concatenate([base, np.linspace(window[0], window[1], 129)])
    if r > 0:
        steps = 2.0 ** (-np.arange(1, 27))
        graded = np.concatenate([r * (1.0 - steps), r * (1.0 + steps)])
        graded = graded[(graded > 0) & (graded < r_end)]
        bounds = np.unique(np.concatenate([base, graded, [0.0, r_end]]))
    else:
        bounds = np.unique(np.concatenate([base, [0.0, r_end]]))
    return bounds


def _riesz_integral_at(fn, tail: Optional[PowerTail], spec: GridSpec, n: int,
                       r: float, r_end: float, kernel_power: float,
                       window: Optional[tuple] = None) -> float:
    """int_0^inf s^{n-1} f(s) K_p(r, s) ds with declared-tail completion."""
    bounds = _source_panels(spec, r, r_end, window)
    pts, wts = _panel_points(bounds)
    if r > 0:
        keep = np.abs(pts - r) > 1e-13 * r
        pts, wts = pts[keep], wts[keep]
    K = avg_power(n, kernel_power, np.full_like(pts, r), pts)
    main = float(np.dot(wts, pts ** (n - 1) * np.asarray(fn(pts), dtype=float) * K))

    tail_val = 0.0
    if tail is not None and np.isfinite(tail.power):
        q = tail.power
        coeff = tail.coeff
        if coeff is None:
            coeff = float(fn(np.array([r_end]))[0]) * r_end**q
        far = 1.0e9
        tb = np.geomspace(r_end, far, 61)
        tp, tw = _panel_points(tb)
        Kt = avg_power(n, kernel_power, np.full_like(tp, r), tp)
        tail_val = coeff * float(np.dot(tw, tp ** (n - 1 - q) * Kt))
        # beyond `far` the kernel is s^-p to high accuracy
        tail_val += coeff * far ** (n - q - kernel_power) / (q + kernel_power - n)
    return main + tail_val


def riesz_potential_order1(f: GridFunction, n: int,
                           window: Optional[tuple] = None) -> GridFunction:
    """I_1 f on the grid for odd n >= 3, radial f with declared decay q > 1.

    The angular reduction turns the convolution into a 1-D integral of
    s^{n-1} f(s) K_{n-1}(r, s); the kernel's log singularity at s = r is
    handled by dyadic panel grading, and the declared power tail is
    integrated out to effective infinity.
    """
    if n < 3 or n % 2 == 0:
        raise DimensionError(f"order-1 Riesz potential implemented for odd n >= 3, got {n}")
    if f.tail is not None and np.isfinite(f.tail.power) and f.tail.power <= 1.0:
        raise DivergentPotentialError(
            f"input decays like r^-{f.tail.power}; need decay faster than r^-1"
        )
    spec = f.spec
    r_end = min(spec.tail_cutoff, reliable_radius(f))
    pref = riesz_order1_constant(n) * sphere_area(n)
    vals = np.array([
        pref * _riesz_integral_at(f, f.tail, spec, n, float(r), r_end, float(n - 1), window)
        for r in f.nodes
    ])
    if f.tail is not None and np.isfinite(f.tail.power):
        out_power = min(f.tail.power - 1.0, n - 1.0)
    else:
        out_power = n - 1.0
    return GridFunction(spec, f.nodes, vals, "even", PowerTail(out_power, None))


def half_laplacian(f: GridFunction, n: int, window: Optional[tuple] = None) -> GridFunction:
    """(-Delta)^{1/2} f = (-Delta)(I_1 f) (order-1 potential, then one
    spectral Laplacian)."""
    pot = riesz_potential_order1(f, n, window)
    lap = radial_laplacian(pot, n)
    tail = PowerTail(f.tail.power + 1.0, None) if (f.tail and np.isfinite(f.tail.power)) else None
    return GridFunction(f.spec, f.nodes, -lap.values, "even", tail)


# ---------------------------------------------------------------------------
# Hankel (radial Fourier) backend, n = 3


def hankel_half_laplacian(f: GridFunction, n: int = 3, box: float = 400.0,
                          log2_points: int = 18) -> GridFunction:
    """(-Delta)^{1/2} f via the radial sine transform, for n = 3 only.

    With h = r f(r) and G(rho) = int_0^inf h sin(rho r) dr, the output is
    (2/(pi r)) int_0^inf rho G(rho) sin(r rho) drho.  Both transforms run
    on a uniform grid through the type-I DST; a declared r^-2 tail of f is
    completed analytically through the sine integral.  An aliasing check
    requires the multiplied spectrum rho*G to have died out before the
    Nyquist end.
    """
    if n != 3:
        raise DimensionError(f"Hankel backend implemented for n = 3 only, got {n}")
    M = 2**log2_points
    delta = box / M
    r_uni = delta * np.arange(M)
    h = np.empty(M)
    h[0] = 0.0
    for start in range(1, M, 16384):
        stop = min(start + 16384, M)
        h[start:stop] = r_uni[start:stop] * np.asarray(f(r_uni[start:stop]), dtype=float)
    rho = math.pi / box * np.arange(1, M)

    # An r^-2 tail is removed as the exact model A/(1+r^2) (sine transform
    # A (pi/2) e^-rho) so the numerically transformed remainder decays like
    # r^-4 and truncation at the box is harmless.  Other finite powers get
    # a stationary-phase correction valid away from rho ~ 0.
    G_model = np.zeros_like(rho)
    if f.tail is not None and np.isfinite(f.tail.power):
        q = f.tail.power
        coeff = f.tail.coeff if f.tail.coeff is not None else float(f(box)) * box**q
        if abs(q - 2.0) < 1e-9:
            h -= coeff * r_uni / (1.0 + r_uni**2)
            G_model = coeff * 0.5 * math.pi * np.exp(-rho)
        elif abs(coeff) * box ** (1.0 - q) > 1e-14:
            beta = q - 1.0
            G_model = np.where(
                rho * box > 20.0,
                coeff * (np.cos(rho * box) / (rho * box**beta)
                         + beta * np.sin(rho * box) / (rho**2 * box ** (beta + 1.0))),
                0.0,
            )
            logger.warning("Hankel tail power %g handled asymptotically only", q)
    G = 0.5 * delta * dst(h[1:], type=1) + G_model

    F = rho * G
    scale = np.max(np.abs(F))
    top = np.abs(F[int(0.9 * (M - 1)):])
    if scale > 0 and np.max(top) > f.spec.rel_tol * scale:
        raise AliasingError(
            f"spectral tail {np.max(top)/scale:.2e} of rho*G exceeds rel_tol "
            f"{f.spec.rel_tol:.1e}; input under-resolved on the transform grid"
        )

    h2 = dst(F, type=1) / box
    g2 = np.empty(M)
    g2[1:] = h2 / r_uni[1:]
    g2[0] = (2.0 / math.pi) * (math.pi / box) * float(np.dot(rho, F))

    spline = CubicSpline(r_uni, g2)
    r_eval = 0.45 * box
    nodes = f.nodes
    vals = np.empty_like(nodes)
    near = nodes <= r_eval
    vals[near] = spline(nodes[near])
    q_out = (f.tail.power + 1.0) if (f.tail and np.isfinite(f.tail.power)) else n + 1.0
    window = (r_uni > 0.8 * r_eval) & (r_uni <= r_eval)
    b_coeff = float(np.median(g2[window] * r_uni[window] ** q_out))
    vals[~near] = b_coeff * nodes[~near] ** (-q_out)
    return GridFunction(f.spec, nodes, vals, "even", PowerTail(q_out, b_coeff))


# ---------------------------------------------------------------------------
# dispatcher


@dataclass(frozen=True)
class FracLapResult:
    """Pointwise (-Delta)^{n/2} u with method and quality metadata."""

    field: GridFunction
    method: str
    tail_model: PowerTail
    condition_estimate: float
    cross_difference: Optional[float] = None
    source: Optional[RadialProfile] = None
    n: int = 0


def _weighted_l1_reldiff(a: GridFunction, b: GridFunction, n: int, r_max: float = 50.0) -> float:
    from .grids import radial_quadrature

    # |a-b| is kinked and interpolant-backed; 1e-4 settle is plenty here
    num = radial_quadrature(lambda r: np.abs(a(r) - b(r)), a.spec, n, r_max, rel_tol=1e-4)
    den = radial_quadrature(lambda r: np.abs(a(r)), a.spec, n, r_max, rel_tol=1e-4)
    return num / max(den, 1e-300)


def _measured_tail(field_vals: np.ndarray, nodes: np.ndarray, power: float,
                   spec: GridSpec) -> PowerTail:
    """Tail coefficient matched at the last nodes still above the grid's
    interpolation floor (where radial integration of the field stops), so
    the model continues the actual field; measuring deeper would fit
    noise.  Conservative: the true field decays at least this fast."""
    peak = np.max(np.abs(field_vals))
    if peak == 0.0:
        return PowerTail(power, 0.0)
    one_minus_t = 1.0 - spec.t_of_r(nodes)
    F = np.abs(field_vals) * one_minus_t**2
    floor = 64.0 * np.finfo(float).eps * F.max()
    usable = np.nonzero((nodes >= 3.0 * spec.map_scale) & (F >= floor))[0]
    if len(usable) == 0:
        return PowerTail(power, None)
    sel = usable[-6:]
    coeff = float(np.median(field_vals[sel] * nodes[sel] ** power))
    return PowerTail(power, coeff)


def fractional_power_laplacian(u: RadialProfile, n: int,
                               spec: Optional[GridSpec] = None,
                               cross_check: Optional[bool] = None,
                               cross_tol: float = CROSS_TOL) -> FracLapResult:
    """(-Delta)^{n/2} u on the grid, dispatching on the parity of n.

    Even n: exact iterated radial Laplacian from the profile's derivative
    stack.  Odd n: Riesz route; profiles with analytic derivatives to order
    n+1 use the commuted form I_1[(-Delta)^{(n+1)/2} u], grid-backed
    profiles the literal (-Delta)(I_1[(-Delta)^{(n-1)/2} u]).  For n = 3
    the Hankel backend cross-validates the Riesz route within cross_tol in
    the r^{n-1}-weighted L1 norm.

    The returned tail model follows the r^{-(n+2)} convention for
    integrands of the total-curvature integral, with coefficient measured
    where values are still above cancellation noise.
    """
    if n < 2:
        raise DimensionError(f"dimension must be >= 2, got {n}")
    spec = spec or GridSpec()
    data = _grid_data(spec)
    nodes = data.r
    alpha = u.tail.alpha if u.tail is not None else 0.0

    if n % 2 == 0:
        m = n // 2
        if u.k_max >= 2 * m:
            vals = profile_neg_lap_power(u, n, m, nodes)
            cond = np.finfo(float).eps * (m + 1)
        else:
            gf = GridFunction.from_callable(spec, u.u, "even")
            vals = iterated_laplacian(gf, n, m).values
            cond = iterated_condition(spec, m)
        tail = _measured_tail(vals, nodes, n + 2.0, spec)
        field = GridFunction(spec, nodes, vals, "even", tail,
                             evaluator=(lambda r: profile_neg_lap_power(u, n, m, r))
                             if u.k_max >= 2 * m and not u.grid_backed else None)
        return FracLapResult(field, "even-iterated", tail, cond, None, u, n)

    m = (n - 1) // 2
    commuted = (u.k_max >= n + 1) and not u.grid_backed
    q_evaluator = None
    if commuted:
        g_vals = profile_neg_lap_power(u, n, m + 1, nodes)
        g_tail = PowerTail(n + 1.0, _log_tail_coeff(alpha, n, m + 1) if u.tail else None)
        g = GridFunction(spec, nodes, g_vals, "even", g_tail,
                         evaluator=lambda r: profile_neg_lap_power(u, n, m + 1, r))
        pot = riesz_potential_order1(g, n, window=u.structure_window)
        q_vals = pot.values
        cond = np.finfo(float).eps * (m + 2)
        method = "odd-riesz"
        if u.structure_window is not None:
            # bump-shell fields are not polynomially representable on the
            # grid to useful accuracy; keep the quadrature as the evaluator
            pref = riesz_order1_constant(n) * sphere_area(n)

            def q_evaluator(r, _g=g, _w=u.structure_window, _pref=pref):
                r_arr = np.atleast_1d(np.asarray(r, dtype=float))
                out = np.array([
                    _pref * _riesz_integral_at(_g, _g.tail, spec, n, float(x),
                                               spec.tail_cutoff, float(n - 1), _w)
                    for x in r_arr
                ])
                return out if np.ndim(r) else float(out[0])
    else:
        g_vals = profile_neg_lap_power(u, n, m, nodes)
        g_tail = PowerTail(n - 1.0, _log_tail_coeff(alpha, n, m) if u.tail else None)
        g = GridFunction(spec, nodes, g_vals, "even", g_tail)
        q_vals = half_laplacian(g, n, window=u.structure_window).values
        cond = iterated_condition(spec, 1)
        method = "odd-riesz"

    tail = _measured_tail(q_vals, nodes, n + 2.0, spec)
    field = GridFunction(spec, nodes, q_vals, "even", tail, evaluator=q_evaluator)

    cross_diff = None
    if cross_check is None:
        cross_check = n == 3
    if cross_check and n == 3:
        g1_vals = profile_neg_lap_power(u, n, 1, nodes)
        g1 = GridFunction(spec, nodes, g1_vals, "even",
                          PowerTail(2.0, _log_tail_coeff(alpha, n, 1) if u.tail else None),
                          evaluator=lambda r: profile_neg_lap_power(u, n, 1, r))
        alt = hankel_half_laplacian(g1, n)
        cross_diff = _weighted_l1_reldiff(field, alt, n)
        if cross_diff > cross_tol:
            raise BackendDisagreementError(
                f"odd backends disagree: weighted-L1 relative gap {cross_diff:.2e} > {cross_tol:.1e}"
            )
        method = "odd-riesz+hankel"

    return FracLapResult(field, method, tail, cond, cross_diff, u, n)


# ---------------------------------------------------------------------------
# log potential and slope limits


@dataclass(frozen=True)
class PotentialResult:
    """v = C_n^{-1} (log|y|/|x-y|) * q and its slope limits.

    slope_at_zero extrapolates r v'(r) as r -> 0 (must vanish);
    slope_at_infinity extrapolates r v'(r) as r -> infinity (equals
    -TotalQ/C_n); constant_c is the fitted additive constant of u - v.
    """

    v: GridFunction
    slope_at_zero: LimitEstimate
    slope_at_infinity: LimitEstimate
    constant_c: float


def abs_radial_integral(f: GridFunction, n: int) -> float:
    """integral of |f| over R^n (hypothesis check for absolute convergence)."""
    tail = None
    if f.tail is not None:
        tail = PowerTail(f.tail.power, abs(f.tail.coeff) if f.tail.coeff is not None else None)
    absf = GridFunction(f.spec, f.nodes, np.abs(f.values), f.parity_at_origin, tail,
                        evaluator=(lambda r: np.abs(f(r))) if f.evaluator is not None else None)
    return integrate_radial(absf, n)


def _slope_integrand_at(q: GridFunction, n: int, r: float, r_end: float) -> float:
    """sigma(r) = r v'(r) against the field q, via the K_2 mean kernel."""
    bounds = _source_panels(q.spec, r, r_end)
    pts, wts = _panel_points(bounds)
    keep = np.abs(pts - r) > 1e-13 * max(r, 1e-300)
    pts, wts = pts[keep], wts[keep]
    K2 = avg_power(n, 2.0, np.full_like(pts, r), pts)
    M = 0.5 * (1.0 + (r**2 - pts**2) * K2)
    val = float(np.dot(wts, pts ** (n - 1) * np.asarray(q(pts), dtype=float) * M))
    return -sphere_area(n) / green_constant(n) * val


def log_potential(qres: FracLapResult, n: Optional[int] = None,
                  slope_base: float = 100.0) -> PotentialResult:
    """Potential v from the curvature field, slope limits, and u - v fit.

    Requires the field to be absolutely integrable; radial reduction uses
    the sphere-averaged log kernel, and the slope r v'(r) its own mean
    kernel (1 + (r^2-s^2) K_2(r,s))/2, which tends to 1 as r -> infinity
    and to 0 as r -> 0.
    """
    n = n or qres.n
    q = qres.field
    spec = q.spec
    try:
        abs_total = abs_radial_integral(q, n)
    except Exception as exc:
        raise HypothesisViolationError(f"field is not absolutely integrable: {exc}") from exc
    if not np.isfinite(abs_total):
        raise HypothesisViolationError("field is not absolutely integrable")

    r_end = min(spec.tail_cutoff, reliable_radius(q))
    pref = sphere_area(n) / green_constant(n)

    def v_at(r: float) -> float:
        bounds = _source_panels(spec, r, r_end)
        pts, wts = _panel_points(bounds)
        keep = np.abs(pts - r) > 1e-13 * max(r, 1e-300)
        pts, wts = pts[keep], wts[keep]
        lam = avg_log(n, np.full_like(pts, r), pts) if r > 0 else np.log(pts)
        integrand = pts ** (n - 1) * np.asarray(q(pts), dtype=float) * (np.log(pts) - lam)
        return pref * float(np.dot(wts, integrand))

    v_vals = np.array([v_at(float(r)) if r > 0 else 0.0 for r in q.nodes])
    v = GridFunction(spec, q.nodes, v_vals, "even")

    inf_radii = slope_base * 2.0 ** np.arange(6)
    inf_samples = [(r, _slope_integrand_at(q, n, float(r), r_end)) for r in inf_radii]
    slope_inf = extrapolate_limit(inf_samples, 2.0, rel_tol=1e-4)

    zero_radii = 1.0e-2 * spec.map_scale * 0.5 ** np.arange(6)
    zero_samples = [(r, _slope_integrand_at(q, n, float(r), r_end)) for r in zero_radii]
    slope_zero = extrapolate_limit(zero_samples, 0.5, rel_tol=1e-4)

    constant_c = math.nan
    if qres.source is not None:
        window = (q.nodes >= 1e-3) & (q.nodes <= 1e3)
        constant_c = float(np.median(qres.source.u(q.nodes[window]) - v_vals[window]))
    return PotentialResult(v, slope_zero, slope_inf, constant_c)


# ---------------------------------------------------------------------------
# fundamental-constant recovery


def green_constant_check(n: int, cap: str = "rational",
                         spec: Optional[GridSpec] = None) -> float:
    """Total integral of (-Delta)^{n/2} applied to a unit-log-slope profile.

    The result depends only on the log coefficient, so it recovers C_n for
    any smooth cap; compare against green_constant(n).
    """
    if not (2 <= n <= 8):
        raise DimensionError(f"supported dimensions are 2..8, got {n}")
    from .profiles import capped_log_profile

    profile = capped_log_profile(cap)
    res = fractional_power_laplacian(profile, n, spec=spec)
    return integrate_radial(res.field, n)
