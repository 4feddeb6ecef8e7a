"""Conformal metrics g = e^{2u} g_0: curvature, volumes, and both sides of
the isoperimetric-deficit identity.

For radial u the working quantities are

    S(r)      = -2(n-1) e^{-2u} (Delta u + (n-2)/2 u'^2)        scalar curvature
    TotalQ    = int (-Delta)^{n/2} u dH^n                        total curvature
    v_g(B_r)  = n omega_n int_0^r e^{nu} rho^{n-1} drho          metric volume
    s_g(dB_r) = n omega_n r^{n-1} e^{(n-1)u(r)}                  metric area

and, in cylindrical coordinates t = log r with w(t) = t + u(e^t),

    V_{n-1} = omega_n e^{(n-1)w},
    V_{n-2} = omega_n e^{(n-2)w} w'   (equivalently via H_1),
    V_{n-3} = omega_n e^{(n-3)w} w'^2 (equivalently via H_2),

where H_1 = (n-1) e^{-u}(1/r + u') and H_2 = ((n-1)(n-2)/2) e^{-2u}
(1/r + u')^2 are the first two symmetric functions of the principal
curvatures of the metric sphere.  The deficit identity equates

    1 - TotalQ/C_n  =  lim  s_g^{n/(n-1)} / ((n omega_n^{1/n})^{n/(n-1)} v_g)

with the intermediate mixed-volume ratio
V_{n-3}^{(n-2)/(n-1)} / (omega_n^{1/(n-1)} V_{n-2}^{(n-3)/(n-1)}) = w'(t)
converging to the same limit.  Limits are taken at geometric radii
r = 10 * 2^k, k = 0..5, through iterated-Aitken extrapolation.

Hypotheses are operationalized as: completeness from the declared tail
(alpha < 1 complete, alpha > 1 incomplete, alpha = 1 complete within the
declared power-correction class); scalar-curvature nonnegativity near
infinity as min sampled S on [1e2, tail_cutoff] >= -1e-8 together with a
nonnegative leading tail term (sign alpha(2-alpha)); absolute convergence
of the curvature integrand from its declared tail power and quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DomainError, TailDivergenceError
from .fraclap import (
    FracLapResult,
    abs_radial_integral,
    fractional_power_laplacian,
    green_constant,
)
from .grids import (
    GridSpec,
    LimitEstimate,
    extrapolate_limit,
    integrate_radial,
    radial_quadrature,
    sphere_area,
    unit_ball_volume,
)
from .profiles import RadialProfile, family_alpha, flat_profile, sphere_factor

__all__ = [
    "ConformalMetric", "CurvatureReport", "DeficitReport", "MixedVolumes",
    "HypothesisFlags", "CompletenessResult", "family_alpha", "sphere_factor",
    "flat_profile", "scalar_curvature", "total_q", "completeness_check",
    "volume", "area", "mixed_volumes", "deficit",
]

logger = logging.getLogger(__name__)

SCAL_SCAN_START = 100.0
SCAL_TOL = 1.0e-8
DEFICIT_RADII = 10.0 * 2.0 ** np.arange(6)
ZERO_LHS_TOL = 1.0e-3


@dataclass(frozen=True)
class ConformalMetric:
    """Dimension n plus a radial profile or a non-radial field."""

    n: int
    factor: Union[RadialProfile, "NonRadialField"]  # noqa: F821
    spec: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n}")

    @property
    def radial(self) -> bool:
        return isinstance(self.factor, RadialProfile)

    def profile(self) -> RadialProfile:
        """The radial factor, symmetrizing a non-radial field first."""
        if self.radial:
            return self.factor
        from .symmetrize import symmetrized_profile

        return symmetrized_profile(self.factor, self.spec)

    @property
    def label(self) -> str:
        return getattr(self.factor, "label", "field")


@dataclass(frozen=True)
class HypothesisFlags:
    complete: Optional[bool]
    scal_nonneg_at_infinity: Optional[bool]
    q_abs_convergent: bool

    def all_true(self) -> bool:
        return bool(self.complete) and bool(self.scal_nonneg_at_infinity) and self.q_abs_convergent


@dataclass(frozen=True)
class CompletenessResult:
    complete: Optional[bool]  # None = inconclusive (undeclared tail)
    marginal: bool
    detail: str


@dataclass(frozen=True)
class CurvatureReport:
    total_q: float
    abs_total_q: float
    bound_Cn: float
    bound_residual: float
    hypothesis_flags: HypothesisFlags
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MixedVolumes:
    t: float
    V_n: float
    V_nm1: float
    V_nm2: float
    V_nm3: float
    w: float
    dw_dt: float
    h1: float
    h2: float
    V_nm2_h_route: float
    V_nm3_h_route: float


@dataclass(frozen=True)
class DeficitReport:
    lhs: float
    rhs: LimitEstimate
    intermediate: LimitEstimate
    residual: float
    branch: Optional[str] = None


# ---------------------------------------------------------------------------
# pointwise curvature


def scalar_curvature(metric: ConformalMetric, r) -> float:
    """S(r) for a radial metric; r = 0 through the even limit."""
    prof = metric.factor if metric.radial else metric.profile()
    n = metric.n
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    u0 = prof.d(r_arr, 0)
    u1 = prof.d(r_arr, 1)
    u2 = prof.d(r_arr, 2)
    lap = np.empty_like(r_arr)
    pos = r_arr > 0
    lap[pos] = u2[pos] + (n - 1) * u1[pos] / r_arr[pos]
    lap[~pos] = n * u2[~pos]
    s = -2.0 * (n - 1) * np.exp(-2.0 * u0) * (lap + 0.5 * (n - 2) * u1**2)
    return float(s[0]) if np.ndim(r) == 0 else s


def _scal_nonneg(metric: ConformalMetric) -> tuple:
    """(flag, min sampled S, detail): sampled nonnegativity near infinity."""
    prof = metric.factor if metric.radial else metric.profile()
    radii = np.geomspace(SCAL_SCAN_START, metric.spec.tail_cutoff, 200)
    min_s = float(np.min(scalar_curvature(ConformalMetric(metric.n, prof, metric.spec), radii)))
    if not metric.radial:
        from .symmetrize import shell_scalar_min

        inner = shell_scalar_min(metric.factor, metric.n)
        detail_inner = f"; min over bump shells {inner:.3e}"
    else:
        detail_inner = ""
    tail_ok = True
    tail_sign = 0.0
    if prof.tail is not None:
        a = prof.tail.alpha
        tail_sign = a * (2.0 - a)
        tail_ok = tail_sign >= -1e-12
    flag = bool(min_s >= -SCAL_TOL and tail_ok)
    detail = (f"min sampled S on [{SCAL_SCAN_START:g}, {metric.spec.tail_cutoff:g}] = "
              f"{min_s:.3e}; leading tail sign term alpha(2-alpha) = {tail_sign:.3e}{detail_inner}")
    return flag, min_s, detail


def completeness_check(metric: ConformalMetric) -> CompletenessResult:
    """Ray-length criterion int e^u dr = infinity from the declared tail.

    alpha < 1 complete, alpha > 1 incomplete.  At alpha = 1, e^u ~ e^c / r
    within the declared power-correction class, so the ray integral always
    diverges and the metric is classified complete (marginal).
    """
    prof = metric.factor if metric.radial else metric.profile()
    if prof.tail is None:
        return CompletenessResult(None, False, "no declared tail; completeness undecidable")
    a = prof.tail.alpha
    if a < 1.0:
        return CompletenessResult(True, False, f"tail slope alpha={a:g} < 1: ray length diverges")
    if a > 1.0:
        return CompletenessResult(False, False, f"tail slope alpha={a:g} > 1: finite ray length")
    return CompletenessResult(
        True, True,
        "alpha = 1: e^u ~ e^c/r within the declared power-correction class, "
        "harmonic-series divergence of ray length",
    )


# ---------------------------------------------------------------------------
# total curvature


def total_q(metric: ConformalMetric, qres: Optional[FracLapResult] = None) -> CurvatureReport:
    """Total curvature report with bound residual and hypothesis flags.

    For non-radial fields the curvature field of the symmetrized profile is
    used (symmetrization preserves the total; compactly supported bumps
    carry zero flux), with the bump bookkeeping recorded in diagnostics.
    """
    n = metric.n
    diagnostics: dict = {}
    if metric.radial:
        prof = metric.factor
    else:
        prof = metric.profile()
        from .symmetrize import bump_flux_contributions

        fluxes = bump_flux_contributions(metric.factor)
        diagnostics["bump_fluxes"] = fluxes
    if qres is None:
        qres = fractional_power_laplacian(prof, n, spec=metric.spec)
    diagnostics["method"] = qres.method
    diagnostics["condition_estimate"] = qres.condition_estimate
    if qres.cross_difference is not None:
        diagnostics["backend_gap"] = qres.cross_difference

    q_ok = True
    try:
        total = integrate_radial(qres.field, n)
        abs_total = abs_radial_integral(qres.field, n)
    except TailDivergenceError as exc:
        q_ok = False
        total = math.nan
        abs_total = math.inf
        diagnostics["q_divergence"] = str(exc)
    if not metric.radial:
        total += sum(diagnostics["bump_fluxes"])

    comp = completeness_check(metric)
    scal_flag, min_s, scal_detail = _scal_nonneg(metric)
    diagnostics["completeness"] = comp.detail
    diagnostics["min_scalar_curvature"] = min_s
    diagnostics["scal_detail"] = scal_detail
    cn = green_constant(n)
    flags = HypothesisFlags(comp.complete, scal_flag, q_ok)
    return CurvatureReport(
        total_q=total,
        abs_total_q=abs_total,
        bound_Cn=cn,
        bound_residual=cn - total,
        hypothesis_flags=flags,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# volumes, areas, mixed volumes


def _shell_exp_mean(metric: ConformalMetric, p: float, r: float) -> float:
    """Mean of e^{p u} over the sphere of radius r."""
    if metric.radial:
        return math.exp(p * metric.factor.u(r))
    from .symmetrize import sphere_mean

    return sphere_mean(metric.factor, r, "exp_pu", p=p)


def volume(metric: ConformalMetric, r: float) -> float:
    """v_g(B_r) = n omega_n int_0^r mean(e^{nu}) rho^{n-1} drho."""
    if not (r > 0):
        raise DomainError(f"radius must be positive, got {r}")
    n = metric.n
    if metric.radial:
        prof = metric.factor
        return sphere_area(n) * radial_quadrature(
            lambda rho: np.exp(n * prof.u(rho)), metric.spec, n, r
        )
    base = ConformalMetric(n, metric.factor.base, metric.spec)
    return volume(base, r) + _bump_volume_correction(metric, r)


def _bump_volume_correction(metric: ConformalMetric, r: Optional[float] = None) -> float:
    """Volume excess of the field over its radial base, supported in the bump ball."""
    from .symmetrize import sphere_mean

    fld = metric.factor
    n = metric.n
    r_top = fld.support_radius if r is None else min(r, fld.support_radius)

    def excess(rho):
        rho_arr = np.atleast_1d(rho)
        vals = np.array([
            sphere_mean(fld, float(x), "exp_pu", p=float(n)) - math.exp(n * fld.base.u(float(x)))
            for x in rho_arr
        ])
        return vals if np.ndim(rho) else float(vals[0])

    return sphere_area(n) * radial_quadrature(excess, metric.spec, n, r_top, panels=24)


def area(metric: ConformalMetric, r: float) -> float:
    """s_g(dB_r) = n omega_n r^{n-1} mean(e^{(n-1)u})."""
    if not (r > 0):
        raise DomainError(f"radius must be positive, got {r}")
    n = metric.n
    return sphere_area(n) * r ** (n - 1) * _shell_exp_mean(metric, float(n - 1), r)


def mixed_volumes(metric: ConformalMetric, t: float) -> MixedVolumes:
    """Cylindrical mixed volumes at t = log r for a radial metric.

    Both the closed w-form and the principal-curvature route are returned;
    they agree identically for radial factors.
    """
    if not metric.radial:
        raise DomainError("cylindrical mixed volumes are defined for radial metrics")
    n = metric.n
    prof = metric.factor
    r = math.exp(t)
    u0 = prof.d(r, 0)
    u1 = prof.d(r, 1)
    w = t + u0
    dw = 1.0 + r * u1
    om = unit_ball_volume(n)
    v_n = volume(metric, r)
    v_nm1 = om * math.exp((n - 1) * w)
    v_nm2 = om * math.exp((n - 2) * w) * dw
    v_nm3 = om * math.exp((n - 3) * w) * dw**2
    h1 = (n - 1) * math.exp(-u0) * (1.0 / r + u1)
    h2 = 0.5 * (n - 1) * (n - 2) * math.exp(-2.0 * u0) * (1.0 / r + u1) ** 2
    v_nm2_h = (om / (n - 1)) * h1 * math.exp((n - 1) * w)
    v_nm3_h = (2.0 * om / ((n - 1) * (n - 2))) * h2 * math.exp((n - 1) * w) if n > 2 else v_nm3
    return MixedVolumes(t, v_n, v_nm1, v_nm2, v_nm3, w, dw, h1, h2, v_nm2_h, v_nm3_h)


# ---------------------------------------------------------------------------
# deficit identity


def _intermediate_ratio(metric: ConformalMetric, r: float) -> float:
    """V_{n-3}^{(n-2)/(n-1)} / (omega_n^{1/(n-1)} V_{n-2}^{(n-3)/(n-1)})."""
    n = metric.n
    om = unit_ball_volume(n)
    if metric.radial:
        mv = mixed_volumes(metric, math.log(r))
        v2, v3 = mv.V_nm2, mv.V_nm3
    else:
        from .symmetrize import general_mixed_volumes

        v2, v3 = general_mixed_volumes(metric.factor, metric.n, r)
    if v2 <= 0 or v3 < 0:
        return math.nan
    return v3 ** ((n - 2) / (n - 1)) / (om ** (1.0 / (n - 1)) * v2 ** ((n - 3) / (n - 1)))


def _isoperimetric_ratio(metric: ConformalMetric, r: float) -> float:
    n = metric.n
    s = area(metric, r)
    v = volume(metric, r)
    norm = (n * unit_ball_volume(n) ** (1.0 / n)) ** (n / (n - 1.0))
    return s ** (n / (n - 1.0)) / (norm * v)


def deficit(metric: ConformalMetric, curvature: Optional[CurvatureReport] = None) -> DeficitReport:
    """Both sides of the deficit identity with extrapolated limits.

    lhs = 1 - TotalQ/C_n; rhs extrapolates the normalized isoperimetric
    ratio along r = 10 * 2^k.  When lhs vanishes the limit is classified
    through the volume growth (bounded / unbounded branch, ratio -> 0)
    rather than forced through the extrapolant.
    """
    if curvature is None:
        curvature = total_q(metric)
    n = metric.n
    lhs = 1.0 - curvature.total_q / curvature.bound_Cn

    rhs_samples = [(float(r), _isoperimetric_ratio(metric, float(r))) for r in DEFICIT_RADII]
    rhs = extrapolate_limit(rhs_samples, 2.0, rel_tol=1e-3)
    int_samples = [(float(r), _intermediate_ratio(metric, float(r))) for r in DEFICIT_RADII]
    if all(np.isfinite(v) for _, v in int_samples):
        intermediate = extrapolate_limit(int_samples, 2.0, rel_tol=1e-3)
    else:
        intermediate = LimitEstimate(math.nan, math.inf, tuple(int_samples), False,
                                     ("nonpositive mixed volume",))

    branch = None
    if abs(lhs) <= ZERO_LHS_TOL:
        v_lo = volume(metric, float(DEFICIT_RADII[-2]))
        v_hi = volume(metric, float(DEFICIT_RADII[-1]))
        growing = v_hi > 1.1 * v_lo
        vals = [v for _, v in rhs_samples]
        decreasing = all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
        near_zero = (abs(intermediate.value) <= 1e-2) if np.isfinite(intermediate.value) else False
        if decreasing and near_zero:
            branch = ("zero-deficit: unbounded volume, ratio -> 0" if growing
                      else "zero-deficit: bounded volume, ratio -> 0")
        else:
            branch = "zero-deficit: unclassified"
    residual = abs(lhs - rhs.value) if np.isfinite(rhs.value) else math.inf
    return DeficitReport(lhs=lhs, rhs=rhs, intermediate=intermediate,
                         residual=residual, branch=branch)
