"""Hypothesis checks and per-metric theorem reports; parameter sweeps.

A report passes when the three hypotheses hold (completeness, sampled
scalar-curvature nonnegativity near infinity, absolutely convergent
curvature integrand), the total curvature respects its upper bound within
tol_bound, and the two sides of the deficit identity agree within
tol_deficit with converged limits.  Reports are produced for
hypothesis-violating metrics too: negative controls must be seen to
violate the bound rather than be refused.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .grids import GridSpec
from .metric import (
    ConformalMetric,
    CurvatureReport,
    DeficitReport,
    HypothesisFlags,
    completeness_check,
    deficit,
    total_q,
)

logger = logging.getLogger(__name__)

TOL_BOUND_REL = 1.0e-3
TOL_DEFICIT = 1.0e-2


@dataclass(frozen=True)
class TheoremReport:
    """Everything verified about one metric."""

    descriptor: str
    n: int
    family: str
    param: float
    hypothesis_flags: HypothesisFlags
    curvature: CurvatureReport
    deficit: DeficitReport
    verdict: str  # pass | fail | inconclusive
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class SweepPlan:
    family: str
    parameters: Tuple[float, ...]
    dimensions: Tuple[int, ...]
    grid: GridSpec = field(default_factory=GridSpec)
    tol_bound_rel: float = TOL_BOUND_REL
    tol_deficit: float = TOL_DEFICIT

    def __post_init__(self):
        if len(self.parameters) == 0 or len(self.dimensions) == 0:
            raise ConfigurationError("sweep plan needs nonempty parameter and dimension lists")


def check_hypotheses(metric: ConformalMetric) -> HypothesisFlags:
    """Completeness, scalar-curvature sign near infinity, |Q|-integrability."""
    report = total_q(metric)
    return report.hypothesis_flags


def _decide_verdict(flags: HypothesisFlags, curvature: CurvatureReport,
                    deficit_report: DeficitReport, tol_bound_rel: float,
                    tol_deficit: float) -> Tuple[str, List[str]]:
    """Pure verdict logic (monotone in the hypothesis flags)."""
    notes: List[str] = []
    limits_ok = deficit_report.rhs.converged or deficit_report.branch not in (None, "zero-deficit: unclassified")
    if not np.isfinite(curvature.total_q):
        return "inconclusive", ["total curvature did not evaluate"]
    if not limits_ok:
        notes.append("isoperimetric-ratio limit did not converge")
        return "inconclusive", notes

    tol_bound = tol_bound_rel * curvature.bound_Cn
    bound_ok = curvature.bound_residual >= -tol_bound
    if deficit_report.branch is not None and deficit_report.branch != "zero-deficit: unclassified":
        deficit_ok = True
        notes.append(deficit_report.branch)
    else:
        deficit_ok = deficit_report.residual <= tol_deficit

    if flags.all_true():
        if bound_ok and deficit_ok:
            return "pass", notes
        if not bound_ok:
            notes.append(
                f"bound violated with hypotheses satisfied: residual {curvature.bound_residual:.3e}"
            )
        if not deficit_ok:
            notes.append(f"deficit mismatch {deficit_report.residual:.3e} > {tol_deficit:.1e}")
        return "fail", notes

    notes.append("hypotheses violated")
    if not bound_ok:
        notes.append(
            f"expected-violation: total curvature exceeds the bound by {-curvature.bound_residual:.6g}"
        )
    return "fail", notes


def verify_theorem(metric: ConformalMetric, family: str = "custom", param: float = math.nan,
                   tol_bound_rel: float = TOL_BOUND_REL,
                   tol_deficit: float = TOL_DEFICIT) -> TheoremReport:
    """Full report: hypotheses, bound residual, both deficit sides, verdict."""
    diagnostics: List[str] = []
    try:
        curvature = total_q(metric)
        deficit_report = deficit(metric, curvature)
        verdict, notes = _decide_verdict(curvature.hypothesis_flags, curvature,
                                         deficit_report, tol_bound_rel, tol_deficit)
        diagnostics.extend(notes)
        flags = curvature.hypothesis_flags
    except Exception as exc:  # degrade, never raise out of a sweep item
        logger.exception("verification failed for %s", metric.label)
        flags = HypothesisFlags(None, None, False)
        curvature = CurvatureReport(math.nan, math.nan, math.nan, math.nan, flags, {})
        deficit_report = DeficitReport(math.nan, None, None, math.inf)  # type: ignore[arg-type]
        verdict = "inconclusive"
        diagnostics.append(f"internal failure: {exc!r}")
    comp = completeness_check(metric) if verdict != "inconclusive" else None
    if comp is not None and comp.marginal:
        diagnostics.append(comp.detail)
    return TheoremReport(
        descriptor=f"{metric.label} (n={metric.n})",
        n=metric.n,
        family=family,
        param=param,
        hypothesis_flags=flags,
        curvature=curvature,
        deficit=deficit_report,
        verdict=verdict,
        diagnostics=tuple(diagnostics),
    )


def _build_metric(family: str, param: float, n: int, grid: GridSpec) -> ConformalMetric:
    from .metric import family_alpha, flat_profile, sphere_factor

    if family == "alpha":
        return ConformalMetric(n, family_alpha(param), grid)
    if family == "flat":
        return ConformalMetric(n, flat_profile(), grid)
    if family == "sphere_factor":
        return ConformalMetric(n, sphere_factor(), grid)
    raise ConfigurationError(f"unknown family {family!r}; supported: alpha, flat, sphere_factor")


def run_sweep(plan: SweepPlan, jobs: int = 1) -> List[TheoremReport]:
    """Reports for every (dimension, parameter) pair, in plan order.

    Items are pure and independent; any parallelism is joined back in plan
    order, so output is deterministic for every jobs setting.
    """
    items = [(n, p) for n in plan.dimensions for p in plan.parameters]

    def work(item):
        n, p = item
        metric = _build_metric(plan.family, p, n, plan.grid)
        return verify_theorem(metric, family=plan.family, param=p,
                              tol_bound_rel=plan.tol_bound_rel, tol_deficit=plan.tol_deficit)

    if jobs <= 1:
        return [work(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, items))
