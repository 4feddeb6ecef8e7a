"""Command-line entry point: config ingestion, subcommands, report emission.

Subcommands: verify, sweep, kernel, green-check, deficit-table.  A JSON
config file (--config) carries the full run description; a few common
fields can be overridden from flags.  CSV output uses a fixed column order
with 12-significant-digit numbers; JSON mirrors the report fields at full
precision so parsing an emitted file reproduces the values bit-exactly.
Verbosity comes from the QDEFICIT_LOG environment variable.
"""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, QDeficitError
from .fraclap import green_constant, green_constant_check
from .grids import GridSpec
from .kernels import (
    avg_log,
    avg_power,
    kernel_I,
    monte_carlo_sphere_average,
)
from .verify import SweepPlan, TheoremReport, run_sweep

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("verify", "sweep", "kernel", "green-check", "deficit-table")
CSV_COLUMNS = ("n", "family", "param", "total_q", "Cn", "bound_residual",
               "lhs", "rhs", "rhs_err", "verdict")

_GRID_KEYS = ("node_count", "map_scale", "tail_cutoff", "rel_tol")
_TOL_KEYS = ("bound_rel", "deficit")
_OUTPUT_KEYS = ("dir", "format")
_KERNEL_KEYS = ("p", "decades", "points_per_decade", "mc_check")
_TOP_KEYS = ("subcommand", "family", "parameters", "dimensions", "grid", "tolerances",
             "controls_expected_violation", "output", "seed", "jobs", "kernel")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    family: str = "alpha"
    parameters: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    dimensions: Tuple[int, ...] = (3, 4)
    grid: GridSpec = field(default_factory=GridSpec)
    tol_bound_rel: float = 1.0e-3
    tol_deficit: float = 1.0e-2
    controls_expected_violation: bool = True
    out_dir: str = "."
    out_format: str = "csv"
    seed: int = 0
    jobs: int = 1
    kernel_p: Tuple[float, ...] = (1.0, 2.0)
    kernel_decades: int = 4
    kernel_points_per_decade: int = 4
    kernel_mc_check: bool = False


def _reject_unknown(mapping: dict, allowed: tuple, context: str):
    for key in mapping:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suggestion = f'; did you mean "{hint[0]}"?' if hint else ""
            raise ConfigurationError(f'unknown key "{key}" in {context}{suggestion}')


def _expect(value, types, path: str):
    if not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigurationError(f"{path}: expected {names}, got {type(value).__name__} ({value!r})")
    return value


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig from JSON text; unknown keys are rejected with a
    suggestion, out-of-range values with the offending path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if "subcommand" not in raw:
        raise ConfigurationError('config needs a "subcommand"')
    sub = _expect(raw["subcommand"], str, "subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigurationError(f"subcommand must be one of {SUBCOMMANDS}, got {sub!r}")

    kwargs: dict = {"subcommand": sub}
    if "family" in raw:
        fam = _expect(raw["family"], str, "family")
        if fam not in ("alpha", "flat", "sphere_factor"):
            raise ConfigurationError(f"family must be alpha/flat/sphere_factor, got {fam!r}")
        kwargs["family"] = fam
    if "parameters" in raw:
        params = _expect(raw["parameters"], list, "parameters")
        vals = tuple(float(_expect(v, (int, float), "parameters[*]")) for v in params)
        if kwargs.get("family", "alpha") == "alpha":
            for v in vals:
                if not (0.0 <= v < 2.0):
                    raise ConfigurationError(f"parameters[*]: alpha must lie in [0, 2), got {v}")
        kwargs["parameters"] = vals
    if "dimensions" in raw:
        dims = _expect(raw["dimensions"], list, "dimensions")
        out = []
        for v in dims:
            _expect(v, int, "dimensions[*]")
            lo = 2 if sub in ("green-check", "kernel") else 3
            if not (lo <= v <= 8):
                raise ConfigurationError(f"dimensions[*]: must lie in [{lo}, 8] for {sub}, got {v}")
            out.append(v)
        kwargs["dimensions"] = tuple(out)
    elif sub == "green-check":
        kwargs["dimensions"] = (2, 3, 4, 5, 6)
    if "grid" in raw:
        g = _expect(raw["grid"], dict, "grid")
        _reject_unknown(g, _GRID_KEYS, "grid")
        kwargs["grid"] = GridSpec(
            node_count=int(g.get("node_count", 256)),
            map_scale=float(g.get("map_scale", 1.0)),
            tail_cutoff=float(g.get("tail_cutoff", 1.0e6)),
            rel_tol=float(g.get("rel_tol", 1.0e-8)),
        )
    if "tolerances" in raw:
        t = _expect(raw["tolerances"], dict, "tolerances")
        _reject_unknown(t, _TOL_KEYS, "tolerances")
        if "bound_rel" in t:
            kwargs["tol_bound_rel"] = float(_expect(t["bound_rel"], (int, float), "tolerances.bound_rel"))
        if "deficit" in t:
            kwargs["tol_deficit"] = float(_expect(t["deficit"], (int, float), "tolerances.deficit"))
    if "controls_expected_violation" in raw:
        kwargs["controls_expected_violation"] = _expect(
            raw["controls_expected_violation"], bool, "controls_expected_violation")
    if "output" in raw:
        o = _expect(raw["output"], dict, "output")
        _reject_unknown(o, _OUTPUT_KEYS, "output")
        if "dir" in o:
            kwargs["out_dir"] = _expect(o["dir"], str, "output.dir")
        if "format" in o:
            fmt = _expect(o["format"], str, "output.format")
            if fmt not in ("csv", "json", "both"):
                raise ConfigurationError(f"output.format must be csv/json/both, got {fmt!r}")
            kwargs["out_format"] = fmt
    if "seed" in raw:
        kwargs["seed"] = _expect(raw["seed"], int, "seed")
    if "jobs" in raw:
        jobs = _expect(raw["jobs"], int, "jobs")
        if jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
        kwargs["jobs"] = jobs
    if "kernel" in raw:
        kz = _expect(raw["kernel"], dict, "kernel")
        _reject_unknown(kz, _KERNEL_KEYS, "kernel")
        if "p" in kz:
            kwargs["kernel_p"] = tuple(float(v) for v in _expect(kz["p"], list, "kernel.p"))
        if "decades" in kz:
            kwargs["kernel_decades"] = _expect(kz["decades"], int, "kernel.decades")
        if "points_per_decade" in kz:
            kwargs["kernel_points_per_decade"] = _expect(kz["points_per_decade"], int, "kernel.points_per_decade")
        if "mc_check" in kz:
            kwargs["kernel_mc_check"] = _expect(kz["mc_check"], bool, "kernel.mc_check")
    return RunConfig(**kwargs)


# ---------------------------------------------------------------------------
# emission


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _report_row(rep: TheoremReport) -> List[str]:
    rhs = rep.deficit.rhs.value if rep.deficit.rhs is not None else math.nan
    rhs_err = rep.deficit.rhs.error_bar if rep.deficit.rhs is not None else math.nan
    return [_fmt(v) for v in (
        rep.n, rep.family, rep.param, rep.curvature.total_q, rep.curvature.bound_Cn,
        rep.curvature.bound_residual, rep.deficit.lhs, rhs, rhs_err, rep.verdict,
    )]


def _report_json(rep: TheoremReport) -> dict:
    return {
        "descriptor": rep.descriptor,
        "n": rep.n,
        "family": rep.family,
        "param": rep.param,
        "hypothesis_flags": {
            "complete": rep.hypothesis_flags.complete,
            "scal_nonneg_at_infinity": rep.hypothesis_flags.scal_nonneg_at_infinity,
            "q_abs_convergent": rep.hypothesis_flags.q_abs_convergent,
        },
        "curvature": {
            "total_q": rep.curvature.total_q,
            "abs_total_q": rep.curvature.abs_total_q,
            "bound_Cn": rep.curvature.bound_Cn,
            "bound_residual": rep.curvature.bound_residual,
        },
        "deficit": {
            "lhs": rep.deficit.lhs,
            "rhs": rep.deficit.rhs.value if rep.deficit.rhs is not None else None,
            "rhs_error_bar": rep.deficit.rhs.error_bar if rep.deficit.rhs is not None else None,
            "rhs_converged": rep.deficit.rhs.converged if rep.deficit.rhs is not None else None,
            "rhs_samples": list(map(list, rep.deficit.rhs.samples)) if rep.deficit.rhs is not None else None,
            "intermediate": rep.deficit.intermediate.value if rep.deficit.intermediate is not None else None,
            "intermediate_samples": (list(map(list, rep.deficit.intermediate.samples))
                                     if rep.deficit.intermediate is not None else None),
            "residual": rep.deficit.residual,
            "branch": rep.deficit.branch,
        },
        "verdict": rep.verdict,
        "diagnostics": list(rep.diagnostics),
    }


def emit_reports(reports: List[TheoremReport], config: RunConfig) -> Tuple[List[Path], int]:
    """Write CSV/JSON files; exit code 0 iff no (non-control) fail verdicts."""
    if not reports:
        raise ConfigurationError("no reports to emit")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: List[Path] = []
    if config.out_format in ("csv", "both"):
        lines = [",".join(CSV_COLUMNS)]
        lines += [",".join(_report_row(r)) for r in reports]
        p = out_dir / "reports.csv"
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    if config.out_format in ("json", "both"):
        payload = {
            "seed": config.seed,
            "subcommand": config.subcommand,
            "reports": [_report_json(r) for r in reports],
        }
        p = out_dir / "reports.json"
        p.write_text(json.dumps(payload, indent=1))
        paths.append(p)

    failures = 0
    for rep in reports:
        if rep.verdict != "fail":
            continue
        is_control = not rep.hypothesis_flags.all_true()
        if is_control and config.controls_expected_violation:
            continue
        failures += 1
    return paths, (0 if failures == 0 else 1)


def _run_verify_or_sweep(config: RunConfig) -> Tuple[List[Path], int]:
    plan = SweepPlan(
        family=config.family,
        parameters=config.parameters if config.family != "flat" else (0.0,),
        dimensions=config.dimensions,
        grid=config.grid,
        tol_bound_rel=config.tol_bound_rel,
        tol_deficit=config.tol_deficit,
    )
    reports = run_sweep(plan, jobs=config.jobs)
    return emit_reports(reports, config)


def _run_green_check(config: RunConfig) -> Tuple[List[Path], int]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["n,numeric,exact,rel_err"]
    worst = 0.0
    for n in config.dimensions:
        numeric = green_constant_check(n, spec=config.grid)
        exact = green_constant(n)
        rel = abs(numeric - exact) / exact
        worst = max(worst, rel)
        lines.append(",".join(_fmt(v) for v in (n, numeric, exact, rel)))
        print(f"n={n}: numeric {numeric:.9g}  exact {exact:.9g}  rel_err {rel:.3e}")
    p = out_dir / "green_check.csv"
    p.write_text("\n".join(lines) + "\n")
    return [p], (0 if worst < 1e-3 else 1)


def _run_kernel(config: RunConfig) -> Tuple[List[Path], int]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = config.kernel_decades
    radii = np.logspace(-d / 2.0, d / 2.0, d * config.kernel_points_per_decade + 1)
    header = "n,p,r,s,K_p,Lambda,I"
    if config.kernel_mc_check:
        header += ",K_mc"
    lines = [header]
    for n in config.dimensions:
        for p in config.kernel_p:
            for r in radii:
                for s in radii:
                    K = float(avg_power(n, p, r, s)) if not (r == s and p >= n - 1 - 1e-6) else math.nan
                    lam = float(avg_log(n, r, s))
                    I_val = kernel_I(n, float(r), float(s))
                    row = [_fmt(v) for v in (n, p, float(r), float(s), K, lam, I_val)]
                    if config.kernel_mc_check:
                        mc = monte_carlo_sphere_average(n, float(r), float(s), "power", p,
                                                        samples_log2=16, seed=config.seed)
                        row.append(_fmt(mc))
                    lines.append(",".join(row))
    p_out = out_dir / "kernel_table.csv"
    p_out.write_text("\n".join(lines) + "\n")
    return [p_out], 0


def _run_deficit_table(config: RunConfig) -> Tuple[List[Path], int]:
    from .verify import _build_metric
    from .metric import deficit as deficit_report_fn

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["n,family,param,r,ratio_rhs,ratio_intermediate"]
    for n in config.dimensions:
        for param in config.parameters:
            metric = _build_metric(config.family, param, n, config.grid)
            rep = deficit_report_fn(metric)
            inter = dict(rep.intermediate.samples) if rep.intermediate is not None else {}
            for r, v in rep.rhs.samples:
                lines.append(",".join(_fmt(x) for x in (
                    n, config.family, param, r, v, inter.get(r, math.nan))))
    p = out_dir / "deficit_table.csv"
    p.write_text("\n".join(lines) + "\n")
    return [p], 0


# ---------------------------------------------------------------------------
# entry point


def _setup_logging():
    level_name = os.environ.get("QDEFICIT_LOG", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="qdeficit",
        description="Verify the total-curvature bound and isoperimetric deficit "
                    "of conformal metrics on R^n.",
    )
    parser.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                        help="action; may also come from --config")
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json", "both"), default=None)
    parser.add_argument("--seed", type=int, default=None, help="seed for MC oracles")
    parser.add_argument("--jobs", type=int, default=None, help="parallel sweep workers")
    parser.add_argument("--dimensions", type=int, nargs="+", default=None)
    parser.add_argument("--alphas", type=float, nargs="+", default=None,
                        help="family parameters for verify/sweep/deficit-table")
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            text = Path(args.config).read_text()
            config = parse_config(text)
            if args.subcommand is not None and args.subcommand != config.subcommand:
                raise ConfigurationError(
                    f"subcommand {args.subcommand!r} conflicts with config {config.subcommand!r}"
                )
        else:
            if args.subcommand is None:
                parser.error("a subcommand or --config is required")
            seed_cfg: dict = {"subcommand": args.subcommand}
            if args.subcommand == "verify":
                seed_cfg["family"] = "flat"
                seed_cfg["parameters"] = [0.0]
                seed_cfg["dimensions"] = [3]
            config = parse_config(json.dumps(seed_cfg))
        overrides = {}
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.fmt is not None:
            overrides["out_format"] = args.fmt
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        if args.dimensions is not None:
            overrides["dimensions"] = tuple(args.dimensions)
        if args.alphas is not None:
            overrides["parameters"] = tuple(args.alphas)
        if overrides:
            from dataclasses import replace

            config = replace(config, **overrides)

        if config.subcommand in ("verify", "sweep"):
            paths, code = _run_verify_or_sweep(config)
        elif config.subcommand == "green-check":
            paths, code = _run_green_check(config)
        elif config.subcommand == "kernel":
            paths, code = _run_kernel(config)
        else:
            paths, code = _run_deficit_table(config)
        for p in paths:
            print(f"wrote {p}")
        return code
    except QDeficitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
