"""Command-line front end: sampling, orchestration, reports, exit codes.

Exit-code contract: 0 all checks strict (and the field form-nonnegative
where sampled), 1 usage/config error, 2 a counterexample was found,
3 inconclusive (non-strict or skipped points present, none failing).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import (
    ConeVerifyError,
    ConfigError,
    ExprSyntaxError,
    FormValidationError,
    InconclusiveClassification,
    UnknownField,
    UnknownIdentifier,
)
from .fields import (
    builtin,
    builtin_catalog,
    parse_field,
    parse_region_spec,
    region_from_config,
    validate_trapping,
)
from .qforms import evaluate, parse_form_spec
from .report import determinism_hash, emit_report
from .sampling import RegionSamplingPlan, sample_region
from .separation import Verdict, check_lpf_monotonicity, check_separation
from .splitting import SplittingClass, classify_region, dual_form_hyperbolicity, extract_bundles

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COUNTEREXAMPLE = 2
EXIT_INCONCLUSIVE = 3

_SINGULAR_SKIP_TOL = 1e-8


def _parse_scalar(text):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_params(text):
    """Parameter grammar: 'k=v,...' map, 'a,b,c' list, or 'r;r;r' matrix."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    if "=" in text:
        out = {}
        for item in text.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"bad parameter item '{item}'")
            out[key.strip()] = _parse_scalar(value)
        return out
    if ";" in text:
        return [[_parse_scalar(v) for v in row.split(",")] for row in text.split(";")]
    return [_parse_scalar(v) for v in text.split(",")]


def _resolve_field(config):
    field_cfg = config.get("field")
    if not field_cfg:
        raise ConfigError("no field given (use --field or --expr)")
    if "builtin" in field_cfg:
        return builtin(field_cfg["builtin"], field_cfg.get("params"))
    if "expr" in field_cfg:
        params = field_cfg.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("expression fields take a parameter map")
        return parse_field(list(field_cfg["expr"]), params)
    raise ConfigError("field config needs 'builtin' or 'expr'")


def _resolve_region(config, dimension):
    region_cfg = config.get("region")
    if region_cfg is None:
        raise ConfigError("this command needs --region")
    if isinstance(region_cfg, str):
        return parse_region_spec(region_cfg, dimension)
    return region_from_config(region_cfg, dimension)


def _resolve_form(config, key, dimension):
    spec = config.get(key)
    if spec is None:
        raise ConfigError(f"missing --{key}")
    form = parse_form_spec(spec, dimension)
    if form == "adapted":
        raise ConfigError("'adapted' forms come from extract-splitting output; "
                          "pass an explicit diag:/matrix: form here")
    return form


def _thread_count():
    env = os.environ.get("CONE_VERIFY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("CONE_VERIFY_THREADS must be an integer") from exc
    return max(1, os.cpu_count() or 1)


def _map_ordered(job, items):
    """Run pure per-sample jobs on a pool, merging in sample-index order."""
    workers = _thread_count()
    if workers == 1 or len(items) <= 1:
        return [job(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, items))


def _base_report(config, command):
    return {
        "tool": "cone-verify",
        "tool_version": __version__,
        "command": command,
        "config": config,
        "seed": int(config.get("seed", 0)),
        "delta_policy": "interval-midpoint",
        "classification_basis": "empirical-sampling",
    }


def _finish_report(report, t_start):
    report["timing_seconds"] = time.perf_counter() - t_start
    report["determinism_hash"] = determinism_hash(report)
    return report


def run_check_region(config):
    """Region separation check: sample, certify, aggregate, report.

    Returns ``(report, exit_code)``.
    """
    t_start = time.perf_counter()
    vf = _resolve_field(config)
    form = _resolve_form(config, "form", vf.dimension)
    region = _resolve_region(config, vf.dimension)
    if config.get("validate_trapping"):
        validate_trapping(vf, region)
    tol = float(config.get("tol", 1e-9))
    plan = RegionSamplingPlan(
        strategy=config.get("strategy", "random"),
        count=int(config.get("samples", 64)),
        seed=int(config.get("seed", 0)),
        skip_singularity_radius=float(config.get("skip_radius", 1e-3)),
    )
    points = sample_region(plan, region, vf.singularities)
    want_lpf = bool(config.get("lpf", False))

    def job(point):
        cert = check_separation(form, vf, point)
        record = cert.to_digest()
        record["j_of_flow"] = evaluate(form, point, vf.X_at(point))
        if want_lpf:
            if vf.is_singular_point(point, _SINGULAR_SKIP_TOL):
                record["lpf"] = None
                record["lpf_note"] = "skipped: singular point"
            else:
                try:
                    record["lpf"] = check_lpf_monotonicity(form, vf, point).to_digest()
                except ConeVerifyError as exc:
                    record["lpf"] = None
                    record["lpf_note"] = f"skipped: {exc}"
        return record

    records = _map_ordered(job, list(points))

    counterexample = None
    any_nonstrict = False
    for record in records:
        failing = record["verdict"] == Verdict.FAIL.value or record["j_of_flow"] < -tol
        if failing and counterexample is None:
            counterexample = record
        if record["verdict"] == Verdict.NONSTRICT.value:
            any_nonstrict = True

    if counterexample is not None:
        aggregate, code = "Fail", EXIT_COUNTEREXAMPLE
    elif not records or any_nonstrict:
        aggregate = "Inconclusive" if not records else "NonStrict"
        code = EXIT_INCONCLUSIVE
    else:
        aggregate, code = "Strict", EXIT_OK

    report = _base_report(config, "check-region")
    report["samples"] = records
    report["aggregate_verdict"] = aggregate
    report["counterexample"] = counterexample

    if config.get("form2"):
        form2 = _resolve_form(config, "form2", vf.dimension)
        try:
            dual = dual_form_hyperbolicity(form, form2, vf, points)
            report["dual_form"] = {
                "hyperbolic": dual.hyperbolic,
                "forward_nonnegative": dual.forward_nonnegative,
                "backward_nonnegative": dual.backward_nonnegative,
            }
            if code == EXIT_OK and not dual.hyperbolic:
                code = EXIT_INCONCLUSIVE
        except ConeVerifyError as exc:
            report["dual_form"] = {"error": str(exc)}
            if code == EXIT_OK:
                code = EXIT_INCONCLUSIVE

    if config.get("classify"):
        try:
            outcome = classify_region(
                form, vf, points,
                horizon=float(config.get("horizon", 50.0)),
                dt=float(config.get("dt", 1e-3)))
            report["classification"] = outcome.classification.value
            report["delta_slopes"] = [float(s) for s in outcome.delta_slopes]
            if outcome.estimate is not None:
                report["splitting"] = outcome.estimate.to_json_dict()
            if outcome.classification is SplittingClass.NONE and code == EXIT_OK:
                code = EXIT_INCONCLUSIVE
        except InconclusiveClassification as exc:
            report["classification"] = "Inconclusive"
            report["classification_note"] = str(exc)
            if code == EXIT_OK:
                code = EXIT_INCONCLUSIVE

    report["exit_code"] = code
    return _finish_report(report, t_start), code


def run_check_point(config):
    t_start = time.perf_counter()
    vf = _resolve_field(config)
    form = _resolve_form(config, "form", vf.dimension)
    point = np.asarray(config.get("point"), dtype=float)
    if point.shape != (vf.dimension,):
        raise ConfigError("--point has the wrong dimension")
    cert = check_separation(form, vf, point)
    record = cert.to_digest()
    record["j_of_flow"] = evaluate(form, point, vf.X_at(point))
    report = _base_report(config, "check-point")
    report["samples"] = [record]
    report["aggregate_verdict"] = cert.verdict.value
    report["counterexample"] = record if cert.verdict is Verdict.FAIL else None
    if cert.verdict is Verdict.FAIL:
        code = EXIT_COUNTEREXAMPLE
    elif cert.verdict is Verdict.STRICT:
        code = EXIT_OK
    else:
        code = EXIT_INCONCLUSIVE
    report["exit_code"] = code
    return _finish_report(report, t_start), code


def run_classify(config):
    config = dict(config)
    config["classify"] = True
    report, code = run_check_region(config)
    report["command"] = "classify"
    return report, code


def run_lpf_check(config):
    t_start = time.perf_counter()
    vf = _resolve_field(config)
    form = _resolve_form(config, "form", vf.dimension)
    region = _resolve_region(config, vf.dimension)
    plan = RegionSamplingPlan(
        strategy=config.get("strategy", "random"),
        count=int(config.get("samples", 64)),
        seed=int(config.get("seed", 0)),
        skip_singularity_radius=float(config.get("skip_radius", 1e-3)),
    )
    points = sample_region(plan, region, vf.singularities)

    def job(point):
        if vf.is_singular_point(point, _SINGULAR_SKIP_TOL):
            return {"x": [float(v) for v in point], "lpf": None,
                    "note": "skipped: singular point"}
        try:
            cert = check_lpf_monotonicity(form, vf, point)
        except ConeVerifyError as exc:
            return {"x": [float(v) for v in point], "lpf": None,
                    "note": f"skipped: {exc}"}
        return {"x": [float(v) for v in point], "lpf": cert.to_digest()}

    records = _map_ordered(job, list(points))
    verdicts = [r["lpf"]["verdict"] for r in records if r.get("lpf")]
    if any(v == "Fail" for v in verdicts):
        aggregate, code = "Fail", EXIT_COUNTEREXAMPLE
    elif verdicts and all(v == "StrictlyMonotone" for v in verdicts) \
            and len(verdicts) == len(records):
        aggregate, code = "StrictlyMonotone", EXIT_OK
    else:
        aggregate, code = "Inconclusive", EXIT_INCONCLUSIVE
    report = _base_report(config, "lpf-check")
    report["samples"] = records
    report["aggregate_verdict"] = aggregate
    report["exit_code"] = code
    return _finish_report(report, t_start), code


def run_extract_splitting(config):
    t_start = time.perf_counter()
    vf = _resolve_field(config)
    form = _resolve_form(config, "form", vf.dimension)
    point = np.asarray(config.get("point"), dtype=float)
    if point.shape != (vf.dimension,):
        raise ConfigError("--point has the wrong dimension")
    f_minus, f_plus, angles = extract_bundles(
        form, vf, point,
        block_time=float(config.get("horizon", 1.0)),
        iters=int(config.get("iters", 12)),
        dt=float(config.get("dt", 1e-3)))
    report = _base_report(config, "extract-splitting")
    report["point"] = [float(v) for v in point]
    report["f_minus"] = [[float(v) for v in row] for row in f_minus.T]
    report["f_plus"] = [[float(v) for v in row] for row in f_plus.T]
    report["convergence_angles"] = {k: [float(a) for a in v]
                                    for k, v in angles.items()}
    report["exit_code"] = EXIT_OK
    return _finish_report(report, t_start), EXIT_OK


def run_catalog(_config):
    lines = ["builtin fields:"]
    for name, doc in builtin_catalog().items():
        lines.append(f"  {name}: {doc}")
    return "\n".join(lines) + "\n", EXIT_OK


class _ArgumentParser(argparse.ArgumentParser):
    """argparse variant honoring the exit-code contract (1 on usage errors)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _add_common(parser, with_region=True):
    parser.add_argument("--field", help="builtin field name")
    parser.add_argument("--params", help="field parameters (k=v map, list, or matrix rows)")
    parser.add_argument("--expr", action="append",
                        help="component expression over x1..xn (repeat per component)")
    parser.add_argument("--config", help="JSON config file with field/region")
    parser.add_argument("--form", help="form spec: diag:a,b,... or matrix:[...]")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--horizon", type=float, default=None)
    parser.add_argument("--out", help="write the report to this path")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    if with_region:
        parser.add_argument("--region", help="region spec: box:lo,hi;... or ball:c,..;r")
        parser.add_argument("--samples", type=int, default=64)
        parser.add_argument("--strategy", choices=("grid", "random"), default="random")


def _build_config(args, command):
    config = {"command": command}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        config.update(loaded)
    if getattr(args, "field", None):
        config["field"] = {"builtin": args.field,
                           "params": _parse_params(getattr(args, "params", None))}
    elif getattr(args, "expr", None):
        params = _parse_params(getattr(args, "params", None)) or {}
        if not isinstance(params, dict):
            raise ConfigError("expression fields take k=v parameters")
        config["field"] = {"expr": args.expr, "params": params}
    for key in ("form", "form2", "region", "samples", "strategy", "seed",
                "tol", "dt", "out", "format", "point", "iters"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if getattr(args, "horizon", None) is not None:
        config["horizon"] = args.horizon
    for flag in ("lpf", "classify"):
        if getattr(args, flag, False):
            config[flag] = True
    if "point" in config and not isinstance(config["point"], (list, tuple)):
        config["point"] = [_parse_scalar(v) for v in str(config["point"]).split(",")]
    return config


def build_parser():
    parser = _ArgumentParser(prog="cone-verify",
                             description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-point", help="separation certificate at one point")
    _add_common(p, with_region=False)
    p.add_argument("--point", required=True, help="comma-separated coordinates")

    p = sub.add_parser("check-region", help="separation check over a sampled region")
    _add_common(p)
    p.add_argument("--form2", help="second form for the dual-form hyperbolicity test")
    p.add_argument("--lpf", action="store_true", help="also check the normal-bundle criterion")
    p.add_argument("--classify", action="store_true", help="also classify the splitting")

    p = sub.add_parser("classify", help="classify the splitting over a region")
    _add_common(p)

    p = sub.add_parser("extract-splitting", help="extract bundles at a point")
    _add_common(p, with_region=False)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--iters", type=int, default=12)

    p = sub.add_parser("lpf-check", help="normal-bundle monotonicity over a region")
    _add_common(p)

    sub.add_parser("catalog", help="list builtin fields")
    return parser


_RUNNERS = {
    "check-point": run_check_point,
    "check-region": run_check_region,
    "classify": run_classify,
    "extract-splitting": run_extract_splitting,
    "lpf-check": run_lpf_check,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "catalog":
        text, code = run_catalog(None)
        sys.stdout.write(text)
        return code

    try:
        config = _build_config(args, args.command)
        report, code = _RUNNERS[args.command](config)
    except (ConfigError, UnknownField, FormValidationError, ExprSyntaxError,
            UnknownIdentifier, OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"cone-verify: config error: {exc}\n")
        return EXIT_CONFIG
    except ConeVerifyError as exc:
        sys.stderr.write(f"cone-verify: check not applicable: {exc}\n")
        return EXIT_INCONCLUSIVE

    out_path = config.get("out")
    text = emit_report(report, config.get("format", "json"), out_path)
    if out_path is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
