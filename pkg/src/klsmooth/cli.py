"""Command-line front end.

Subcommands: estimate, profile, tail, expect, missing, lower, oracle,
regime.  Every run is fully specified by flags plus an optional JSON
config file (``--config``); flags override file values, and
``--dump-config`` writes back the resolved configuration so a run can
be replayed exactly.

Exit codes: 0 success, 2 validation error (bad flags, malformed
distribution JSON, enumeration cap exceeded), 3 a checked bound was
violated (so CI can gate on it).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .distribution import ProbVector, critical_samples, resolve_distribution, sparsity_profile
from .errors import SizeCapError, ValidationError
from .estimators import (
    CountVector,
    EstimatorSpec,
    bound_ids,
    default_bounds_for_spec,
    estimate,
)
from .experiments import (
    ExperimentConfig,
    check_lower_bound_construction,
    format_number,
    mc_expectation,
    mc_risk_tail,
    regime_map,
    write_json_report,
    write_report_csv,
)
from .oracle import DEFAULT_COMPOSITION_CAP, exact_functionals

_EXPECTATION_BOUND = {"laplace": "expectation_laplace", "adaptive": "adaptive_expectation"}


def _fmt(x) -> str:
    return format_number(x)


def _parse_kind(kind: str, d: int) -> ProbVector:
    head, _, rest = kind.partition(":")
    if head == "uniform":
        return resolve_distribution({"kind": "uniform", "d": d})
    if head == "geometric":
        return resolve_distribution({"kind": "geometric", "rate": float(rest), "d": d})
    if head == "polynomial":
        return resolve_distribution({"kind": "polynomial", "alpha": float(rest), "d": d})
    if head == "sparse-uniform":
        parts = rest.split(":")
        obj = {"kind": "sparse-uniform", "s": int(parts[0]), "d": d}
        if len(parts) > 1:
            obj["c"] = float(parts[1])
        return resolve_distribution(obj)
    raise ValidationError(f"unknown --kind {kind!r}")


def _resolve_dist(merged) -> ProbVector:
    dist = merged.get("dist")
    kind = merged.get("kind")
    if dist is not None:
        return resolve_distribution(dist)
    if kind is not None:
        d = merged.get("d")
        if d is None:
            raise ValidationError("--kind needs --d")
        return _parse_kind(kind, int(d))
    raise ValidationError("specify a distribution with --dist or --kind/--d")


def _merged_options(args: argparse.Namespace, keys: list[str]) -> dict:
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file {args.config!r}: {exc}") from exc
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else file_cfg.get(key)
    return merged


def _dump_config(args, merged, subcommand: str, dist: ProbVector | None) -> None:
    path = getattr(args, "dump_config", None)
    if not path:
        return
    payload = {"subcommand": subcommand}
    for key, val in merged.items():
        if key in ("dist", "kind", "d") or val is None:
            continue
        payload[key] = val
    if dist is not None:
        payload["dist"] = dist.to_json()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x != ""]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x != ""]


def _exit_for(reports) -> int:
    return 3 if any(r.verdict.startswith("violated") for r in reports) else 0


def _emit(merged, config, reports) -> None:
    out = merged.get("out")
    json_path = merged.get("json")
    if out:
        write_report_csv(out, list(reports))
    if json_path:
        write_json_report(json_path, config, list(reports))


# ---------------------------------------------------------------------------
# Subcommand runners


def _run_estimate(args) -> int:
    merged = _merged_options(args, ["spec", "counts"])
    if merged["spec"] is None or merged["counts"] is None:
        raise ValidationError("estimate needs --spec and --counts")
    spec = EstimatorSpec.parse(merged["spec"])
    counts = CountVector(np.array(_int_list(merged["counts"]), dtype=np.int64))
    _dump_config(args, merged, "estimate", None)
    pv = estimate(spec, counts)
    print(", ".join(_fmt(float(x)) for x in pv.probs))
    return 0


def _run_profile(args) -> int:
    merged = _merged_options(args, ["dist", "kind", "d", "n", "eps", "delta"])
    pv = _resolve_dist(merged)
    n = merged["n"]
    if n is None:
        raise ValidationError("profile needs --n")
    eps = merged["eps"] if merged["eps"] is not None else 0.1
    delta = merged["delta"] if merged["delta"] is not None else 0.01
    _dump_config(args, merged, "profile", pv)
    prof = sparsity_profile(pv, float(n))
    for name in ("n", "s_n", "s_circ", "s_bullet", "s_diamond",
                 "expected_distinct", "expected_missing", "d_n_plus"):
        val = getattr(prof, name)
        print(f"{name} = {'absent' if val is None else _fmt(float(val))}")
    crit = critical_samples(pv, pv.d, float(eps), float(delta))
    print(f"eps = {_fmt(float(eps))}, delta = {_fmt(float(delta))}")
    for name in ("n_obs", "n_miss", "n_dev", "n_circ", "n_exp"):
        print(f"{name} = {_fmt(getattr(crit, name))}")
    for w in crit.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _mc_config(merged, *, need_spec: bool = True) -> ExperimentConfig:
    pv = _resolve_dist(merged)
    if merged["n"] is None:
        raise ValidationError("this subcommand needs --n")
    spec_text = merged.get("spec") or "laplace"
    if need_spec and merged.get("spec") is None:
        raise ValidationError("this subcommand needs --spec")
    spec = EstimatorSpec.parse(spec_text)
    bounds = merged.get("bounds")
    if bounds is None:
        bounds = ",".join(default_bounds_for_spec(spec))
    bound_list = tuple(b.strip() for b in str(bounds).split(",") if b.strip())
    return ExperimentConfig(
        distribution=pv,
        n=int(merged["n"]),
        spec=spec,
        delta=float(merged["delta"]) if merged["delta"] is not None else 0.01,
        trials=int(merged["trials"]) if merged["trials"] is not None else 10000,
        master_seed=int(merged["seed"]) if merged["seed"] is not None else 0,
        bound_ids=bound_list,
    )


def _workers(merged) -> int:
    w = merged.get("workers")
    return int(w) if w is not None else (os.cpu_count() or 1)


_MC_KEYS = ["dist", "kind", "d", "n", "spec", "delta", "trials", "seed",
            "workers", "bounds", "out", "json"]


def _run_tail(args) -> int:
    merged = _merged_options(args, _MC_KEYS)
    config = _mc_config(merged)
    _dump_config(args, merged, "tail", config.distribution)
    report = mc_risk_tail(config, workers=_workers(merged))
    _emit(merged, config, report.reports)
    for r in report.reports:
        print(f"{r.bound_id}: quantile({_fmt(r.level)}) = {_fmt(r.empirical_quantile)} "
              f"vs rhs = {_fmt(r.bound_rhs)} -> {r.verdict}")
        for w in r.validity_warnings:
            print(f"  warning: {w}", file=sys.stderr)
    return _exit_for(report.reports)


def _run_expect(args) -> int:
    merged = _merged_options(args, _MC_KEYS)
    if merged.get("bounds") is None:
        spec = EstimatorSpec.parse(merged.get("spec") or "laplace")
        default = _EXPECTATION_BOUND.get(spec.kind)
        if default is None:
            raise ValidationError(
                f"no expectation bound registered for {spec.kind!r}; pass --bounds"
            )
        merged["bounds"] = default
    config = _mc_config(merged)
    _dump_config(args, merged, "expect", config.distribution)
    report = mc_expectation(config, workers=_workers(merged))
    _emit(merged, config, report.reports)
    for r in report.reports:
        print(f"{r.bound_id}: mean = {_fmt(r.mean)} +/- {_fmt(r.std_error)} "
              f"vs rhs = {_fmt(r.bound_rhs)} -> {r.verdict}")
    return _exit_for(report.reports)


def _run_missing(args) -> int:
    merged = _merged_options(args, _MC_KEYS)
    if merged.get("bounds") is None:
        merged["bounds"] = "missing_mass_whp,missing_mass_subgaussian,missing_mass_bernstein"
    if merged.get("spec") is None:
        merged["spec"] = "laplace"  # masses do not depend on the estimator
    config = _mc_config(merged, need_spec=False)
    _dump_config(args, merged, "missing", config.distribution)
    report = mc_risk_tail(config, workers=_workers(merged))
    _emit(merged, config, report.reports)
    for r in report.reports:
        print(f"{r.bound_id}: quantile({_fmt(r.level)}) = {_fmt(r.empirical_quantile)} "
              f"vs rhs = {_fmt(r.bound_rhs)} -> {r.verdict}")
    return _exit_for(report.reports)


def _run_lower(args) -> int:
    merged = _merged_options(args, ["spec", "n", "d", "delta", "kappa"])
    for key in ("spec", "n", "d", "delta"):
        if merged[key] is None:
            raise ValidationError(f"lower needs --{key}")
    spec = EstimatorSpec.parse(merged["spec"])
    _dump_config(args, merged, "lower", None)
    check = check_lower_bound_construction(
        spec, int(merged["n"]), int(merged["d"]), float(merged["delta"]),
        kappa=float(merged["kappa"]) if merged["kappa"] is not None else 1.0,
    )
    print(f"branch = {check.branch}")
    print(f"adversary_class = {check.adversary_class}")
    print(f"event_probability = {_fmt(check.event_probability)}")
    print(f"kl_on_event = {_fmt(check.kl_on_event)}")
    print(f"threshold = {_fmt(check.threshold)}")
    print(f"satisfied = {str(check.satisfied).lower()}")
    for w in check.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 3 if (check.branch == "constructed" and not check.satisfied) else 0


def _run_oracle(args) -> int:
    merged = _merged_options(args, ["dist", "kind", "d", "n", "spec", "cap", "out", "json"])
    pv = _resolve_dist(merged)
    if merged["n"] is None or merged["spec"] is None:
        raise ValidationError("oracle needs --n and --spec")
    spec = EstimatorSpec.parse(merged["spec"])
    cap = int(merged["cap"]) if merged["cap"] is not None else DEFAULT_COMPOSITION_CAP
    _dump_config(args, merged, "oracle", pv)
    funcs = exact_functionals(pv, int(merged["n"]), spec, cap=cap)
    print(f"expected_kl = {_fmt(funcs.expected_kl)}")
    print(f"expected_missing = {_fmt(funcs.expected_missing)}")
    print(f"expected_distinct = {_fmt(funcs.expected_distinct)}")
    exit_code = 0
    bound_id = _EXPECTATION_BOUND.get(spec.kind)
    if bound_id is not None:
        from .estimators import bound_value
        from .experiments import bound_params_for

        rhs, _ = bound_value(bound_id, bound_params_for(bound_id, pv, int(merged["n"])))
        verdict = "holds" if funcs.expected_kl <= rhs else "violated"
        print(f"{bound_id}: rhs = {_fmt(rhs)} -> {verdict}")
        if verdict == "violated":
            exit_code = 3
    if merged.get("out"):
        funcs.risk_distribution.to_csv(merged["out"])
    if merged.get("json"):
        payload = {
            "expected_kl": format_number(funcs.expected_kl),
            "expected_missing": funcs.expected_missing,
            "expected_distinct": funcs.expected_distinct,
            "atoms": [
                [format_number(v), p]
                for v, p in zip(funcs.risk_distribution.values, funcs.risk_distribution.probs)
            ],
        }
        with open(merged["json"], "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return exit_code


def _run_regime(args) -> int:
    merged = _merged_options(args, ["dist", "kind", "d", "spec", "n_grid", "delta_grid",
                                    "trials", "seed", "workers", "bounds", "out", "json"])
    pv = _resolve_dist(merged)
    if merged["spec"] is None or merged["n_grid"] is None or merged["delta_grid"] is None:
        raise ValidationError("regime needs --spec, --n-grid and --delta-grid")
    spec = EstimatorSpec.parse(merged["spec"])
    bounds = merged.get("bounds")
    bound_list = (tuple(b.strip() for b in str(bounds).split(",") if b.strip())
                  if bounds is not None else default_bounds_for_spec(spec))
    n_grid = _int_list(merged["n_grid"]) if not isinstance(merged["n_grid"], list) else merged["n_grid"]
    delta_grid = (_float_list(merged["delta_grid"])
                  if not isinstance(merged["delta_grid"], list) else merged["delta_grid"])
    _dump_config(args, merged, "regime", pv)
    cells = regime_map(
        pv, spec, n_grid, delta_grid,
        trials=int(merged["trials"]) if merged["trials"] is not None else 10000,
        master_seed=int(merged["seed"]) if merged["seed"] is not None else 0,
        bound_ids=bound_list,
        workers=_workers(merged),
    )
    reports = [c.report for c in cells]
    _emit(merged, None, reports)
    for r in reports:
        print(f"n = {r.n}, delta = {_fmt(r.delta)}, {r.bound_id}: "
              f"quantile = {_fmt(r.empirical_quantile)} vs rhs = {_fmt(r.bound_rhs)} -> {r.verdict}")
    return _exit_for(reports)


# ---------------------------------------------------------------------------
# Parser


def _add_dist_flags(sp) -> None:
    sp.add_argument("--dist", help="distribution as JSON: array of numbers or {\"kind\": ...} object")
    sp.add_argument("--kind", help="shorthand family: uniform | geometric:<rate> | "
                                   "polynomial:<alpha> | sparse-uniform:<s>[:<c>]")
    sp.add_argument("--d", type=int, help="number of classes (with --kind)")


def _add_common_flags(sp, *, trials: bool = True) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its values")
    sp.add_argument("--dump-config", help="write the resolved config JSON to this path")
    if trials:
        sp.add_argument("--delta", type=float, help="target failure probability (default 0.01)")
        sp.add_argument("--trials", type=int, help="Monte Carlo trials (default 10000)")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--workers", type=int, help="worker threads (default: logical processors)")
        sp.add_argument("--bounds", help="comma-separated bound ids "
                                         f"(known: {', '.join(bound_ids())})")
        sp.add_argument("--out", help="CSV output path")
        sp.add_argument("--json", help="JSON report output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klsmooth",
        description="Smoothing estimators for discrete distributions under relative-entropy "
                    "loss, with exact oracles and Monte Carlo bound checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("estimate", help="print the smoothed distribution for given counts")
    sp.add_argument("--spec", help="estimator: mle | laplace | kt | add:<l> | conf:<delta> | "
                                   "adaptive | adaptive-conf:<delta>")
    sp.add_argument("--counts", help="comma-separated class counts, e.g. 2,1,0")
    _add_common_flags(sp, trials=False)
    sp.set_defaults(runner=_run_estimate)

    sp = sub.add_parser("profile", help="print the sparsity profile and critical sample sizes")
    _add_dist_flags(sp)
    sp.add_argument("--n", type=float, help="sample size")
    sp.add_argument("--eps", type=float, help="accuracy target for critical sizes (default 0.1)")
    sp.add_argument("--delta", type=float, help="failure probability (default 0.01)")
    _add_common_flags(sp, trials=False)
    sp.set_defaults(runner=_run_profile)

    for name, runner, help_text in [
        ("tail", _run_tail, "Monte Carlo tail check of divergence bounds"),
        ("expect", _run_expect, "Monte Carlo mean check of expectation bounds"),
        ("missing", _run_missing, "Monte Carlo check of missing/underestimated-mass bounds"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        _add_dist_flags(sp)
        sp.add_argument("--n", type=int, help="sample size")
        sp.add_argument("--spec", help="estimator text form")
        _add_common_flags(sp)
        sp.set_defaults(runner=runner)

    sp = sub.add_parser("lower", help="deterministic lower-bound construction check")
    sp.add_argument("--spec", help="estimator text form")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kappa", type=float, help="hypothesis constant (default 1)")
    _add_common_flags(sp, trials=False)
    sp.set_defaults(runner=_run_lower)

    sp = sub.add_parser("oracle", help="exact enumeration of the risk distribution")
    _add_dist_flags(sp)
    sp.add_argument("--n", type=int, help="sample size")
    sp.add_argument("--spec", help="estimator text form")
    sp.add_argument("--cap", type=int, help=f"composition cap (default {DEFAULT_COMPOSITION_CAP})")
    sp.add_argument("--out", help="CSV path for the exact risk distribution atoms")
    sp.add_argument("--json", help="JSON output path")
    _add_common_flags(sp, trials=False)
    sp.set_defaults(runner=_run_oracle)

    sp = sub.add_parser("regime", help="bound checks over an (n, delta) grid")
    _add_dist_flags(sp)
    sp.add_argument("--spec", help="estimator text form")
    sp.add_argument("--n-grid", help="comma-separated sample sizes")
    sp.add_argument("--delta-grid", help="comma-separated failure probabilities")
    _add_common_flags(sp)
    sp.set_defaults(runner=_run_regime)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.runner(args)
    except SizeCapError as exc:
        print(f"error: enumeration too large: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
