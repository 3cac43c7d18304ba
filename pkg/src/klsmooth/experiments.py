"""Monte Carlo harness for bound-vs-empirical verdicts.

Per-trial statistics are generated from counter-based streams keyed by
``(master_seed, trial index)``, stored into arrays indexed by trial, and
only then aggregated.  Reports are therefore byte-identical no matter
how trials are scheduled: worker threads process fixed-size blocks of
trials and write to disjoint slices.

Verdict semantics for an upper bound with failure multiplier m: the
empirical quantile of order 1 - m*delta is bracketed by an exact
binomial (Clopper-Pearson style) 99% order-statistic band; ``violated``
is reported only when the whole band sits above the bound, ``holds``
when it sits at or below, and ``inconclusive`` when it straddles.
``holds (vacuous)`` marks divergence bounds whose right-hand side
exceeds the deterministic log(2n) envelope, vacuous at desk scale.
Infinite divergences count as exceedances for every finite threshold.
"""

from __future__ import annotations

import json
import math
import time
import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import beta as _beta
from scipy.stats import binom as _binom

from .distribution import (
    ProbVector,
    effective_missing_support,
    effective_support,
    expected_missing_mass,
    missing_mass_variance_factor,
)
from .errors import ValidationError
from .estimators import (
    CountVector,
    EstimatorSpec,
    bound_info,
    bound_value,
    estimate,
    smoothed_probs,
)
from .adversarial import conf_indep_adversary
from .numerics import kl_divergence
from .sampling import AliasSampler, RngSeed

__all__ = [
    "ExperimentConfig",
    "TailReport",
    "ExpectationReport",
    "BoundCheckReport",
    "LowerBoundCheck",
    "RegimeCell",
    "STATISTICS",
    "bound_params_for",
    "mc_statistics",
    "mc_risk_tail",
    "mc_expectation",
    "check_lower_bound_construction",
    "regime_map",
    "clopper_pearson",
    "empirical_quantile",
    "quantile_band",
    "exceedance",
    "format_number",
    "TAIL_CSV_HEADER",
    "EXPECT_CSV_HEADER",
    "tail_csv_rows",
    "expect_csv_rows",
    "write_report_csv",
    "write_json_report",
]

BLOCK_SIZE = 512

STATISTICS = ("kl", "reverse_kl", "missing_mass", "underestimated_mass", "hellinger_sq")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte Carlo run; seeds derive only from it."""

    distribution: ProbVector
    n: int
    spec: EstimatorSpec
    delta: float
    trials: int
    master_seed: int
    bound_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("config needs n >= 1")
        if self.trials < 1:
            raise ValidationError("config needs trials >= 1")
        if not 0 < self.delta < 1:
            raise ValidationError("config needs delta in (0, 1)")
        object.__setattr__(self, "bound_ids", tuple(self.bound_ids))

    def to_json_obj(self) -> dict:
        return {
            "distribution": self.distribution.to_json(),
            "n": self.n,
            "spec": str(self.spec),
            "delta": self.delta,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "bound_ids": list(self.bound_ids),
        }


def mc_statistics(config: ExperimentConfig, statistics, workers: int = 1) -> dict[str, np.ndarray]:
    """Per-trial statistic arrays, indexed by trial number.

    ``statistics`` is an iterable of names from ``STATISTICS``.  Trial t
    draws one size-n sample from the stream keyed (master_seed, t) and
    evaluates every requested statistic on it, so the arrays are coupled
    across statistics and reproducible regardless of ``workers``.
    """
    needs = tuple(dict.fromkeys(statistics))
    unknown = [s for s in needs if s not in STATISTICS]
    if unknown:
        raise ValidationError(f"unknown statistics {unknown}; known: {STATISTICS}")
    pv = config.distribution
    p = pv.probs
    n, d, spec = config.n, pv.d, config.spec
    sampler = AliasSampler(pv)
    support = p > 0
    ps = p[support]
    log_ps = np.log(ps)
    sqrt_p = np.sqrt(p)
    quarter_mean = n * p / 4.0
    out = {s: np.empty(config.trials) for s in needs}

    def fill(bounds: tuple[int, int]) -> None:
        t0, t1 = bounds
        for t in range(t0, t1):
            rng = RngSeed(config.master_seed, t).generator()
            counts = sampler.draw(n, rng)
            if "kl" in out:
                q = smoothed_probs(spec, counts, n, d)
                qs = q[support]
                if np.any(qs == 0.0):
                    out["kl"][t] = math.inf
                else:
                    out["kl"][t] = float(np.dot(ps, log_ps - np.log(qs)))
            if "reverse_kl" in out:
                seen = counts > 0
                freq = counts[seen] / n
                out["reverse_kl"][t] = float(np.dot(freq, np.log(freq) - np.log(p[seen])))
            if "missing_mass" in out:
                out["missing_mass"][t] = float(p[counts == 0].sum())
            if "underestimated_mass" in out:
                out["underestimated_mass"][t] = float(p[counts <= quarter_mean].sum())
            if "hellinger_sq" in out:
                diff = np.sqrt(counts / n) - sqrt_p
                out["hellinger_sq"][t] = float(np.dot(diff, diff))

    blocks = [(t0, min(t0 + BLOCK_SIZE, config.trials)) for t0 in range(0, config.trials, BLOCK_SIZE)]
    if workers <= 1 or len(blocks) == 1:
        for b in blocks:
            fill(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    return out


# ---------------------------------------------------------------------------
# Quantiles, intervals, verdicts


def empirical_quantile(sorted_values: np.ndarray, q: float) -> float:
    """Left-continuous inverse of the empirical CDF (smallest value whose
    cumulative frequency reaches q); matches the exact-oracle convention."""
    t = len(sorted_values)
    if q <= 0:
        return float(sorted_values[0])
    idx = min(max(math.ceil(q * t), 1), t) - 1
    return float(sorted_values[idx])


def quantile_band(sorted_values: np.ndarray, q: float, conf: float = 0.99) -> tuple[float, float, float]:
    """(ci_low, point, ci_high) for the q-quantile via binomial order statistics."""
    t = len(sorted_values)
    alpha = 1.0 - conf
    if q <= 0:
        v = float(sorted_values[0])
        return v, v, v
    point_idx = min(max(math.ceil(q * t), 1), t) - 1
    lo_idx = int(_binom.ppf(alpha / 2.0, t, min(q, 1.0))) - 1
    hi_idx = int(_binom.ppf(1.0 - alpha / 2.0, t, min(q, 1.0)))
    lo_idx = min(max(lo_idx, 0), t - 1)
    hi_idx = min(max(hi_idx, 0), t - 1)
    lo_idx = min(lo_idx, point_idx)
    hi_idx = max(hi_idx, point_idx)
    return float(sorted_values[lo_idx]), float(sorted_values[point_idx]), float(sorted_values[hi_idx])


def clopper_pearson(successes: int, trials: int, conf: float = 0.99) -> tuple[float, float]:
    """Exact binomial confidence interval for a proportion."""
    if not 0 <= successes <= trials or trials < 1:
        raise ValidationError("need 0 <= successes <= trials, trials >= 1")
    alpha = 1.0 - conf
    lo = 0.0 if successes == 0 else float(_beta.ppf(alpha / 2.0, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(_beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes))
    return lo, hi


def exceedance(values: np.ndarray, threshold: float, conf: float = 0.99):
    """(count, proportion, ci_low, ci_high) of values >= threshold."""
    values = np.asarray(values)
    k = int(np.count_nonzero(values >= threshold))
    t = len(values)
    lo, hi = clopper_pearson(k, t, conf)
    return k, k / t, lo, hi


@dataclass(frozen=True)
class TailReport:
    """One bound-vs-empirical-quantile comparison."""

    bound_id: str
    statistic: str
    n: int
    d: int
    delta: float
    spec: str
    trials: int
    master_seed: int
    multiplier: int
    level: float
    empirical_quantile: float
    ci_low: float
    ci_high: float
    bound_rhs: float
    verdict: str
    validity_warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExpectationReport:
    """Monte Carlo mean of a risk statistic against an expectation bound."""

    bound_id: str
    statistic: str
    n: int
    d: int
    spec: str
    trials: int
    master_seed: int
    mean: float
    std_error: float
    bound_rhs: float
    verdict: str
    infinite_trials: int = 0
    validity_warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class BoundCheckReport:
    config: ExperimentConfig
    reports: tuple
    runtime_seconds: float


_AUTO_PARAMS: dict[str, Callable] = {
    "n": lambda pv, n, delta: n,
    "d": lambda pv, n, delta: pv.d,
    "delta": lambda pv, n, delta: delta,
    "s": lambda pv, n, delta: pv.support_size,
    "s_n": lambda pv, n, delta: effective_support(pv, n),
    "s_circ_112": lambda pv, n, delta: effective_missing_support(pv, n / 112.0),
    "s_circ_half": lambda pv, n, delta: effective_missing_support(pv, n / 2.0),
    "expected_missing": lambda pv, n, delta: expected_missing_mass(pv, n),
    "d_n_plus": lambda pv, n, delta: missing_mass_variance_factor(pv, n),
}


def bound_params_for(bound_id: str, pv: ProbVector, n: int, delta: Optional[float] = None) -> dict:
    """Fill in the parameter symbols a registered bound needs from (pv, n, delta)."""
    info = bound_info(bound_id)
    if "delta" in info.params and delta is None:
        raise ValidationError(f"bound {bound_id!r} needs a delta")
    return {name: _AUTO_PARAMS[name](pv, n, delta) for name in info.params}


def _auto_params(info, config: ExperimentConfig) -> dict[str, float]:
    return bound_params_for(info.id, config.distribution, config.n, config.delta)


def _tail_verdict(ci_low: float, ci_high: float, rhs: float, vacuous_envelope: Optional[float]) -> str:
    if ci_low > rhs:
        return "violated"
    if ci_high <= rhs:
        if vacuous_envelope is not None and rhs >= vacuous_envelope:
            return "holds (vacuous)"
        return "holds"
    return "inconclusive"


def _tail_report_for(bound_id: str, values_sorted: np.ndarray, config: ExperimentConfig,
                     n: Optional[int] = None) -> TailReport:
    info = bound_info(bound_id)
    n = config.n if n is None else n
    rhs, warns = bound_value(bound_id, _auto_params(info, config))
    warns = list(warns)
    if info.spec_kind is not None and config.spec.kind != info.spec_kind:
        warns.append(
            f"bound {bound_id} is stated for the {info.spec_kind!r} rule, run used {config.spec.kind!r}"
        )
    level = max(0.0, 1.0 - info.multiplier * config.delta)
    if level == 0.0:
        warns.append(f"multiplier {info.multiplier} times delta reaches 1; quantile level clamped to 0")
    ci_low, point, ci_high = quantile_band(values_sorted, level)
    envelope = math.log(2.0 * n) if info.statistic == "kl" else None
    verdict = _tail_verdict(ci_low, ci_high, rhs, envelope)
    return TailReport(
        bound_id=bound_id,
        statistic=info.statistic,
        n=n,
        d=config.distribution.d,
        delta=config.delta,
        spec=str(config.spec),
        trials=config.trials,
        master_seed=config.master_seed,
        multiplier=info.multiplier,
        level=level,
        empirical_quantile=point,
        ci_low=ci_low,
        ci_high=ci_high,
        bound_rhs=rhs,
        verdict=verdict,
        validity_warnings=tuple(warns),
    )


def mc_risk_tail(config: ExperimentConfig, workers: int = 1) -> BoundCheckReport:
    """Run the trials once and compare each requested bound to its quantile."""
    if not config.bound_ids:
        raise ValidationError("config.bound_ids is empty")
    infos = [bound_info(b) for b in config.bound_ids]
    not_mc = [i.id for i in infos if i.statistic is None]
    if not_mc:
        raise ValidationError(
            f"bounds {not_mc} are lower bounds or construction thresholds; "
            "use check_lower_bound_construction or bound_value instead"
        )
    t0 = time.perf_counter()
    stats = mc_statistics(config, [i.statistic for i in infos], workers=workers)
    sorted_stats = {name: np.sort(arr) for name, arr in stats.items()}
    reports = tuple(
        _tail_report_for(info.id, sorted_stats[info.statistic], config) for info in infos
    )
    return BoundCheckReport(config=config, reports=reports, runtime_seconds=time.perf_counter() - t0)


def mc_expectation(config: ExperimentConfig, workers: int = 1) -> BoundCheckReport:
    """Monte Carlo mean of the divergence against expectation bounds."""
    if not config.bound_ids:
        raise ValidationError("config.bound_ids is empty")
    infos = [bound_info(b) for b in config.bound_ids]
    bad = [i.id for i in infos if i.statistic != "kl"]
    if bad:
        raise ValidationError(f"mc_expectation checks divergence expectation bounds, got {bad}")
    t0 = time.perf_counter()
    values = mc_statistics(config, ["kl"], workers=workers)["kl"]
    finite = np.isfinite(values)
    n_inf = int(len(values) - finite.sum())
    if n_inf:
        mean, se = math.inf, math.inf
    else:
        mean = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.inf
    reports = []
    for info in infos:
        rhs, warns = bound_value(info.id, _auto_params(info, config))
        warns = list(warns)
        if info.spec_kind is not None and config.spec.kind != info.spec_kind:
            warns.append(
                f"bound {info.id} is stated for the {info.spec_kind!r} rule, run used {config.spec.kind!r}"
            )
        if n_inf:
            verdict = "violated-by-infinity"
        elif mean + 2.576 * se <= rhs:
            verdict = "holds"
        elif mean - 2.576 * se > rhs:
            verdict = "violated"
        else:
            verdict = "inconclusive"
        reports.append(ExpectationReport(
            bound_id=info.id,
            statistic="kl",
            n=config.n,
            d=config.distribution.d,
            spec=str(config.spec),
            trials=config.trials,
            master_seed=config.master_seed,
            mean=mean,
            std_error=se,
            bound_rhs=rhs,
            verdict=verdict,
            infinite_trials=n_inf,
            validity_warnings=tuple(warns),
        ))
    return BoundCheckReport(config=config, reports=tuple(reports),
                            runtime_seconds=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Deterministic lower-bound construction checker


@dataclass(frozen=True)
class LowerBoundCheck:
    """Closed-form audit of the two-point adversary against one estimator.

    ``branch`` is "constructed" when the estimator's output on the
    all-ones sample concentrates enough mass on class 1 to satisfy the
    kappa*d/n hypothesis, else "hypothesis-violated" (the construction
    is still evaluated).  ``satisfied`` compares the exact divergence
    on the all-ones event against the stated threshold.
    """

    branch: str
    event_probability: float
    kl_on_event: float
    threshold: float
    satisfied: bool
    adversary_class: int
    warnings: tuple[str, ...] = ()


Estimator = Union[EstimatorSpec, Callable[[CountVector], ProbVector]]


def check_lower_bound_construction(
    spec: Estimator, n: int, d: int, delta: float, kappa: float = 1.0
) -> LowerBoundCheck:
    """Deterministic check that the adversarial two-point construction
    forces divergence above its threshold on the all-ones event."""
    if n < 1 or d < 2:
        raise ValidationError("need n >= 1 and d >= 2")
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    if kappa < 1:
        raise ValidationError("kappa must be >= 1")
    counts = np.zeros(d, dtype=np.int64)
    counts[0] = n
    cv = CountVector(counts)
    q = spec(cv) if callable(spec) and not isinstance(spec, EstimatorSpec) else estimate(spec, cv)
    q_arr = q.probs
    warns: list[str] = []
    if not math.exp(-n) < delta < math.exp(-16.0 * kappa * kappa):
        warns.append(f"delta = {delta:g} outside validity range (e^-{n}, e^-{16.0 * kappa * kappa:g})")
    point_mass_risk = math.inf if q_arr[0] == 0 else math.log(1.0 / q_arr[0])
    branch = "constructed" if point_mass_risk <= kappa * d / n else "hypothesis-violated"
    j = 2 + int(np.argmin(q_arr[1:]))
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        adversary = conf_indep_adversary(n, delta, j, d)
    warns.extend(str(w.message) for w in caught)
    event_probability = float(adversary.probs[0]) ** n
    kl_on_event = kl_divergence(adversary, q)
    threshold, t_warns = bound_value("construction_conf_indep", {"n": n, "delta": delta})
    warns.extend(t_warns)
    return LowerBoundCheck(
        branch=branch,
        event_probability=event_probability,
        kl_on_event=kl_on_event,
        threshold=threshold,
        satisfied=bool(kl_on_event >= threshold),
        adversary_class=j,
        warnings=tuple(dict.fromkeys(warns)),
    )


# ---------------------------------------------------------------------------
# Regime maps


@dataclass(frozen=True)
class RegimeCell:
    n: int
    delta: float
    report: TailReport


def regime_map(
    pv: ProbVector,
    spec: EstimatorSpec,
    n_grid,
    delta_grid,
    trials: int,
    master_seed: int,
    bound_ids,
    workers: int = 1,
) -> list[RegimeCell]:
    """One TailReport per (n, delta) grid cell, sharing samples across deltas."""
    n_grid = list(n_grid)
    delta_grid = list(delta_grid)
    if not n_grid or not delta_grid:
        raise ValidationError("grids must be nonempty")
    bound_ids = tuple(bound_ids)
    infos = [bound_info(b) for b in bound_ids]
    cells: list[RegimeCell] = []
    for n in n_grid:
        base = ExperimentConfig(
            distribution=pv, n=n, spec=spec, delta=delta_grid[0],
            trials=trials, master_seed=master_seed, bound_ids=bound_ids,
        )
        stats = mc_statistics(base, [i.statistic for i in infos], workers=workers)
        sorted_stats = {name: np.sort(arr) for name, arr in stats.items()}
        for delta in delta_grid:
            config = ExperimentConfig(
                distribution=pv, n=n, spec=spec, delta=delta,
                trials=trials, master_seed=master_seed, bound_ids=bound_ids,
            )
            for info in infos:
                cells.append(RegimeCell(
                    n=n, delta=delta,
                    report=_tail_report_for(info.id, sorted_stats[info.statistic], config),
                ))
    return cells


# ---------------------------------------------------------------------------
# Stable serialization (12 significant digits, `inf` literal)


def format_number(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


TAIL_CSV_HEADER = [
    "bound_id", "statistic", "spec", "n", "d", "delta", "trials", "seed",
    "multiplier", "level", "quantile", "ci_low", "ci_high", "rhs", "verdict", "warnings",
]

EXPECT_CSV_HEADER = [
    "bound_id", "statistic", "spec", "n", "d", "trials", "seed",
    "mean", "std_error", "rhs", "verdict", "infinite_trials", "warnings",
]


def tail_csv_rows(reports) -> list[list[str]]:
    rows = []
    for r in reports:
        rows.append([
            r.bound_id, r.statistic, r.spec, str(r.n), str(r.d), format_number(r.delta),
            str(r.trials), str(r.master_seed), str(r.multiplier), format_number(r.level),
            format_number(r.empirical_quantile), format_number(r.ci_low),
            format_number(r.ci_high), format_number(r.bound_rhs), r.verdict,
            "; ".join(r.validity_warnings),
        ])
    return rows


def expect_csv_rows(reports) -> list[list[str]]:
    rows = []
    for r in reports:
        rows.append([
            r.bound_id, r.statistic, r.spec, str(r.n), str(r.d), str(r.trials),
            str(r.master_seed), format_number(r.mean), format_number(r.std_error),
            format_number(r.bound_rhs), r.verdict, str(r.infinite_trials),
            "; ".join(r.validity_warnings),
        ])
    return rows


def write_report_csv(path, reports) -> None:
    """Write tail or expectation reports with their stable header."""
    import csv

    header = TAIL_CSV_HEADER if not reports or isinstance(reports[0], TailReport) else EXPECT_CSV_HEADER
    rows = tail_csv_rows(reports) if header is TAIL_CSV_HEADER else expect_csv_rows(reports)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _report_obj(r) -> dict:
    obj = {k: getattr(r, k) for k in r.__dataclass_fields__}
    obj["validity_warnings"] = list(obj["validity_warnings"])
    for k, v in obj.items():
        if isinstance(v, float) and math.isinf(v):
            obj[k] = "inf" if v > 0 else "-inf"
    return obj


def write_json_report(path, config: Optional[ExperimentConfig], reports) -> None:
    """JSON mirror of the CSV rows; excludes wall-clock fields so identical
    configs always produce identical bytes."""
    payload = {
        "config": config.to_json_obj() if config is not None else None,
        "rows": [_report_obj(r) for r in reports],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
