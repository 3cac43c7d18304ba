"""Estimation rules mapping count vectors to distributions, and the bound registry.

Every smoothing rule here is an "add-lambda" rule: it outputs
(N_j + lambda) / (n + lambda * d) with a rule-specific smoothing level,

* ``laplace``         lambda = 1
* ``kt``              lambda = 1/2
* ``add:<x>``         lambda = x
* ``conf:<delta>``    lambda = max(1, log(1/delta)/d)
* ``adaptive``        lambda = D_n / d           (D_n = distinct classes seen)
* ``adaptive-conf:<delta>``  lambda = max(D_n, log(1/delta)) / d

plus ``mle``, the unsmoothed empirical frequencies.

The bound registry stores the right-hand sides of the risk inequalities
these rules satisfy, with constants exactly as stated, together with
each bound's failure-probability multiplier and validity region.
Values requested outside a validity region are still returned but carry
warnings, so that regime maps can probe beyond the guaranteed ranges
without silently misstating claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .distribution import ProbVector, make_prob_vector
from .errors import DimensionMismatchError, ValidationError
from .numerics import hellinger_sq

__all__ = [
    "CountVector",
    "count_vector",
    "EstimatorSpec",
    "smoothing_level",
    "smoothed_probs",
    "estimate",
    "RiskDecomposition",
    "risk_decomposition",
    "BoundResult",
    "bound_value",
    "bound_info",
    "bound_ids",
    "default_bounds_for_spec",
]


@dataclass(frozen=True, eq=False)
class CountVector:
    """Per-class occurrence counts from a sample; n is their sum."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ValidationError("a count vector needs at least 2 classes")
        if not np.issubdtype(c.dtype, np.integer):
            if np.any(c != np.floor(c)):
                raise ValidationError("counts must be integers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValidationError("counts must be nonnegative")
        c = c.astype(np.int64, copy=True)
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def d(self) -> int:
        return int(self.counts.shape[0])

    @property
    def distinct(self) -> int:
        return int(np.count_nonzero(self.counts))


def count_vector(counts) -> CountVector:
    return CountVector(np.asarray(counts))


_SMOOTHING_KINDS = ("laplace", "kt", "add", "conf", "adaptive", "adaptive-conf")
_KINDS = ("mle",) + _SMOOTHING_KINDS


@dataclass(frozen=True)
class EstimatorSpec:
    """Tagged selection of one estimation rule and its parameters."""

    kind: str
    lam: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "add":
            if self.lam is None or not self.lam > 0:
                raise ValidationError("add-constant rule needs lambda > 0")
        elif self.lam is not None:
            raise ValidationError(f"{self.kind!r} does not take a lambda")
        if self.kind in ("conf", "adaptive-conf"):
            if self.delta is None or not 0 < self.delta < 1:
                raise ValidationError(f"{self.kind!r} needs delta in (0, 1)")
        elif self.delta is not None:
            raise ValidationError(f"{self.kind!r} does not take a delta")

    @classmethod
    def mle(cls) -> "EstimatorSpec":
        return cls("mle")

    @classmethod
    def laplace(cls) -> "EstimatorSpec":
        return cls("laplace")

    @classmethod
    def krichevsky_trofimov(cls) -> "EstimatorSpec":
        return cls("kt")

    @classmethod
    def add_constant(cls, lam: float) -> "EstimatorSpec":
        return cls("add", lam=lam)

    @classmethod
    def conf_dependent(cls, delta: float) -> "EstimatorSpec":
        return cls("conf", delta=delta)

    @classmethod
    def adaptive(cls) -> "EstimatorSpec":
        return cls("adaptive")

    @classmethod
    def adaptive_conf(cls, delta: float) -> "EstimatorSpec":
        return cls("adaptive-conf", delta=delta)

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse the CLI text form: mle | laplace | kt | add:<float> |
        conf:<delta> | adaptive | adaptive-conf:<delta>."""
        head, _, arg = text.partition(":")
        try:
            if head in ("mle", "laplace", "kt", "adaptive"):
                if arg:
                    raise ValidationError(f"estimator {head!r} takes no parameter")
                return cls(head)
            if head == "add":
                return cls.add_constant(float(arg))
            if head == "conf":
                return cls.conf_dependent(float(arg))
            if head == "adaptive-conf":
                return cls.adaptive_conf(float(arg))
        except ValueError as exc:
            raise ValidationError(f"bad estimator parameter in {text!r}: {exc}") from None
        raise ValidationError(f"unknown estimator spec {text!r}")

    def __str__(self) -> str:
        if self.kind == "add":
            return f"add:{self.lam!r}"
        if self.kind in ("conf", "adaptive-conf"):
            return f"{self.kind}:{self.delta!r}"
        return self.kind


def smoothing_level(spec: EstimatorSpec, distinct: int, d: int) -> float:
    """Smoothing level of an add-lambda rule given the distinct count and d."""
    if spec.kind == "mle":
        raise ValidationError("the empirical-frequency rule has no smoothing level")
    if distinct > d:
        raise ValidationError(f"distinct = {distinct} cannot exceed d = {d}")
    if spec.kind == "laplace":
        return 1.0
    if spec.kind == "kt":
        return 0.5
    if spec.kind == "add":
        return float(spec.lam)
    if spec.kind == "conf":
        return max(1.0, math.log(1.0 / spec.delta) / d)
    if distinct < 1:
        raise ValidationError("data-dependent smoothing needs at least one observation")
    if spec.kind == "adaptive":
        return distinct / d
    # adaptive-conf
    return max(distinct, math.log(1.0 / spec.delta)) / d


def smoothed_probs(spec: EstimatorSpec, counts: np.ndarray, n: int, d: int) -> np.ndarray:
    """Array form of estimate() on one 1-d count vector; the hot path."""
    if spec.kind == "mle":
        return counts / n
    if spec.kind in ("adaptive", "adaptive-conf"):
        lam = smoothing_level(spec, int(np.count_nonzero(counts)), d)
    else:
        lam = smoothing_level(spec, 0, d)
    return (counts + lam) / (n + lam * d)


def estimate(spec: EstimatorSpec, counts: CountVector) -> ProbVector:
    """Apply an estimation rule to a count vector."""
    if counts.n < 1:
        raise ValidationError("estimation needs at least one observation")
    return make_prob_vector(smoothed_probs(spec, counts.counts, counts.n, counts.d))


@dataclass(frozen=True)
class RiskDecomposition:
    """The three right-hand-side terms of the add-lambda risk split.

    For lambda in (0, n/d] the divergence of the add-lambda estimate is
    at most 6*hellinger_term + bias_term + residual_term, where

    * hellinger_term is the squared Hellinger distance between the
      empirical frequencies and the truth,
    * bias_term = 7*lambda*d/n, and
    * residual_term collects p_j * log(2*n*p_j/lambda) over classes with
      p_j >= 4*lambda/n whose count fell to at most n*p_j/4.
    """

    hellinger_term: float
    bias_term: float
    residual_term: float
    lambda_used: float

    @property
    def total(self) -> float:
        return 6.0 * self.hellinger_term + self.bias_term + self.residual_term


def risk_decomposition(pv: ProbVector, counts: CountVector, lam: float) -> RiskDecomposition:
    if counts.d != pv.d:
        raise DimensionMismatchError(f"counts have {counts.d} classes, distribution has {pv.d}")
    n, d = counts.n, counts.d
    if not 0 < lam <= n / d:
        raise ValidationError(f"lambda must lie in (0, n/d] = (0, {n / d}], got {lam}")
    p = pv.probs
    emp = counts.counts / n
    hell = hellinger_sq(emp, p)
    bias = 7.0 * lam * d / n
    gate = (p >= 4.0 * lam / n) & (counts.counts <= n * p / 4.0)
    residual = float(np.dot(p[gate], np.log(2.0 * n * p[gate] / lam))) if np.any(gate) else 0.0
    return RiskDecomposition(hell, bias, residual, lam)


# ---------------------------------------------------------------------------
# Bound registry

E = math.e


def _log1d(delta: float) -> float:
    return math.log(1.0 / delta)


def _xlog_ed_over(x: float, d: int) -> float:
    # x * log(e*d/x), continuously extended by 0 at x = 0; increasing on [0, d].
    if x == 0.0:
        return 0.0
    return x * math.log(E * d / x)


class BoundResult(NamedTuple):
    value: float
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class BoundInfo:
    """One registered inequality right-hand side.

    ``statistic`` names the per-sample quantity the inequality controls
    (None for lower bounds and construction thresholds, which are not
    Monte Carlo checkable).  ``multiplier`` m means the claim is
    "statistic exceeds the value with probability at most m * delta";
    quantiles are therefore taken at order 1 - m*delta.
    """

    id: str
    params: tuple[str, ...]
    formula: Callable[..., float]
    validity: Callable[..., list[str]]
    statistic: Optional[str]
    multiplier: int
    spec_kind: Optional[str] = None
    direction: str = "upper"


def _delta_range(delta: float, lo_desc: str, lo: float, hi_desc: str, hi: float) -> list[str]:
    w = []
    if not lo < delta < hi:
        w.append(f"delta = {delta:g} outside validity range ({lo_desc}, {hi_desc})")
    return w


def _v_whp(n, d, delta, d_min=2):
    w = []
    if n < 12:
        w.append(f"n = {n} below validity threshold 12")
    if d < d_min:
        w.append(f"d = {d} below validity threshold {d_min}")
    w += _delta_range(delta, "e^(-n/6)", math.exp(-n / 6.0), "e^-2", math.exp(-2.0))
    return w


_REGISTRY: dict[str, BoundInfo] = {}


def _register(info: BoundInfo) -> None:
    _REGISTRY[info.id] = info


_register(BoundInfo(
    id="expectation_laplace",
    params=("n", "d"),
    formula=lambda n, d: math.log(1.0 + (d - 1.0) / (n + 1.0)),
    validity=lambda n, d: [] if n >= 2 and d >= 2 else [f"needs n, d >= 2, got n = {n}, d = {d}"],
    statistic="kl",
    multiplier=1,
    spec_kind="laplace",
))

_register(BoundInfo(
    id="laplace_whp",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: 110000.0 * (d + _log1d(delta) * math.log(_log1d(delta))) / n,
    validity=_v_whp,
    statistic="kl",
    multiplier=4,
    spec_kind="laplace",
))

_register(BoundInfo(
    id="conf_whp",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: 110000.0 * (d + math.log(d) * _log1d(delta)) / n,
    validity=_v_whp,
    statistic="kl",
    multiplier=4,
    spec_kind="conf",
))

_register(BoundInfo(
    id="adaptive_expectation",
    params=("n", "d", "s_n", "s_circ_half"),
    formula=lambda n, d, s_n, s_circ_half: (
        (2.4 * s_n + 2.0 * _xlog_ed_over(s_circ_half, d)) / (n + 1.0)
    ),
    validity=lambda n, d, s_n, s_circ_half: (
        [] if n >= 2 and d >= 2 else [f"needs n, d >= 2, got n = {n}, d = {d}"]
    ),
    statistic="kl",
    multiplier=1,
    spec_kind="adaptive",
))

_register(BoundInfo(
    id="adaptive_whp",
    params=("n", "d", "delta", "s_n", "s_circ_112"),
    formula=lambda n, d, delta, s_n, s_circ_112: 121000.0 * (
        s_n + s_circ_112 * math.log(E * d / s_n)
        + max(math.log(d), math.log(_log1d(delta))) * _log1d(delta)
    ) / n,
    validity=lambda n, d, delta, s_n, s_circ_112: _v_whp(n, d, delta, d_min=3),
    statistic="kl",
    multiplier=14,
    spec_kind="adaptive",
))

_register(BoundInfo(
    id="adaptive_conf_whp",
    params=("n", "d", "delta", "s_n", "s_circ_112"),
    formula=lambda n, d, delta, s_n, s_circ_112: 121000.0 * (
        s_n + s_circ_112 * math.log(E * d / s_n) + math.log(d) * _log1d(delta)
    ) / n,
    validity=lambda n, d, delta, s_n, s_circ_112: _v_whp(n, d, delta, d_min=3),
    statistic="kl",
    multiplier=14,
    spec_kind="adaptive-conf",
))

_register(BoundInfo(
    id="missing_mass_whp",
    params=("n", "delta", "s_circ_112"),
    formula=lambda n, delta, s_circ_112: (336.0 * s_circ_112 + 2500.0 * E * _log1d(delta)) / n,
    validity=lambda n, delta, s_circ_112: (
        ([] if n >= 2 else [f"needs n >= 2, got {n}"])
        + _delta_range(delta, "0", 0.0, "e^-1", math.exp(-1.0))
    ),
    statistic="underestimated_mass",
    multiplier=8,
))

_register(BoundInfo(
    id="missing_mass_subgaussian",
    params=("n", "delta", "expected_missing"),
    formula=lambda n, delta, expected_missing: expected_missing + math.sqrt(_log1d(delta) / n),
    validity=lambda n, delta, expected_missing: _delta_range(delta, "0", 0.0, "1", 1.0),
    statistic="missing_mass",
    multiplier=1,
))

_register(BoundInfo(
    id="missing_mass_bernstein",
    params=("n", "delta", "expected_missing", "d_n_plus"),
    formula=lambda n, delta, expected_missing, d_n_plus: (
        expected_missing
        + math.sqrt(2.0 * d_n_plus * _log1d(delta)) / n
        + _log1d(delta) / n
    ),
    validity=lambda n, delta, expected_missing, d_n_plus: _delta_range(delta, "0", 0.0, "1", 1.0),
    statistic="missing_mass",
    multiplier=1,
))

_register(BoundInfo(
    id="reverse_kl_types",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: (d * math.log(n + 1.0) + _log1d(delta)) / n,
    validity=lambda n, d, delta: (
        ([] if n >= 2 and d >= 2 else [f"needs n, d >= 2, got n = {n}, d = {d}"])
        + _delta_range(delta, "0", 0.0, "1", 1.0)
    ),
    statistic="reverse_kl",
    multiplier=1,
))

_register(BoundInfo(
    id="reverse_kl_linear",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: (6.0 * d + 6.0 * _log1d(delta)) / n,
    validity=lambda n, d, delta: (
        ([] if n >= 2 and d >= 2 else [f"needs n, d >= 2, got n = {n}, d = {d}"])
        + _delta_range(delta, "0", 0.0, "1", 1.0)
    ),
    statistic="reverse_kl",
    multiplier=1,
))

_register(BoundInfo(
    id="hellinger_whp",
    params=("n", "delta", "s_n"),
    formula=lambda n, delta, s_n: (4.0 * s_n + 7.0 * _log1d(delta)) / n,
    validity=lambda n, delta, s_n: _delta_range(delta, "0", 0.0, "1", 1.0),
    statistic="hellinger_sq",
    multiplier=2,
))

_register(BoundInfo(
    id="lower_confidence_independent",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: (d + _log1d(delta) * math.log(_log1d(delta))) / (5000.0 * n),
    validity=lambda n, d, delta: (
        ([] if n >= d >= 4000 else [f"needs n >= d >= 4000, got n = {n}, d = {d}"])
        + _delta_range(delta, "e^-n", math.exp(-n), "e^-16 (kappa = 1)", math.exp(-16.0))
    ),
    statistic=None,
    multiplier=1,
    direction="lower",
))

_register(BoundInfo(
    id="lower_minimax",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: (d + math.log(d) * _log1d(delta)) / (5000.0 * n),
    validity=lambda n, d, delta: (
        ([] if n >= d >= 5000 else [f"needs n >= d >= 5000, got n = {n}, d = {d}"])
        + _delta_range(delta, "e^-n", math.exp(-n), "e^-1", math.exp(-1.0))
    ),
    statistic=None,
    multiplier=1,
    direction="lower",
))

_register(BoundInfo(
    id="lower_sparse_highprob",
    params=("n", "d", "s"),
    formula=lambda n, d, s: s * math.log(E * d / s) / (300.0 * n),
    validity=lambda n, d, s: (
        [] if 1 <= s <= min(n, d / 55.0) else [f"needs 1 <= s <= min(n, d/55), got s = {s}"]
    ),
    statistic=None,
    multiplier=1,
    direction="lower",
))

_register(BoundInfo(
    id="lower_sparse_tail",
    params=("n", "d", "s", "delta"),
    formula=lambda n, d, s, delta: (
        (s * math.log(E * d / s) + math.log(d) * _log1d(delta)) / (320.0 * n)
    ),
    validity=lambda n, d, s, delta: (
        ([] if n >= 110 and d >= 110 else [f"needs n, d >= 110, got n = {n}, d = {d}"])
        + ([] if 2 <= s <= min(n, d / 55.0) else [f"needs 2 <= s <= min(n, d/55), got s = {s}"])
        + _delta_range(delta, "e^-n", math.exp(-n), "e^-2", math.exp(-2.0))
    ),
    statistic=None,
    multiplier=1,
    direction="lower",
))

_register(BoundInfo(
    id="construction_conf_indep",
    params=("n", "delta"),
    formula=lambda n, delta: _log1d(delta) * math.log(_log1d(delta)) / (10.0 * n),
    validity=lambda n, delta: _delta_range(delta, "e^-n", math.exp(-n), "e^-16 (kappa = 1)", math.exp(-16.0)),
    statistic=None,
    multiplier=1,
    direction="lower",
))

_register(BoundInfo(
    id="construction_two_point",
    params=("n", "d", "delta"),
    formula=lambda n, d, delta: math.log(d) * _log1d(delta) / (14.0 * n),
    validity=lambda n, d, delta: (
        ([] if n >= d >= 2 else [f"needs n >= d >= 2, got n = {n}, d = {d}"])
        + _delta_range(delta, "e^-n", math.exp(-n), "e^-1", math.exp(-1.0))
    ),
    statistic=None,
    multiplier=1,
    direction="lower",
))


def bound_ids() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def bound_info(bound_id: str) -> BoundInfo:
    try:
        return _REGISTRY[bound_id]
    except KeyError:
        raise ValidationError(f"unknown bound id {bound_id!r}; known: {', '.join(_REGISTRY)}") from None


def bound_value(bound_id: str, params: dict) -> BoundResult:
    """Evaluate a registered right-hand side with its literal constants.

    ``params`` must contain exactly the symbols the formula needs.
    Values outside the statement's validity region are returned with
    warnings rather than refused, so regime maps can probe freely.
    """
    info = bound_info(bound_id)
    got, need = set(params), set(info.params)
    if got != need:
        missing = sorted(need - got)
        extra = sorted(got - need)
        details = []
        if missing:
            details.append(f"missing {missing}")
        if extra:
            details.append(f"unexpected {extra}")
        raise ValidationError(f"bound {bound_id!r}: {'; '.join(details)}")
    kwargs = {k: params[k] for k in info.params}
    warnings = tuple(info.validity(**kwargs))
    return BoundResult(float(info.formula(**kwargs)), warnings)


def default_bounds_for_spec(spec: EstimatorSpec) -> tuple[str, ...]:
    """Bound ids conventionally checked for each estimation rule."""
    return {
        "mle": ("reverse_kl_linear",),
        "laplace": ("laplace_whp",),
        "kt": ("laplace_whp",),
        "add": ("laplace_whp",),
        "conf": ("conf_whp",),
        "adaptive": ("adaptive_whp",),
        "adaptive-conf": ("adaptive_conf_whp",),
    }[spec.kind]
