"""Probability vectors and their sample-size-indexed complexity functionals.

The functionals all take the *true* distribution (nothing is estimated
from data here):

* ``effective_support``: sum of min(n*p_j, 1) — the typical number of
  classes a size-n sample uncovers;
* ``effective_missing_support``: sum of min(e^(1-n*p_j), n*p_j) — the
  weight of classes a size-n sample typically misses;
* ``expected_missing_mass`` / ``expected_distinct_classes``: the exact
  closed forms sum p_j(1-p_j)^n and sum (1-(1-p_j)^n);
* ``eps_bar``: the smallest subset sum of class probabilities lying in
  [eps, 1], computed exactly by meet-in-the-middle enumeration at small
  dimension.

Sample sizes are allowed to be any positive real where the defining
formulas extend smoothly (the searches in ``critical_samples`` evaluate
them at fractional arguments such as n/2 and n/112).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import CapExceededError, ValidationError

__all__ = [
    "ProbVector",
    "make_prob_vector",
    "resolve_distribution",
    "SparsityProfile",
    "sparsity_profile",
    "effective_support",
    "effective_missing_support",
    "poisson_missing_weight",
    "expected_distinct_classes",
    "expected_missing_mass",
    "expected_new_classes",
    "missing_mass_variance_factor",
    "EpsBarResult",
    "eps_bar",
    "GapCheck",
    "gap_characterization",
    "CriticalSamples",
    "critical_samples",
]

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProbVector:
    """An immutable probability vector over d >= 2 labeled classes.

    Zero-probability classes are kept in place: indices are class labels,
    and several adversarial constructions rely on labeled zero classes.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValidationError("a probability vector needs at least 2 classes")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("probabilities must be finite and nonnegative")
        if abs(float(p.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(
                f"probabilities must sum to 1 within {NORMALIZATION_TOL}, got {p.sum()!r}"
            )
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return int(self.probs.shape[0])

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    def __len__(self) -> int:
        return self.d

    def to_json(self) -> list[float]:
        return [float(x) for x in self.probs]


def make_prob_vector(weights) -> ProbVector:
    """Normalize nonnegative weights into a ProbVector.

    Rounding drift from the division is absorbed into the largest entry
    (which always dwarfs the drift), so the result sums to 1 exactly (up
    to one final rounding) and zeros stay exactly zero.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValidationError("need at least 2 weights")
    if np.any(~np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < 0):
        raise ValidationError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise ValidationError("at least one weight must be positive")
    p = w / total
    j = int(np.argmax(p))
    p[j] += 1.0 - float(p.sum())
    if p[j] < 0:
        raise ValidationError("normalization produced a negative entry")
    return ProbVector(p)


def resolve_distribution(obj) -> ProbVector:
    """Build a ProbVector from its JSON form.

    Accepts a JSON string, a list of numbers, a ProbVector (returned as
    is), or a shorthand object ``{"kind": ..., ...}`` with kinds
    ``uniform`` (d), ``geometric`` (rate, d), ``polynomial`` (alpha, d)
    and ``sparse-uniform`` (s, d, optional c).
    """
    if isinstance(obj, ProbVector):
        return obj
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed distribution JSON: {exc}") from exc
    if isinstance(obj, (list, tuple, np.ndarray)):
        return make_prob_vector(obj)
    if isinstance(obj, dict):
        try:
            kind = obj["kind"]
        except KeyError:
            raise ValidationError("distribution object needs a 'kind' field") from None
        from . import adversarial  # local import: adversarial depends on this module

        params = {k: v for k, v in obj.items() if k != "kind"}
        try:
            if kind == "uniform":
                return make_prob_vector(np.ones(int(params["d"])))
            if kind == "geometric":
                return adversarial.geometric_family(rate=float(params["rate"]), d=int(params["d"]))
            if kind == "polynomial":
                return adversarial.polynomial_family(alpha=float(params["alpha"]), d=int(params["d"]))
            if kind == "sparse-uniform":
                return adversarial.sparse_uniform_family(
                    s=int(params["s"]), d=int(params["d"]), c=float(params.get("c", 1.0))
                )
        except KeyError as exc:
            raise ValidationError(f"distribution kind {kind!r} is missing parameter {exc}") from None
        raise ValidationError(f"unknown distribution kind {kind!r}")
    raise ValidationError(f"cannot interpret {type(obj).__name__} as a distribution")


# ---------------------------------------------------------------------------
# Complexity functionals


def _check_n(n: float) -> float:
    n = float(n)
    if not n > 0 or math.isinf(n):
        raise ValidationError(f"sample size must be a positive finite real, got {n}")
    return n


def effective_support(pv: ProbVector, n: float) -> float:
    """sum_j min(n*p_j, 1); lies in [min(n,1), min(n, d)] and grows with n."""
    n = _check_n(n)
    return float(np.minimum(n * pv.probs, 1.0).sum())


def effective_missing_support(pv: ProbVector, n: float) -> float:
    """sum_j min(e^(1 - n*p_j), n*p_j); at most effective_support(pv, n)."""
    n = _check_n(n)
    np_ = n * pv.probs
    return float(np.minimum(np.exp(1.0 - np_), np_).sum())


def poisson_missing_weight(pv: ProbVector, n: float) -> float:
    """sum_j (n*p_j) e^(-n*p_j): n times the expected missing mass under
    a Poisson(n)-sized sample."""
    n = _check_n(n)
    np_ = n * pv.probs
    return float((np_ * np.exp(-np_)).sum())


def _q_pow(pv: ProbVector, n: int) -> np.ndarray:
    # (1 - p_j)^n, stable for p near 0 and exact 0 for p = 1.
    p = pv.probs
    out = np.zeros_like(p)
    lt1 = p < 1.0
    out[lt1] = np.exp(n * np.log1p(-p[lt1]))
    return out


def _check_int_n(n) -> int:
    if float(n) != int(n) or int(n) < 1:
        raise ValidationError(f"this functional needs an integer sample size >= 1, got {n}")
    return int(n)


def expected_distinct_classes(pv: ProbVector, n: int) -> float:
    """Exact expected number of distinct classes in a size-n sample."""
    n = _check_int_n(n)
    return float((1.0 - _q_pow(pv, n)).sum())


def expected_missing_mass(pv: ProbVector, n: int) -> float:
    """Exact expected missing mass: sum_j p_j (1 - p_j)^n."""
    n = _check_int_n(n)
    return float(np.dot(pv.probs, _q_pow(pv, n)))


def expected_new_classes(pv: ProbVector, n: int) -> float:
    """Expected number of classes first seen in the second half of a
    size-2n sample: sum_j (1-p_j)^n (1 - (1-p_j)^n)."""
    n = _check_int_n(n)
    q = _q_pow(pv, n)
    return float((q * (1.0 - q)).sum())


def missing_mass_variance_factor(pv: ProbVector, n: float) -> float:
    """sum_j (1 - (n*p_j + 1) e^(-n*p_j)): the variance proxy entering the
    Bernstein-type missing-mass deviation bound."""
    n = _check_n(n)
    np_ = n * pv.probs
    return float((1.0 - (np_ + 1.0) * np.exp(-np_)).sum())


@dataclass(frozen=True)
class SparsityProfile:
    """All complexity functionals of a (distribution, sample size) pair.

    ``s_diamond``, ``expected_distinct`` and ``expected_missing`` require
    an integral sample size (and ``s_diamond`` additionally n >= 3); they
    are ``None`` when undefined.
    """

    n: float
    s_n: float
    s_circ: float
    s_bullet: float
    s_diamond: Optional[float]
    expected_distinct: Optional[float]
    expected_missing: Optional[float]
    d_n_plus: float


def sparsity_profile(pv: ProbVector, n: float) -> SparsityProfile:
    """Evaluate every complexity functional at sample size n > 0."""
    n = _check_n(n)
    integral = float(n) == int(n)
    ni = int(n) if integral else None
    return SparsityProfile(
        n=n,
        s_n=effective_support(pv, n),
        s_circ=effective_missing_support(pv, n),
        s_bullet=poisson_missing_weight(pv, n),
        s_diamond=expected_new_classes(pv, ni) if integral and ni >= 3 else None,
        expected_distinct=expected_distinct_classes(pv, ni) if integral else None,
        expected_missing=expected_missing_mass(pv, ni) if integral else None,
        d_n_plus=missing_mass_variance_factor(pv, n),
    )


# ---------------------------------------------------------------------------
# Subset sums of class probabilities


class EpsBarResult(NamedTuple):
    """Smallest subset sum of class probabilities in [eps, 1].

    ``exact`` is False when the dimension exceeded the enumeration cap
    and no shortcut applied; the value is then the conservative lower
    bound eps itself.
    """

    value: float
    exact: bool


def _half_sums(vals: np.ndarray) -> np.ndarray:
    sums = np.zeros(1)
    for v in vals:
        sums = np.concatenate([sums, sums + v])
    return sums


def eps_bar(pv: ProbVector, eps: float, cap: int = 34) -> EpsBarResult:
    """inf{ sum_{j in J} p_j : J subset of classes } intersected with [eps, 1].

    The infimum exists because the full subset sums to 1.  Exact
    meet-in-the-middle enumeration is used while the number of positive
    classes is at most ``cap``; beyond that, a sorted-suffix shortcut is
    tried (valid when one class dominates the tail), and otherwise the
    conservative lower bound eps is returned flagged as approximate.
    """
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    vals = np.sort(pv.probs[pv.probs > 0])[::-1]
    k = len(vals)
    if k <= cap:
        left = _half_sums(vals[: k // 2])
        right = np.sort(_half_sums(vals[k // 2:]))
        idx = np.searchsorted(right, eps - left, side="left")
        ok = idx < len(right)
        candidates = left[ok] + right[idx[ok]]
        candidates = candidates[candidates >= eps]
        return EpsBarResult(float(candidates.min()), True)
    # Sorted descending, suffix[j] = sum of everything strictly after j.
    suffix = np.concatenate([np.cumsum(vals[::-1])[::-1][1:], [0.0]])
    eligible = np.flatnonzero((vals >= eps) & (suffix < eps))
    if len(eligible):
        # Any subset meeting class j <= j* sums to >= p_{j*}; any subset
        # inside the suffix sums to < eps.  Hence the infimum is p_{j*}.
        return EpsBarResult(float(vals[eligible[0]]), True)
    return EpsBarResult(eps, False)


@dataclass(frozen=True)
class GapCheck:
    """Outcome of the dominant-class gap test.

    When ``holds``, ``index`` is the 1-based position (after sorting
    probabilities in decreasing order) of the class whose probability
    equals the subset-sum infimum, and ``value`` is that probability.
    """

    holds: bool
    index: Optional[int] = None
    value: Optional[float] = None


def gap_characterization(pv: ProbVector, eps: float, eps_bar_target: float) -> GapCheck:
    """Test whether the subset-sum infimum jumps to at least ``eps_bar_target``.

    Equivalent condition: after sorting probabilities in decreasing
    order, some position j* has p_{j*} >= eps_bar_target while the total
    mass after j* is < eps.  When it holds, eps_bar(pv, eps) equals the
    witnessed p_{j*}; the witness is unique.
    """
    if not 0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 1/2), got {eps}")
    if eps_bar_target < 2 * eps:
        raise ValidationError("eps_bar_target must be at least 2*eps")
    vals = np.sort(pv.probs)[::-1]
    suffix = np.concatenate([np.cumsum(vals[::-1])[::-1][1:], [0.0]])
    hits = np.flatnonzero((vals >= eps_bar_target) & (suffix < eps))
    if len(hits) == 0:
        return GapCheck(False)
    j = int(hits[0])
    return GapCheck(True, index=j + 1, value=float(vals[j]))


# ---------------------------------------------------------------------------
# Critical sample sizes

SEARCH_CAP = 2 ** 40


def _min_n_satisfying(pred, lo: int = 1, hi_cap: int = SEARCH_CAP, what: str = "threshold") -> int:
    """Smallest integer n >= lo with pred(n) true; pred must be monotone."""
    if pred(lo):
        return lo
    hi = lo
    while not pred(hi):
        hi *= 2
        if hi > hi_cap:
            raise CapExceededError(hi_cap, what)
    lo_false = hi // 2
    while hi - lo_false > 1:
        mid = (hi + lo_false) // 2
        if pred(mid):
            hi = mid
        else:
            lo_false = mid
    return hi


@dataclass(frozen=True)
class CriticalSamples:
    """Minimal sample sizes driving each risk/mass functional below eps.

    ``n_dev`` is the closed-form real log(d) * log(1/delta) / eps; the
    other four are minimal integers for their monotone thresholds.
    ``warnings`` records searches that had to stop early (the missing-
    support threshold has a bounded validity region in n).
    """

    n_obs: int
    n_miss: int
    n_dev: float
    n_circ: int
    n_exp: int
    warnings: tuple[str, ...] = field(default_factory=tuple)


def critical_samples(pv: ProbVector, d: int, eps: float, delta: float) -> CriticalSamples:
    """Compute all critical sample sizes of (pv, d) at accuracy eps, confidence delta."""
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if d != pv.d:
        raise ValidationError(f"d = {d} does not match the distribution ({pv.d} classes)")
    warnings: list[str] = []

    n_obs = _min_n_satisfying(lambda n: effective_support(pv, n) / n <= eps, what="n_obs search")
    n_circ = _min_n_satisfying(lambda n: effective_missing_support(pv, n) / n <= eps, what="n_circ search")
    n_exp = _min_n_satisfying(lambda n: expected_missing_mass(pv, n) <= eps, what="n_exp search")
    n_dev = math.log(d) * math.log(1.0 / delta) / eps

    # The miss threshold compares s_n_circ/n against eps/log(e*d/(eps*n)),
    # which is only meaningful while the log stays positive, i.e. for
    # n < e*d/eps.  The search is confined to that region.
    n_pos_max = math.ceil(math.e * d / eps) - 1
    while n_pos_max >= 1 and math.e * d / (eps * n_pos_max) <= 1.0:
        n_pos_max -= 1

    def miss_pred(n: int) -> bool:
        if n > n_pos_max:
            return True  # never queried beyond the clamp below
        return effective_missing_support(pv, n) / n <= eps / math.log(math.e * d / (eps * n))

    if n_pos_max < 1:
        warnings.append("n_miss: no sample size keeps log(e*d/(eps*n)) positive; reporting 1")
        n_miss = 1
    elif miss_pred(1):
        n_miss = 1
    else:
        lo_false, hi = 1, 1
        while True:
            hi = min(hi * 2, n_pos_max)
            if miss_pred(hi):
                break
            lo_false = hi
            if hi == n_pos_max:
                break
        if not miss_pred(hi):
            warnings.append(
                f"n_miss: threshold unmet on the valid region; reporting its right edge {n_pos_max}"
            )
            n_miss = n_pos_max
        else:
            while hi - lo_false > 1:
                mid = (hi + lo_false) // 2
                if miss_pred(mid):
                    hi = mid
                else:
                    lo_false = mid
            n_miss = hi

    return CriticalSamples(
        n_obs=n_obs,
        n_miss=n_miss,
        n_dev=n_dev,
        n_circ=n_circ,
        n_exp=n_exp,
        warnings=tuple(warnings),
    )
