"""Exact small-instance risk computation by enumerating count vectors.

Every estimation rule in the package is a function of the count vector
alone, so the d^n sample outcomes collapse to the C(n+d-1, d-1)
compositions of n into d parts.  Enumerating those with their
multinomial probabilities gives exact expectations, tails and quantiles
of the risk at desk scale (roughly n <= 30, d <= 6 under the default
cap).  Probabilities are computed in log space and exponentiated per
atom, so factorials never overflow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .distribution import ProbVector
from .errors import SizeCapError, ValidationError
from .estimators import CountVector, EstimatorSpec, smoothing_level

__all__ = [
    "DEFAULT_COMPOSITION_CAP",
    "composition_count",
    "composition_matrix",
    "enumerate_count_vectors",
    "ExactDistribution",
    "ExactFunctionals",
    "exact_functionals",
]

DEFAULT_COMPOSITION_CAP = 5_000_000


def composition_count(n: int, d: int) -> int:
    """Number of compositions of n into d nonnegative parts: C(n+d-1, d-1)."""
    return math.comb(n + d - 1, d - 1)


@lru_cache(maxsize=128)
def _composition_matrix_cached(n: int, d: int) -> np.ndarray:
    if d == 1:
        out = np.array([[n]], dtype=np.int64)
    else:
        blocks = []
        for k in range(n, -1, -1):
            sub = _composition_matrix_cached(n - k, d - 1)
            first = np.full((sub.shape[0], 1), k, dtype=np.int64)
            blocks.append(np.hstack([first, sub]))
        out = np.vstack(blocks)
    out.flags.writeable = False
    return out


def composition_matrix(n: int, d: int, cap: int = DEFAULT_COMPOSITION_CAP) -> np.ndarray:
    """All compositions of n into d parts, one per row (read-only, cached)."""
    if n < 0 or d < 1:
        raise ValidationError(f"need n >= 0 and d >= 1, got n = {n}, d = {d}")
    count = composition_count(n, d)
    if count > cap:
        raise SizeCapError(count, cap)
    return _composition_matrix_cached(n, d)


def _log_probs(pv: ProbVector, counts: np.ndarray, n: int) -> np.ndarray:
    """log multinomial probability of each row; -inf for impossible rows."""
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n + 1)))])
    p = pv.probs
    pos = p > 0
    with np.errstate(divide="ignore"):
        logp = np.where(pos, np.log(np.where(pos, p, 1.0)), -np.inf)
    with np.errstate(invalid="ignore"):
        term = np.where(counts > 0, counts * logp[None, :], 0.0)
    return logfact[n] - logfact[counts].sum(axis=1) + term.sum(axis=1)


def enumerate_count_vectors(
    pv: ProbVector, n: int, cap: int = DEFAULT_COMPOSITION_CAP
) -> Iterator[tuple[CountVector, float]]:
    """Yield every count vector of a size-n sample with its probability.

    The probabilities sum to 1 over the stream; rows that require a
    zero-probability class are yielded with probability 0.
    """
    counts = composition_matrix(n, pv.d, cap=cap)
    probs = np.exp(_log_probs(pv, counts, n))
    for row, pr in zip(counts, probs):
        yield CountVector(row), float(pr)


@dataclass(frozen=True)
class ExactDistribution:
    """A finite distribution given by sorted (value, probability) atoms.

    Values may include ``inf``.  ``quantile`` uses the left-continuous
    generalized inverse (the smallest value whose cumulative mass
    reaches the requested order), matching the Monte Carlo convention.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1:
            raise ValidationError("atoms need matching 1-d values and probabilities")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValidationError("atom probabilities must be nonnegative and sum to 1")
        order = np.argsort(v)
        v, p = v[order].copy(), p[order].copy()
        v.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def tail(self, t: float) -> float:
        """P(X >= t)."""
        idx = np.searchsorted(self.values, t, side="left")
        return float(self.probs[idx:].sum())

    def quantile(self, q: float) -> float:
        """Smallest value whose cumulative probability is at least q."""
        if not 0 <= q <= 1:
            raise ValidationError(f"quantile order must lie in [0, 1], got {q}")
        if q == 0:
            return float(self.values[0])
        cum = np.cumsum(self.probs)
        cum[-1] = max(cum[-1], 1.0)  # guard rounding at the top
        idx = int(np.searchsorted(cum, q, side="left"))
        return float(self.values[min(idx, len(self.values) - 1)])

    def mean(self) -> float:
        if np.any(np.isinf(self.values) & (self.probs > 0)):
            return math.inf
        finite = self.probs > 0
        return float(np.dot(self.values[finite], self.probs[finite]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value", "probability"])
            for v, p in zip(self.values, self.probs):
                writer.writerow(["inf" if math.isinf(v) else f"{v:.12g}", f"{p:.12g}"])


@dataclass(frozen=True)
class ExactFunctionals:
    """Exact risk summary of one (distribution, n, estimator) triple."""

    expected_kl: float
    expected_missing: float
    expected_distinct: float
    risk_distribution: ExactDistribution

    def tail(self, t: float) -> float:
        return self.risk_distribution.tail(t)

    def quantile(self, q: float) -> float:
        return self.risk_distribution.quantile(q)


def _aggregate_atoms(values: np.ndarray, probs: np.ndarray) -> ExactDistribution:
    keep = probs > 0
    values, probs = values[keep], probs[keep]
    order = np.argsort(values)
    values, probs = values[order], probs[order]
    uniq, start = np.unique(values, return_index=True)
    merged = np.add.reduceat(probs, start)
    # restore exact total mass 1 lost to per-atom rounding
    merged = merged / merged.sum()
    return ExactDistribution(uniq, merged)


def exact_functionals(
    pv: ProbVector, n: int, spec: EstimatorSpec, cap: int = DEFAULT_COMPOSITION_CAP
) -> ExactFunctionals:
    """Exact risk distribution and expectations by full enumeration.

    ``expected_kl`` is ``inf`` when some positive-probability count
    vector drives the divergence to infinity (possible for ``mle``).
    """
    if n < 1:
        raise ValidationError("exact functionals need n >= 1")
    d = pv.d
    counts = composition_matrix(n, d, cap=cap)
    probs = np.exp(_log_probs(pv, counts, n))
    p = pv.probs

    if spec.kind == "mle":
        q_rows = counts / n
    elif spec.kind in ("adaptive", "adaptive-conf"):
        distinct = np.count_nonzero(counts, axis=1).astype(float)
        if spec.kind == "adaptive":
            lam = distinct / d
        else:
            lam = np.maximum(distinct, math.log(1.0 / spec.delta)) / d
        q_rows = (counts + lam[:, None]) / (n + lam[:, None] * d)
    else:
        lam0 = smoothing_level(spec, 0, d)
        q_rows = (counts + lam0) / (n + lam0 * d)

    support = p > 0
    ps = p[support]
    plogp = float(np.dot(ps, np.log(ps)))
    with np.errstate(divide="ignore"):
        logq = np.log(q_rows[:, support])
    # p_j > 0 against q_ij = 0 contributes +inf, which is the intended value
    with np.errstate(invalid="ignore"):
        kl_rows = plogp - logq @ ps
    kl_rows = np.where(np.isnan(kl_rows), np.inf, kl_rows)

    live = probs > 0
    if np.any(np.isinf(kl_rows[live])):
        expected_kl = math.inf
    else:
        expected_kl = float(np.dot(kl_rows[live], probs[live]))
    expected_missing = float(np.dot((counts == 0).astype(float) @ p, probs))
    expected_distinct = float(np.dot((counts > 0).sum(axis=1), probs))
    dist = _aggregate_atoms(kl_rows, probs)
    return ExactFunctionals(
        expected_kl=expected_kl,
        expected_missing=expected_missing,
        expected_distinct=expected_distinct,
        risk_distribution=dist,
    )
