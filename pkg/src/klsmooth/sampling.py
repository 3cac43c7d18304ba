"""Seedable sample generation and sample-dependent masses.

Randomness comes from counter-based Philox streams keyed by
``(master_seed, stream_index)``: identical keys give identical output on
every platform, and distinct stream indices give statistically
independent streams with no coordination.  Monte Carlo code keys one
stream per trial, which makes any trial reproducible in isolation and
makes results independent of how trials are scheduled across workers.

Categorical sampling uses an alias table built once per distribution
(O(d) setup, O(1) per draw); Poisson variates use the generator's native
sampler, which switches between inversion (small mean) and transformed
rejection (large mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import ProbVector
from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "RngSeed",
    "AliasSampler",
    "draw_counts",
    "draw_poissonized_counts",
    "draw_coupled_poissonized",
    "SampleSummary",
    "summarize",
    "empirical_upper_cdf_gap",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """Key of one reproducible random stream."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise ValidationError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


class AliasSampler:
    """Alias-method sampler for one fixed categorical distribution."""

    def __init__(self, pv: ProbVector):
        p = pv.probs
        d = p.shape[0]
        scaled = p * d
        accept = np.ones(d)
        alias = np.arange(d)
        small = [i for i in range(d) if scaled[i] < 1.0]
        large = [i for i in range(d) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            g = large.pop()
            accept[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are within rounding of 1; they keep accept = 1
        self.d = d
        self.probs = p
        self._accept = accept
        self._alias = alias

    def draw_labels(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n class labels, i.i.d. from the distribution."""
        if n < 0:
            raise ValidationError("sample size must be nonnegative")
        if n == 0:
            return np.empty(0, dtype=np.int64)
        idx = rng.integers(0, self.d, size=n)
        keep = rng.random(n) < self._accept[idx]
        return np.where(keep, idx, self._alias[idx])

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Class counts of one size-n sample."""
        return np.bincount(self.draw_labels(n, rng), minlength=self.d)

    def draw_matrix(self, trials: int, n: int, rng: np.random.Generator,
                    max_chunk: int = 4_000_000) -> np.ndarray:
        """(trials, d) count matrix of independent size-n samples from one stream.

        Deterministic for fixed arguments; the stream consumption (and
        hence the output) depends on ``max_chunk``, so keep it at its
        default when reproducibility matters.
        """
        if trials < 0:
            raise ValidationError("trials must be nonnegative")
        out = np.empty((trials, self.d), dtype=np.int64)
        rows_per_chunk = max(1, max_chunk // max(n, 1))
        done = 0
        while done < trials:
            rows = min(rows_per_chunk, trials - done)
            labels = self.draw_labels(rows * n, rng).reshape(rows, n)
            offsets = np.arange(rows, dtype=np.int64)[:, None] * self.d
            flat = np.bincount((labels + offsets).ravel(), minlength=rows * self.d)
            out[done:done + rows] = flat.reshape(rows, self.d)
            done += rows
        return out


def draw_counts(pv: ProbVector, n: int, seed: RngSeed) -> np.ndarray:
    """Class counts of one size-n i.i.d. sample; multinomial(n, pv)."""
    return AliasSampler(pv).draw(n, seed.generator())


def draw_poissonized_counts(pv: ProbVector, n: int, seed: RngSeed) -> np.ndarray:
    """Independent per-class counts with class j ~ Poisson(n * p_j / 2)."""
    if n < 1:
        raise ValidationError("Poissonized sampling needs n >= 1")
    rng = seed.generator()
    return rng.poisson(n * pv.probs / 2.0)


def draw_coupled_poissonized(pv: ProbVector, n: int, seed: RngSeed):
    """Coupled pair of count vectors sharing one underlying i.i.d. stream.

    Draws an independent N ~ Poisson(n/2), then a single label stream of
    length max(n, N).  Returns ``(counts, poissonized, N)`` where
    ``counts`` summarizes the first n labels and ``poissonized`` the
    first N.  On the event N <= n, poissonized <= counts coordinatewise.
    """
    if n < 1:
        raise ValidationError("coupled Poissonization needs n >= 1")
    rng = seed.generator()
    big_n = int(rng.poisson(n / 2.0))
    sampler = AliasSampler(pv)
    labels = sampler.draw_labels(max(n, big_n), rng)
    counts = np.bincount(labels[:n], minlength=pv.d)
    poissonized = np.bincount(labels[:big_n], minlength=pv.d)
    return counts, poissonized, big_n


@dataclass(frozen=True)
class SampleSummary:
    """Counts plus the sample-dependent masses of one sample.

    ``missing_mass`` is the total true probability of unseen classes;
    ``underestimated_mass`` is the total true probability of classes
    whose count fell to at most a quarter of its expectation.  Both are
    subset sums of the class probabilities, and missing <=
    underestimated always (a count of zero is below every quarter-mean).
    """

    counts: np.ndarray
    distinct: int
    missing_mass: float
    underestimated_mass: float


def summarize(pv: ProbVector, counts) -> SampleSummary:
    counts = np.asarray(getattr(counts, "counts", counts))
    if counts.shape != pv.probs.shape:
        raise DimensionMismatchError(
            f"counts have shape {counts.shape}, distribution has {pv.probs.shape}"
        )
    n = int(counts.sum())
    p = pv.probs
    missing = float(p[counts == 0].sum())
    under = float(p[counts <= n * p / 4.0].sum())
    return SampleSummary(
        counts=counts,
        distinct=int(np.count_nonzero(counts)),
        missing_mass=missing,
        underestimated_mass=under,
    )


def empirical_upper_cdf_gap(x_samples, y_samples, grid) -> float:
    """Largest violation of empirical stochastic domination X <= Y.

    Returns max over grid points t of  P_hat(X >= t) - P_hat(Y >= t);
    a result <= 0 means the empirical upper CDFs certify X dominated by
    Y on the grid, and small positive values are Monte Carlo noise.
    """
    x = np.sort(np.asarray(x_samples, dtype=float))
    y = np.sort(np.asarray(y_samples, dtype=float))
    grid = np.asarray(grid, dtype=float)
    p_x = 1.0 - np.searchsorted(x, grid, side="left") / len(x)
    p_y = 1.0 - np.searchsorted(y, grid, side="left") / len(y)
    return float(np.max(p_x - p_y))
