"""Scalar divergence kernels and tail evaluators.

Everything here is a pure function of its inputs, computed in 64-bit
floating point.  Infinite divergences are represented by ``math.inf``
(no saturation at a large finite value), so downstream ordering and
quantile logic work unchanged: ``inf`` compares greater than every
finite float.

Conventions for the boundary cases:

* ``x * log(x)`` is ``0`` at ``x = 0``;
* ``entropy_h(0) = 1``;
* ``kl_term_D(0, v) = v`` and ``kl_term_D(u, 0) = inf`` for ``u > 0``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "xlogx",
    "entropy_h",
    "kl_term_D",
    "kl_divergence",
    "kl_divergence_rows",
    "hellinger_sq",
    "poisson_chernoff_tail",
    "kl_hellinger_ratio_phi",
]

# Below this distance from t = 1, h(t) is evaluated by its Taylor series
# to avoid catastrophic cancellation in t*log(t) - t + 1.
_H_SERIES_WINDOW = 1e-4


def xlogx(x: float) -> float:
    """x * log(x) with the continuous extension 0 at x = 0."""
    if x < 0:
        raise ValidationError(f"xlogx needs x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return x * math.log(x)


def _h_series(eps: float) -> float:
    # h(1 + eps) = eps^2/2 - eps^3/6 + eps^4/12 - eps^5/20 + eps^6/30 - ...
    # (term k is (-1)^k eps^k / (k (k-1))); truncation error ~ eps^7.
    return eps * eps * (0.5 + eps * (-1.0 / 6.0 + eps * (1.0 / 12.0 + eps * (-1.0 / 20.0 + eps / 30.0))))


def entropy_h(t: float) -> float:
    """The convex function h(t) = t*log(t) - t + 1, with h(0) = 1.

    h is nonnegative, vanishes only at t = 1, and satisfies
    h(t) <= (t-1)^2 everywhere, h(t) <= t*log(t) for t >= 1 and
    h(t) >= t*log(t)/e for t >= e.
    """
    if t < 0:
        raise ValidationError(f"entropy_h needs t >= 0, got {t}")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return math.inf
    eps = t - 1.0
    if abs(eps) < _H_SERIES_WINDOW:
        return _h_series(eps)
    return t * math.log(t) - t + 1.0


def _h_array(t: np.ndarray) -> np.ndarray:
    """Vectorized entropy_h on a nonnegative array."""
    t = np.asarray(t, dtype=float)
    eps = t - 1.0
    near = np.abs(eps) < _H_SERIES_WINDOW
    safe = np.where(t > 0, t, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = safe * np.log(safe) - t + 1.0
    series = eps * eps * (0.5 + eps * (-1.0 / 6.0 + eps * (1.0 / 12.0 + eps * (-1.0 / 20.0 + eps / 30.0))))
    out = np.where(near, series, direct)
    return np.where(t == 0, 1.0, out)


def kl_term_D(u: float, v: float) -> float:
    """Single-coordinate divergence D(u, v) = u*log(u/v) - u + v.

    Boundary conventions: D(0, v) = v, and D(u, 0) = inf for u > 0.
    For v > 0 this equals v * h(u/v), which is the numerically stable
    form near the diagonal.
    """
    if u < 0 or v < 0:
        raise ValidationError(f"kl_term_D needs nonnegative inputs, got ({u}, {v})")
    if u == 0.0:
        return v
    if v == 0.0:
        return math.inf
    return v * entropy_h(u / v)


def _coerce_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    q = np.asarray(getattr(q, "probs", q), dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"shape mismatch: {p.shape} vs {q.shape}")
    return p, q


def kl_divergence(p, q) -> float:
    """Relative entropy sum_j D(p_j, q_j) between two nonnegative vectors.

    Equals sum_j p_j log(p_j / q_j) when both vectors sum to 1.  Returns
    ``inf`` as soon as some coordinate has p_j > 0 but q_j = 0.
    Accepts ProbVector instances or any array-like.
    """
    p, q = _coerce_pair(p, q)
    if np.any(p < 0) or np.any(q < 0):
        raise ValidationError("kl_divergence needs nonnegative inputs")
    zero_q = q == 0
    if np.any(p[zero_q] > 0):
        return math.inf
    pos = ~zero_q
    qp = q[pos]
    return float(np.dot(qp, _h_array(p[pos] / qp)))


def kl_divergence_rows(p, q_rows: np.ndarray) -> np.ndarray:
    """Row-wise relative entropy KL(p, q_i) for a matrix of candidates.

    ``q_rows`` has one candidate distribution per row; rows containing a
    zero where ``p`` is positive yield ``inf``.
    """
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    q_rows = np.asarray(q_rows, dtype=float)
    if q_rows.ndim != 2 or q_rows.shape[1] != p.shape[0]:
        raise DimensionMismatchError(f"expected rows of length {p.shape[0]}")
    support = p > 0
    ps = p[support]
    qs = q_rows[:, support]
    plogp = float(np.dot(ps, np.log(ps)))
    with np.errstate(divide="ignore"):
        logq = np.log(qs)
    # -inf * positive p is a legitimate +inf contribution; no NaN can arise
    # because columns with p_j = 0 were dropped.
    return plogp - logq @ ps


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance sum_j (sqrt(p_j) - sqrt(q_j))^2, in [0, 2]."""
    p, q = _coerce_pair(p, q)
    if np.any(p < 0) or np.any(q < 0):
        raise ValidationError("hellinger_sq needs nonnegative inputs")
    diff = np.sqrt(p) - np.sqrt(q)
    return float(np.dot(diff, diff))


def poisson_chernoff_tail(mu: float, lam: float) -> float:
    """exp(-D(mu, lam)): the Chernoff bound for Poisson(lam) tails at mu.

    Bounds P(N >= mu) when mu >= lam and P(N <= mu) when mu <= lam.
    """
    if mu < 0 or lam < 0:
        raise ValidationError("poisson_chernoff_tail needs nonnegative inputs")
    d = kl_term_D(mu, lam)
    return 0.0 if math.isinf(d) else math.exp(-d)


def kl_hellinger_ratio_phi(c: float) -> float:
    """The ratio phi(c) = h(c) / (sqrt(c) - 1)^2, extended by phi(1) = 2.

    phi is nondecreasing, phi(0) = 1, and phi(c) <= 4*log(c) for c >= 4.
    It converts squared-Hellinger control into divergence control:
    D(p, q) <= phi(c) * (sqrt(p) - sqrt(q))^2 whenever q >= p / c.
    """
    if c < 0:
        raise ValidationError(f"kl_hellinger_ratio_phi needs c >= 0, got {c}")
    if c == 0.0:
        return 1.0
    if math.isinf(c):
        return math.inf
    root = math.sqrt(c)
    if abs(root - 1.0) < 1e-6:
        # Removable singularity: phi(1 + eps) = 2 + eps/3 + O(eps^2).
        return 2.0 + (c - 1.0) / 3.0
    return entropy_h(c) / (root - 1.0) ** 2
