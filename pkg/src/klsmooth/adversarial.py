"""Hard-instance generators and stylized distribution families.

The two-point constructions place almost all mass on class 1 and tune
the leftover mass rho = 1 - delta^(1/n) so that the all-ones sample
(only class 1 observed) has probability exactly delta.  An estimator
that does well when the truth is a point mass must then starve some
other class, and pays for it on the event where that class's mass is
real but invisible.

Out-of-range parameters are accepted with a ``RuntimeWarning`` (the
constructions remain well defined; only the attached guarantees may not
apply), except for structural errors such as out-of-range indices.
"""

from __future__ import annotations

import math
import warnings as _warnings

import numpy as np

from .distribution import ProbVector, make_prob_vector
from .errors import ValidationError

__all__ = [
    "two_point_family",
    "conf_indep_adversary",
    "sparse_support_instance",
    "random_support",
    "polynomial_family",
    "geometric_family",
    "sparse_uniform_family",
    "shape_family",
]


def _warn_range(condition: bool, message: str) -> None:
    if not condition:
        _warnings.warn(message, RuntimeWarning, stacklevel=3)


def _two_point(d: int, j: int, rho: float) -> ProbVector:
    p = np.zeros(d)
    p[0] = 1.0 - rho
    p[j - 1] += rho
    return make_prob_vector(p)


def two_point_family(n: int, d: int, delta: float) -> list[ProbVector]:
    """The d-member family of two-point mixtures used against any fixed estimator.

    Member 1 is the point mass on class 1; member j >= 2 keeps mass
    delta^(1/n) on class 1 and moves the rest to class j.  Every member
    gives the all-ones sample probability exactly delta (member 1 gives
    it probability 1), so no estimator can tell the members apart there.
    """
    if d < 2:
        raise ValidationError("family needs d >= 2")
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    _warn_range(n >= d, f"two_point_family: n = {n} < d = {d} is outside the stated range")
    _warn_range(
        math.exp(-n) < delta < math.exp(-1.0),
        f"two_point_family: delta = {delta:g} outside (e^-{n}, e^-1)",
    )
    rho = 1.0 - delta ** (1.0 / n)
    return [_two_point(d, 1, 0.0)] + [_two_point(d, j, rho) for j in range(2, d + 1)]


def conf_indep_adversary(n: int, delta: float, j: int, d: int) -> ProbVector:
    """The single two-point mixture (1-rho) on class 1, rho on class j.

    rho = 1 - delta^(1/n), which is at least (1 - 1/e) * log(1/delta)/n
    whenever log(1/delta) <= n.
    """
    if not 2 <= j <= d:
        raise ValidationError(f"j must lie in 2..{d}, got {j}")
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    _warn_range(delta > math.exp(-n), f"conf_indep_adversary: delta = {delta:g} <= e^-{n}")
    rho = 1.0 - delta ** (1.0 / n)
    return _two_point(d, j, rho)


def sparse_support_instance(n: int, d: int, s: int, sigma) -> ProbVector:
    """Support-s instance: mass 1/(2*e*n) on each class of sigma, rest on class 1."""
    sigma = sorted(int(j) for j in sigma)
    if not 1 <= s <= min(n, d):
        raise ValidationError(f"s must lie in 1..min(n, d) = {min(n, d)}, got {s}")
    if len(sigma) != s - 1 or len(set(sigma)) != s - 1:
        raise ValidationError(f"sigma must contain exactly s - 1 = {s - 1} distinct indices")
    if any(not 2 <= j <= d for j in sigma):
        raise ValidationError("sigma indices must lie in 2..d")
    q = 1.0 / (2.0 * math.e * n)
    p = np.zeros(d)
    p[0] = 1.0 - (s - 1) * q
    p[[j - 1 for j in sigma]] = q
    return make_prob_vector(p)


def random_support(rng: np.random.Generator, d: int, s: int) -> list[int]:
    """Uniformly random subset of {2..d} with s - 1 elements (partial Fisher-Yates)."""
    if not 1 <= s <= d:
        raise ValidationError(f"s must lie in 1..{d}, got {s}")
    pool = np.arange(2, d + 1)
    for i in range(s - 1):
        k = int(rng.integers(i, len(pool)))
        pool[i], pool[k] = pool[k], pool[i]
    return sorted(int(x) for x in pool[: s - 1])


def polynomial_family(alpha: float, d: int) -> ProbVector:
    """Power-law class probabilities p_j proportional to j^(-alpha), alpha > 1."""
    if not alpha > 1:
        raise ValidationError(f"polynomial decay needs alpha > 1, got {alpha}")
    j = np.arange(1, d + 1, dtype=float)
    return make_prob_vector(j ** (-alpha))


def geometric_family(rate: float, d: int) -> ProbVector:
    """Geometric class probabilities p_j proportional to e^(-rate * j), rate > 0."""
    if not rate > 0:
        raise ValidationError(f"geometric decay needs rate > 0, got {rate}")
    j = np.arange(1, d + 1, dtype=float)
    # subtract the leading exponent so the weights stay representable
    return make_prob_vector(np.exp(-rate * (j - 1.0)))


def sparse_uniform_family(s: int, d: int, c: float = 1.0) -> ProbVector:
    """Distribution supported on the first s classes with p_j >= c/s there.

    With c = 1 this is exactly uniform on s classes; for c < 1 the first
    class absorbs the surplus 1 - (s-1)*c/s and the rest get c/s.
    """
    if not 1 <= s <= d:
        raise ValidationError(f"s must lie in 1..{d}, got {s}")
    if not 0 < c <= 1:
        raise ValidationError(f"c must lie in (0, 1], got {c}")
    p = np.zeros(d)
    p[0] = 1.0 - (s - 1) * c / s
    p[1:s] = c / s
    return make_prob_vector(p)


def shape_family(kind: str, d: int, **params) -> ProbVector:
    """Dispatch on the stylized-family name used by the JSON shorthand."""
    if kind == "polynomial":
        return polynomial_family(alpha=params["alpha"], d=d)
    if kind == "geometric":
        return geometric_family(rate=params["rate"], d=d)
    if kind in ("sparse_uniform", "sparse-uniform"):
        return sparse_uniform_family(s=params["s"], d=d, c=params.get("c", 1.0))
    raise ValidationError(f"unknown shape family {kind!r}")
