"""Exponential-weights distribution, two-stage expert sampling and loss estimates.

Everything here is a pure function of its arguments. Randomness always comes
from an explicit :class:`numpy.random.Generator` passed by the caller.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import InvalidInputError, InvalidStateError

__all__ = [
    "SamplingDistribution",
    "CumulativeEstimates",
    "SampleSet",
    "check_loss",
    "compute_distribution",
    "learning_rate",
    "inclusion_probability",
    "inclusion_probabilities",
    "sample_experts",
    "importance_weighted_estimate",
    "argmax_expert",
]

NORMALIZATION_TOL = 1e-12


def check_loss(value: float) -> float:
    """Return ``value`` as a float, raising if it is not a loss in [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:  # also rejects NaN
        raise InvalidInputError(f"loss must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class SamplingDistribution:
    """Probability vector over N experts."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidInputError("a distribution needs at least one expert")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise InvalidInputError("probabilities must be finite and non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def _trusted(cls, probs: np.ndarray) -> "SamplingDistribution":
        # Skips validation for vectors this module has just normalised.
        self = object.__new__(cls)
        object.__setattr__(self, "probs", probs)
        return self

    @classmethod
    def uniform(cls, n: int) -> "SamplingDistribution":
        if n < 1:
            raise InvalidInputError("n must be >= 1")
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, h: int) -> float:
        return float(self.probs[h])


@dataclass
class CumulativeEstimates:
    """Running sums of importance-weighted loss estimates, one per expert."""

    totals: np.ndarray
    round_index: int = 0

    def __post_init__(self) -> None:
        totals = np.array(self.totals, dtype=np.float64)
        if totals.ndim != 1 or totals.size == 0:
            raise InvalidInputError("estimates vector must be non-empty")
        if not np.all(np.isfinite(totals)) or np.any(totals < 0.0):
            raise InvalidInputError("cumulative estimates must be finite and >= 0")
        if self.round_index < 0:
            raise InvalidInputError("round_index must be >= 0")
        self.totals = totals

    @classmethod
    def zeros(cls, n: int) -> "CumulativeEstimates":
        if n < 1:
            raise InvalidInputError("n must be >= 1")
        return cls(np.zeros(n))

    @property
    def n(self) -> int:
        return int(self.totals.size)

    def add(self, delta: np.ndarray) -> None:
        """Accumulate one round of estimates (entries must be >= 0)."""
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape != self.totals.shape:
            raise InvalidInputError("delta has the wrong length")
        if np.any(delta < 0.0):
            raise InvalidStateError("loss estimates can never be negative")
        self.totals += delta
        self.round_index += 1

    def _add_sparse(self, items) -> None:
        # ``items`` are (expert, estimate) pairs already known to be >= 0.
        totals = self.totals
        for h, value in items:
            totals[h] += value
        self.round_index += 1


@dataclass(frozen=True)
class SampleSet:
    """The played (primary) expert and the sorted tuple of all observed experts."""

    primary: int
    observed: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        observed = tuple(sorted(int(h) for h in self.observed))
        if len(set(observed)) != len(observed):
            raise InvalidInputError("observed experts must be distinct")
        if int(self.primary) not in observed:
            raise InvalidInputError("the primary expert must be observed")
        object.__setattr__(self, "primary", int(self.primary))
        object.__setattr__(self, "observed", observed)

    @classmethod
    def _trusted(cls, primary: int, observed: tuple[int, ...]) -> "SampleSet":
        self = object.__new__(cls)
        object.__setattr__(self, "primary", primary)
        object.__setattr__(self, "observed", observed)
        return self

    def __contains__(self, h: object) -> bool:
        return h in self.observed

    def __len__(self) -> int:
        return len(self.observed)


ArrayLike = Union[CumulativeEstimates, Sequence[float], np.ndarray]


def _softmax_neg(totals: np.ndarray, eta: float) -> np.ndarray:
    # Shifting by the minimum keeps the largest weight at exactly 1.
    weights = np.exp(-eta * (totals - totals.min()))
    return weights / weights.sum()


def compute_distribution(estimates: ArrayLike, eta: float) -> SamplingDistribution:
    """Exponential weights ``q(h) ~ exp(-eta * totals[h])``.

    Accepts a :class:`CumulativeEstimates` or a plain vector of totals.
    """
    totals = estimates.totals if isinstance(estimates, CumulativeEstimates) else estimates
    totals = np.asarray(totals, dtype=np.float64)
    if totals.ndim != 1 or totals.size == 0:
        raise InvalidInputError("estimates vector must be non-empty")
    eta = float(eta)
    if not eta >= 0.0 or math.isinf(eta):
        raise InvalidInputError(f"eta must be a finite non-negative real, got {eta!r}")
    probs = _softmax_neg(totals, eta)
    if not np.isfinite(probs[0]):
        raise InvalidInputError("estimates must be finite")
    return SamplingDistribution._trusted(probs)


def _check_budget(M: int, N: int) -> None:
    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N}")
    if not 1 <= M <= N:
        raise InvalidInputError(f"M must satisfy 1 <= M <= N={N}, got {M}")


def learning_rate(round: int, N: int, M: int) -> float:
    """Anytime step size ``sqrt(M ln N / (round * N))`` for a 1-based round."""
    if round < 1:
        raise InvalidInputError(f"round must be >= 1, got {round}")
    _check_budget(M, N)
    return math.sqrt(M * math.log(N) / (round * N))


def inclusion_probability(q: SamplingDistribution, h: int, M: int, N: int) -> float:
    """Probability that expert ``h`` ends up in the observed set.

    It is ``q(h) + (1 - q(h)) (M - 1) / (N - 1)``, with the full-observation
    case returned as exactly 1.
    """
    _check_budget(M, N)
    if not 0 <= h < N:
        raise InvalidInputError(f"expert index {h} out of range for N={N}")
    if M == N:
        return 1.0
    qh = float(q.probs[h])
    if M == 1:
        return qh
    return qh + (1.0 - qh) * (M - 1) / (N - 1)


def inclusion_probabilities(q: SamplingDistribution, M: int) -> np.ndarray:
    """Vectorised :func:`inclusion_probability` over all experts."""
    N = q.n
    _check_budget(M, N)
    if M == N:
        return np.ones(N)
    if M == 1:
        return np.array(q.probs, dtype=np.float64)
    return q.probs + (1.0 - q.probs) * ((M - 1) / (N - 1))


def _draw_primary(probs: np.ndarray, u: float) -> int:
    cdf = list(itertools.accumulate(probs.tolist()))
    # u * total < total, so a trailing zero-mass expert is never selected.
    return min(bisect.bisect_right(cdf, u * cdf[-1]), len(cdf) - 1)


def _draw_extras(primary: int, n: int, us) -> list[int]:
    # Partial Fisher-Yates over the n-1 indices other than ``primary``;
    # one uniform per swap, position i swaps with i + floor(u * (n-1-i)).
    pool = list(range(n - 1))
    if primary < n - 1:
        pool[primary] = n - 1
    k = len(us)
    for i in range(k):
        j = i + int(us[i] * (n - 1 - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def sample_experts(q: SamplingDistribution, M: int, rng: np.random.Generator) -> SampleSet:
    """Draw the primary expert from ``q`` plus ``M - 1`` uniform extras.

    The extras are a uniformly random (M-1)-subset of the other N-1 experts.
    When ``M == N`` or ``M == 1`` no extra randomness is consumed.
    """
    N = q.n
    _check_budget(M, N)
    if M == N or M == 1:
        primary = _draw_primary(q.probs, rng.random())
        observed = tuple(range(N)) if M == N else (primary,)
        return SampleSet._trusted(primary, observed)
    us = rng.random(M).tolist()
    primary = _draw_primary(q.probs, us[0])
    extras = _draw_extras(primary, N, us[1:])
    return SampleSet._trusted(primary, tuple(sorted([primary, *extras])))


def importance_weighted_estimate(loss: float, p_incl: float, in_sample: bool) -> float:
    """``loss / p_incl`` for an observed expert, exactly 0 otherwise."""
    loss = check_loss(loss)
    if not in_sample:
        return 0.0
    if not p_incl > 0.0:
        raise InvalidStateError(
            f"observed expert has inclusion probability {p_incl!r}; sampling is inconsistent"
        )
    return loss / p_incl


def argmax_expert(q: SamplingDistribution) -> int:
    """Most likely expert; ties go to the smallest index."""
    return int(np.argmax(q.probs))
