"""Round-structured learners and the best-expert-in-hindsight oracle.

A learner is driven through a two-phase protocol::

    sample = learner.begin_round(rng)          # which experts to ask
    trace = learner.feed_losses({h: loss(h) for h in sample.observed})

``feed_losses`` only accepts losses for the experts named by ``begin_round``,
so the learner can never see more than its advice budget.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import core
from .core import CumulativeEstimates, SampleSet, SamplingDistribution
from .errors import InvalidInputError, ProtocolViolationError

__all__ = [
    "LearnerConfig",
    "Phase",
    "RoundTrace",
    "AdviceEfficientLearner",
    "FullInformationHedge",
    "best_expert_in_hindsight",
]


@dataclass(frozen=True)
class LearnerConfig:
    N: int
    M: int
    eta_override: Optional[float] = None  # pins eta in tests; None means the anytime schedule

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"N must be an integer >= 1, got {self.N!r}")
        if int(self.M) != self.M or not 1 <= self.M <= self.N:
            raise InvalidInputError(f"M must be an integer in [1, N={self.N}], got {self.M!r}")
        if self.eta_override is not None and not float(self.eta_override) >= 0.0:
            raise InvalidInputError("eta_override must be non-negative")

    @property
    def budget(self) -> int:
        return min(self.M, self.N)


class Phase(enum.Enum):
    AWAITING_SAMPLE = "awaiting-sample"
    AWAITING_LOSSES = "awaiting-losses"


@dataclass(frozen=True)
class RoundTrace:
    round: int
    sample: SampleSet
    distribution: SamplingDistribution
    observed_losses: dict[int, float]
    algorithm_loss: float
    estimates_delta: np.ndarray
    eta: float


class AdviceEfficientLearner:
    """Exponential weights over importance-weighted estimates from M of N experts.

    Each round recomputes ``q`` from scratch with the current step size applied
    to the full cumulative estimates, plays one expert drawn from ``q`` and
    observes it together with ``M - 1`` uniformly chosen others.
    """

    def __init__(self, config: LearnerConfig) -> None:
        self.config = config
        self.estimates = CumulativeEstimates.zeros(config.N)
        self.round = 1
        self.phase = Phase.AWAITING_SAMPLE
        self._distribution: Optional[SamplingDistribution] = None
        self._sample: Optional[SampleSet] = None
        self._eta = 0.0

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def M(self) -> int:
        return self.config.M

    def eta(self, round: int) -> float:
        if self.config.eta_override is not None:
            return float(self.config.eta_override)
        return core.learning_rate(round, self.N, self.M)

    def current_distribution(self) -> SamplingDistribution:
        """Distribution the next (or in-progress) round samples from."""
        if self._distribution is not None:
            return self._distribution
        return core.compute_distribution(self.estimates, self.eta(self.round))

    def _draw(self, q: SamplingDistribution, rng: np.random.Generator) -> SampleSet:
        return core.sample_experts(q, self.M, rng)

    def begin_round(self, rng: np.random.Generator) -> SampleSet:
        if self.phase is not Phase.AWAITING_SAMPLE:
            raise ProtocolViolationError(
                f"begin_round called twice in round {self.round} without feed_losses"
            )
        self._eta = self.eta(self.round)
        self._distribution = core.compute_distribution(self.estimates, self._eta)
        self._sample = self._draw(self._distribution, rng)
        self.phase = Phase.AWAITING_LOSSES
        return self._sample

    def _check_losses(self, losses: Mapping[int, float]) -> dict[int, float]:
        if self.phase is not Phase.AWAITING_LOSSES:
            raise ProtocolViolationError("feed_losses called before begin_round")
        assert self._sample is not None
        keys = set(losses)
        wanted = set(self._sample.observed)
        if keys != wanted:
            missing = sorted(wanted - keys)
            extra = sorted(keys - wanted)
            raise ProtocolViolationError(
                f"losses must cover exactly the observed experts; missing={missing}, extra={extra}"
            )
        return {h: core.check_loss(losses[h]) for h in self._sample.observed}

    def _estimate(self, observed: dict[int, float]) -> np.ndarray:
        assert self._distribution is not None
        delta = np.zeros(self.N)
        q, M, N = self._distribution, self.M, self.N
        for h, loss in observed.items():
            p_incl = core.inclusion_probability(q, h, M, N)
            delta[h] = core.importance_weighted_estimate(loss, p_incl, True)
        return delta

    def feed_losses(self, losses: Mapping[int, float]) -> RoundTrace:
        observed = self._check_losses(losses)
        assert self._sample is not None and self._distribution is not None
        delta = self._estimate(observed)
        self.estimates._add_sparse((h, delta[h]) for h in observed)
        trace = RoundTrace(
            round=self.round,
            sample=self._sample,
            distribution=self._distribution,
            observed_losses=observed,
            algorithm_loss=observed[self._sample.primary],
            estimates_delta=delta,
            eta=self._eta,
        )
        self.round += 1
        self.phase = Phase.AWAITING_SAMPLE
        self._distribution = None
        self._sample = None
        return trace


class FullInformationHedge(AdviceEfficientLearner):
    """Exponential weights fed every expert's true loss each round.

    Uses the same step-size schedule as the advice-efficient learner at
    ``M = N``; the cumulative totals are plain sums of true losses.
    """

    def __init__(self, N: int, eta_override: Optional[float] = None) -> None:
        super().__init__(LearnerConfig(N, N, eta_override))

    def _draw(self, q: SamplingDistribution, rng: np.random.Generator) -> SampleSet:
        primary = core._draw_primary(q.probs, rng.random())
        return SampleSet._trusted(primary, tuple(range(self.N)))

    def _estimate(self, observed: dict[int, float]) -> np.ndarray:
        return np.array([observed[h] for h in range(self.N)], dtype=np.float64)


def best_expert_in_hindsight(true_losses) -> tuple[int, float]:
    """Expert with the smallest total loss (smallest index on ties) and that total."""
    losses = np.asarray(true_losses, dtype=np.float64)
    if losses.ndim != 2 or losses.size == 0:
        raise InvalidInputError("need a non-empty T x N loss matrix")
    if not np.all((losses >= 0.0) & (losses <= 1.0)):
        raise InvalidInputError("losses must lie in [0, 1]")
    totals = losses.sum(axis=0)
    best = int(np.argmin(totals))
    return best, float(totals[best])
