"""Brute-force oracles for the sampling scheme and the estimator's moments.

The enumeration functions walk every outcome of the two-stage draw (primary
expert H, then an (M-1)-subset of the others) and weight it by
``q(H) / C(N-1, M-1)``. They never call the sampler, so they serve as an
independent check on both the sampler and the closed-form inclusion
probability.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import core
from .core import SamplingDistribution
from .errors import InfeasibleInstanceError, InvalidInputError

__all__ = [
    "MAX_ENUMERATION_N",
    "EnumerationReport",
    "Lemma2Search",
    "SamplerAgreement",
    "CheckResult",
    "enumerate_outcomes",
    "enumerate_inclusion",
    "enumerate_estimator_moments",
    "lemma2_value",
    "lemma2_values",
    "lemma2_max_search",
    "sampler_agreement",
    "random_simplex",
    "run_verification",
]

MAX_ENUMERATION_N = 10


def _as_distribution(q) -> SamplingDistribution:
    return q if isinstance(q, SamplingDistribution) else SamplingDistribution(np.asarray(q, dtype=np.float64))


def enumerate_outcomes(q, M: int):
    """Yield ``(weight, primary, observed)`` for every outcome of the draw."""
    q = _as_distribution(q)
    N = q.n
    if N > MAX_ENUMERATION_N:
        raise InfeasibleInstanceError(f"N={N} too large to enumerate (cap {MAX_ENUMERATION_N})")
    if not 1 <= M <= N:
        raise InvalidInputError(f"M must satisfy 1 <= M <= N={N}, got {M}")
    n_subsets = math.comb(N - 1, M - 1)
    for primary in range(N):
        mass = float(q.probs[primary])
        if mass == 0.0:
            continue
        others = [h for h in range(N) if h != primary]
        for extras in itertools.combinations(others, M - 1):
            yield mass / n_subsets, primary, frozenset((primary, *extras))


@dataclass
class EnumerationReport:
    N: int
    M: int
    inclusion: np.ndarray
    inclusion_closed_form: np.ndarray
    mean: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None
    variance: Optional[np.ndarray] = None
    weighted_second_moment: Optional[float] = None
    losses: Optional[np.ndarray] = None
    outcomes: int = 0

    @property
    def inclusion_deviation(self) -> float:
        return float(np.max(np.abs(self.inclusion - self.inclusion_closed_form)))

    @property
    def unbiasedness_deviation(self) -> float:
        if self.mean is None:
            raise InvalidInputError("report has no estimator moments")
        return float(np.max(np.abs(self.mean - self.losses)))

    @property
    def second_moment_bound(self) -> float:
        return self.N / self.M

    @property
    def variance_bound(self) -> float:
        """``(N-1)/(M-1)``; infinite when M = 1, where no uniform bound exists."""
        return math.inf if self.M == 1 else (self.N - 1) / (self.M - 1)


def enumerate_inclusion(q, M: int) -> EnumerationReport:
    """Exact ``P(h observed)`` for every expert, next to the closed form."""
    q = _as_distribution(q)
    N = q.n
    inclusion = np.zeros(N)
    count = 0
    for weight, _, observed in enumerate_outcomes(q, M):
        count += 1
        for h in observed:
            inclusion[h] += weight
    closed = np.array([core.inclusion_probability(q, h, M, N) for h in range(N)])
    return EnumerationReport(N, M, inclusion, closed, outcomes=count)


def enumerate_estimator_moments(q, losses: Sequence[float], M: int) -> EnumerationReport:
    """Exact first and second moments of the importance-weighted estimates.

    Also computes ``E[sum_h q(h) (L^h)^2]``. Experts with ``q(h) = 0`` are
    never observed when ``M = 1``, so unbiasedness needs full support there.
    """
    q = _as_distribution(q)
    N = q.n
    losses = np.array([core.check_loss(x) for x in losses], dtype=np.float64)
    if losses.size != N:
        raise InvalidInputError(f"need {N} losses, got {losses.size}")
    p_incl = [core.inclusion_probability(q, h, M, N) for h in range(N)]
    inclusion = np.zeros(N)
    mean = np.zeros(N)
    second = np.zeros(N)
    weighted = 0.0
    count = 0
    for weight, _, observed in enumerate_outcomes(q, M):
        count += 1
        est = np.array(
            [core.importance_weighted_estimate(losses[h], p_incl[h], h in observed) for h in range(N)]
        )
        for h in observed:
            inclusion[h] += weight
        mean += weight * est
        second += weight * est**2
        weighted += weight * float(np.dot(q.probs, est**2))
    return EnumerationReport(
        N,
        M,
        inclusion,
        np.array(p_incl),
        mean=mean,
        second_moment=second,
        variance=second - mean**2,
        weighted_second_moment=weighted,
        losses=losses,
        outcomes=count,
    )


def lemma2_values(Q: np.ndarray, M: int) -> np.ndarray:
    """Row-wise ``sum_h q(h)(N-1) / (q(h)(N-M) + M - 1)`` for a batch of rows.

    Zero-mass coordinates contribute 0 (their numerator vanishes), which keeps
    the ``M = 1`` case defined off the support.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    N = Q.shape[1]
    if N == 1:
        return np.ones(Q.shape[0])
    num = Q * (N - 1)
    den = Q * (N - M) + (M - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(Q > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return terms.sum(axis=1)


def lemma2_value(q, M: int) -> float:
    """The inequality's left-hand side for one distribution ``q``."""
    q = _as_distribution(q)
    if not 1 <= M <= q.n:
        raise InvalidInputError(f"M must satisfy 1 <= M <= N={q.n}, got {M}")
    return float(lemma2_values(q.probs, M)[0])


def random_simplex(N: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` draws from the symmetric Dirichlet(1), i.e. uniform on the simplex."""
    return rng.dirichlet(np.ones(N), size=size)


@dataclass
class Lemma2Search:
    N: int
    M: int
    max_value: float
    argmax: np.ndarray
    uniform_value: float

    @property
    def bound(self) -> float:
        return self.N / self.M

    @property
    def excess(self) -> float:
        return self.max_value - self.bound

    @property
    def passed(self) -> bool:
        return self.excess <= 1e-9 and abs(self.uniform_value - self.bound) <= 1e-12


def lemma2_max_search(
    N: int, M: int, trials: int, rng: np.random.Generator, steps: int = 60
) -> Lemma2Search:
    """Random-restart hill climbing on the simplex for the largest left-hand side.

    Every restart starts at a Dirichlet(1) point and repeatedly perturbs one
    random coordinate, renormalises and keeps the move if the value improves.
    The step size decays geometrically. All restarts advance together.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    if not 1 <= M <= N:
        raise InvalidInputError(f"M must satisfy 1 <= M <= N={N}, got {M}")
    Q = random_simplex(N, trials, rng)
    values = lemma2_values(Q, M)
    step = 0.5
    rows = np.arange(trials)
    for _ in range(steps):
        cand = Q.copy()
        cols = rng.integers(0, N, size=trials)
        cand[rows, cols] = np.maximum(cand[rows, cols] + step * rng.uniform(-1.0, 1.0, trials), 0.0)
        cand /= cand.sum(axis=1, keepdims=True)
        cand_values = lemma2_values(cand, M)
        better = cand_values > values
        Q[better] = cand[better]
        values[better] = cand_values[better]
        step *= 0.93
    best = int(np.argmax(values))
    uniform = lemma2_value(SamplingDistribution.uniform(N), M)
    return Lemma2Search(N, M, float(values[best]), Q[best].copy(), uniform)


@dataclass
class SamplerAgreement:
    draws: int
    empirical: np.ndarray
    exact: np.ndarray

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(self.exact * (1.0 - self.exact) / self.draws)

    @property
    def z_scores(self) -> np.ndarray:
        diff = self.empirical - self.exact
        se = self.standard_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0.0, np.abs(diff) / np.where(se > 0.0, se, 1.0), np.where(diff == 0.0, 0.0, np.inf))
        return z


def sampler_agreement(q, M: int, draws: int, rng: np.random.Generator) -> SamplerAgreement:
    """Empirical inclusion frequencies of :func:`core.sample_experts` vs enumeration."""
    q = _as_distribution(q)
    counts = np.zeros(q.n)
    for _ in range(draws):
        for h in core.sample_experts(q, M, rng).observed:
            counts[h] += 1
    return SamplerAgreement(draws, counts / draws, enumerate_inclusion(q, M).inclusion)


@dataclass
class CheckResult:
    name: str
    max_deviation: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "max_deviation": self.max_deviation,
            "threshold": self.threshold,
            "passed": bool(self.passed),
            **({"details": self.details} if self.details else {}),
        }


def _instance_grid(max_n: int, instances: int, rng: np.random.Generator):
    for N in range(2, max_n + 1):
        for M in range(1, N + 1):
            for q in random_simplex(N, instances, rng):
                yield N, M, SamplingDistribution(q / q.sum())


def run_verification(
    max_n: int = 8,
    seed: int = 0,
    instances: int = 20,
    lemma2_max_n: int = 12,
    lemma2_draws: int = 1000,
    search_trials: int = 200,
    sampler_draws: int = 100_000,
    progress: Optional[Callable[[str], None]] = None,
) -> list[CheckResult]:
    """Run every oracle check and return one result per named check."""
    if not 2 <= max_n <= MAX_ENUMERATION_N:
        raise InfeasibleInstanceError(f"max_n must lie in [2, {MAX_ENUMERATION_N}], got {max_n}")
    rng = np.random.default_rng(seed)
    say = progress or (lambda _msg: None)
    results: list[CheckResult] = []

    say("enumerating sampling outcomes")
    incl_dev = sum_dev = unbiased_dev = 0.0
    second_excess = var_excess = -math.inf
    full_dev = single_dev = 0.0
    for N, M, q in _instance_grid(max_n, instances, rng):
        losses = rng.uniform(0.0, 1.0, N)
        rep = enumerate_estimator_moments(q, losses, M)
        incl_dev = max(incl_dev, rep.inclusion_deviation)
        sum_dev = max(sum_dev, abs(float(rep.inclusion.sum()) - M))
        unbiased_dev = max(unbiased_dev, rep.unbiasedness_deviation)
        second_excess = max(second_excess, rep.weighted_second_moment - rep.second_moment_bound)
        if M >= 2:
            var_excess = max(var_excess, float(np.max(rep.variance)) - rep.variance_bound)
        if M == N:
            full_dev = max(full_dev, float(np.max(np.abs(rep.inclusion_closed_form - 1.0))))
        if M == 1:
            single_dev = max(single_dev, float(np.max(np.abs(rep.inclusion_closed_form - q.probs))))
    results += [
        CheckResult("inclusion_probability_exact", incl_dev, 1e-12, incl_dev <= 1e-12),
        CheckResult("inclusion_sums_to_M", sum_dev, 1e-12, sum_dev <= 1e-12),
        CheckResult("estimator_unbiased", unbiased_dev, 1e-12, unbiased_dev <= 1e-12),
        CheckResult("weighted_second_moment_le_N_over_M", second_excess, 1e-12, second_excess <= 1e-12),
        CheckResult("variance_le_(N-1)/(M-1)", var_excess, 1e-12, var_excess <= 1e-12),
        CheckResult("edge_full_observation_M_eq_N", full_dev, 0.0, full_dev == 0.0),
        CheckResult("edge_single_observation_M_eq_1", single_dev, 0.0, single_dev == 0.0),
    ]

    say("checking the N/M bound on random distributions")
    lemma_excess = -math.inf
    uniform_dev = 0.0
    search_excess = -math.inf
    for N in range(2, lemma2_max_n + 1):
        for M in range(1, N + 1):
            values = lemma2_values(random_simplex(N, lemma2_draws, rng), M)
            lemma_excess = max(lemma_excess, float(values.max()) - N / M)
            search = lemma2_max_search(N, M, search_trials, rng)
            uniform_dev = max(uniform_dev, abs(search.uniform_value - N / M))
            search_excess = max(search_excess, search.excess)
    results += [
        CheckResult("lemma2_random_points", lemma_excess, 1e-9, lemma_excess <= 1e-9),
        CheckResult("lemma2_uniform_attains_N_over_M", uniform_dev, 1e-12, uniform_dev <= 1e-12),
        CheckResult("lemma2_max_search", search_excess, 1e-9, search_excess <= 1e-9),
    ]

    say("comparing sampler frequencies with enumeration")
    n_s = min(5, max_n)
    m_s = min(3, n_s)
    masses = np.array([0.4, 0.25, 0.15, 0.12, 0.08][:n_s])
    q_s = SamplingDistribution(masses / masses.sum())
    agreement = sampler_agreement(q_s, m_s, sampler_draws, rng)
    max_z = float(np.max(agreement.z_scores))
    results.append(
        CheckResult(
            "sampler_matches_enumeration",
            max_z,
            3.0,
            max_z <= 3.0,
            {"N": n_s, "M": m_s, "draws": sampler_draws, "unit": "standard errors"},
        )
    )
    return results
