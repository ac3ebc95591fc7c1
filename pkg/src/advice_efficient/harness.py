"""Wire learners to loss oracles, measure regret and aggregate over seeds."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np

from .algorithms import AdviceEfficientLearner, FullInformationHedge, LearnerConfig, RoundTrace
from .environments import (
    LossOracle,
    bandit_adapter,
    bernoulli_environment,
    drifting_environment,
    load_matrix_csv,
    matrix_environment,
)
from .errors import InvalidInputError, InvariantViolationError

__all__ = [
    "ALGORITHMS",
    "ENVIRONMENT_KINDS",
    "EnvironmentSpec",
    "ExperimentConfig",
    "RunOutcome",
    "ExperimentResult",
    "bound_curve",
    "build_oracle",
    "run_once",
    "run_repeated",
    "sweep_M",
]

ALGORITHMS = ("advice-efficient", "full-info-baseline")
ENVIRONMENT_KINDS = ("matrix", "bernoulli", "drifting", "bandit-adapter")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Environment kind plus its parameters.

    ``bernoulli`` takes ``means``, or ``best_mean``/``other_mean`` with an
    optional ``best_index``; ``drifting`` takes ``base_means`` and
    ``drift_period``; ``matrix`` takes ``losses`` or a CSV ``path``;
    ``bandit-adapter`` takes ``arm_means``, ``arm_matrix`` or ``path``.
    """

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ENVIRONMENT_KINDS:
            raise InvalidInputError(
                f"unknown environment kind {self.kind!r}; expected one of {ENVIRONMENT_KINDS}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    M: int
    T: int
    environment: EnvironmentSpec
    repetitions: int = 50
    base_seed: int = 0
    algorithm: str = "advice-efficient"

    def __post_init__(self) -> None:
        for name in ("N", "M", "T", "repetitions", "base_seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidInputError(f"{name} must be an integer, got {value!r}")
        if self.N < 1:
            raise InvalidInputError(f"N must be >= 1, got {self.N}")
        if not 1 <= self.M <= self.N:
            raise InvalidInputError(f"M must satisfy 1 <= M <= N={self.N}, got {self.M}")
        if self.T < 1:
            raise InvalidInputError(f"T must be >= 1, got {self.T}")
        if self.repetitions < 1:
            raise InvalidInputError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )

    @property
    def effective_M(self) -> int:
        """Experts observed per round: M for the learner, N for the baseline."""
        return self.N if self.algorithm == "full-info-baseline" else self.M


def bound_curve(N: int, M: int, T: int) -> np.ndarray:
    """``2 sqrt((N/M) t ln N)`` for t = 1..T."""
    t = np.arange(1, T + 1, dtype=np.float64)
    return 2.0 * np.sqrt((N / M) * t * math.log(N))


def _take(params: dict, key: str, kind: str) -> Any:
    try:
        return params[key]
    except KeyError:
        raise InvalidInputError(f"environment {kind!r} needs parameter {key!r}") from None


def _bernoulli_means(params: dict, N: int) -> list[float]:
    if "means" in params:
        return list(params["means"])
    best = float(_take(params, "best_mean", "bernoulli"))
    other = float(_take(params, "other_mean", "bernoulli"))
    means = [other] * N
    means[int(params.get("best_index", 0))] = best
    return means


def build_oracle(config: ExperimentConfig, env_seed: Optional[np.random.SeedSequence]) -> LossOracle:
    """Construct the oracle described by ``config.environment`` for one repetition."""
    spec = config.environment
    params = spec.parameters
    rng = np.random.default_rng(env_seed)
    if spec.kind == "matrix":
        if "path" in params:
            losses = load_matrix_csv(params["path"])
        else:
            losses = np.asarray(_take(params, "losses", "matrix"), dtype=np.float64)
        if losses.ndim != 2 or losses.shape[0] < config.T:
            raise InvalidInputError(f"loss matrix has fewer than T={config.T} rows")
        oracle = matrix_environment(losses[: config.T])
    elif spec.kind == "bernoulli":
        oracle = bernoulli_environment(_bernoulli_means(params, config.N), config.T, rng)
    elif spec.kind == "drifting":
        oracle = drifting_environment(
            _take(params, "base_means", "drifting"),
            _take(params, "drift_period", "drifting"),
            config.T,
            rng,
        )
    else:
        if "path" in params:
            oracle = bandit_adapter(arm_matrix=load_matrix_csv(params["path"])[: config.T])
        elif "arm_matrix" in params:
            oracle = bandit_adapter(arm_matrix=np.asarray(params["arm_matrix"])[: config.T])
        else:
            oracle = bandit_adapter(arm_means=_take(params, "arm_means", "bandit-adapter"), T=config.T, rng=rng)
    if oracle.N != config.N:
        raise InvalidInputError(f"environment has {oracle.N} experts but N={config.N}")
    if oracle.T < config.T:
        raise InvalidInputError(f"environment horizon {oracle.T} shorter than T={config.T}")
    return oracle


def _seeds(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    # Environment and learner randomness come from separate children so that
    # runs differing only in M see identical loss tables.
    env_ss, alg_ss = np.random.SeedSequence(seed).spawn(2)
    return env_ss, alg_ss


def _make_learner(config: ExperimentConfig) -> AdviceEfficientLearner:
    if config.algorithm == "full-info-baseline":
        return FullInformationHedge(config.N)
    return AdviceEfficientLearner(LearnerConfig(config.N, config.M))


@dataclass
class RunOutcome:
    seed: int
    regret: np.ndarray
    cumulative_loss: np.ndarray
    best_expert: int
    best_loss: float
    ledger: dict
    traces: Optional[list[RoundTrace]] = None


def run_once(config: ExperimentConfig, seed: int, keep_traces: bool = True) -> RunOutcome:
    """Play T rounds against a fresh oracle and return the anytime regret curve.

    Regret at t is the learner's cumulative loss minus the smallest true
    cumulative expert loss at t. Any round that queries a number of experts
    other than the budget raises :class:`InvariantViolationError`.
    """
    env_ss, alg_ss = _seeds(seed)
    oracle = build_oracle(config, env_ss)
    learner = _make_learner(config)
    rng = np.random.default_rng(alg_ss)
    budget = min(config.effective_M, config.N)
    ledger = oracle.ledger

    alg_loss = np.empty(config.T)
    traces: Optional[list[RoundTrace]] = [] if keep_traces else None
    for t in range(1, config.T + 1):
        sample = learner.begin_round(rng)
        losses = oracle.query(t, sample.observed)
        ledger.check_round(t, budget)
        trace = learner.feed_losses(losses)
        alg_loss[t - 1] = trace.algorithm_loss
        if traces is not None:
            traces.append(trace)
    ledger.verify(budget, config.T)

    cumulative = np.cumsum(alg_loss)
    expert_totals = np.cumsum(oracle.loss_matrix[: config.T], axis=0)
    regret = cumulative - expert_totals.min(axis=1)
    best = int(np.argmin(expert_totals[-1]))
    return RunOutcome(
        seed=seed,
        regret=regret,
        cumulative_loss=cumulative,
        best_expert=best,
        best_loss=float(expert_totals[-1, best]),
        ledger=ledger.summary(),
        traces=traces,
    )


def _run_light(args: tuple[ExperimentConfig, int]) -> RunOutcome:
    config, seed = args
    return run_once(config, seed, keep_traces=False)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seeds: list[int]
    mean_cumulative_loss: np.ndarray
    std_cumulative_loss: np.ndarray
    mean_regret: np.ndarray
    std_regret: np.ndarray
    min_regret: np.ndarray
    max_regret: np.ndarray
    bound: np.ndarray
    best_experts: list[int]
    ledger: dict

    @property
    def final_mean_regret(self) -> float:
        return float(self.mean_regret[-1])

    @property
    def final_bound(self) -> float:
        return float(self.bound[-1])

    def summary(self) -> dict:
        c = self.config
        return {
            "algorithm": c.algorithm,
            "N": c.N,
            "M": c.M,
            "T": c.T,
            "repetitions": c.repetitions,
            "seeds": list(self.seeds),
            "final_mean_regret": self.final_mean_regret,
            "final_std_regret": float(self.std_regret[-1]),
            "final_min_regret": float(self.min_regret[-1]),
            "final_max_regret": float(self.max_regret[-1]),
            "final_bound": self.final_bound,
            "final_mean_cumulative_loss": float(self.mean_cumulative_loss[-1]),
            "best_experts": list(self.best_experts),
            "ledger": dict(self.ledger),
        }


def _aggregate(config: ExperimentConfig, outcomes: Sequence[RunOutcome]) -> ExperimentResult:
    regrets = np.stack([o.regret for o in outcomes])
    losses = np.stack([o.cumulative_loss for o in outcomes])
    return ExperimentResult(
        config=config,
        seeds=[o.seed for o in outcomes],
        mean_cumulative_loss=losses.mean(axis=0),
        std_cumulative_loss=losses.std(axis=0),
        mean_regret=regrets.mean(axis=0),
        std_regret=regrets.std(axis=0),
        min_regret=regrets.min(axis=0),
        max_regret=regrets.max(axis=0),
        bound=bound_curve(config.N, config.effective_M, config.T),
        best_experts=[o.best_expert for o in outcomes],
        ledger={
            "budget_per_round": min(config.effective_M, config.N),
            "min_per_round": min(o.ledger["min_per_round"] for o in outcomes),
            "max_per_round": max(o.ledger["max_per_round"] for o in outcomes),
            "total_queries": sum(o.ledger["total_queries"] for o in outcomes),
        },
    )


def run_repeated(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Repeat :func:`run_once` with seeds ``base_seed + r`` and aggregate per round.

    With ``workers > 1`` repetitions run in a process pool; results are
    reduced in repetition order so the output does not depend on scheduling.
    """
    jobs = [(config, config.base_seed + r) for r in range(config.repetitions)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_light, jobs))
    else:
        outcomes = [_run_light(job) for job in jobs]
    return _aggregate(config, outcomes)


def sweep_M(config: ExperimentConfig, M_values: Sequence[int], workers: int = 1) -> list[ExperimentResult]:
    """One :func:`run_repeated` per M, all sharing the same environment seeds."""
    M_values = list(M_values)
    if not M_values:
        raise InvalidInputError("M_values must be non-empty")
    for m in M_values:
        if isinstance(m, bool) or int(m) != m or not 1 <= m <= config.N:
            raise InvalidInputError(f"M={m!r} outside [1, N={config.N}]")
    return [run_repeated(replace(config, M=int(m)), workers=workers) for m in M_values]
