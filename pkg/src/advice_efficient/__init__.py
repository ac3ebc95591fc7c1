"""Prediction with expert advice when only M of N experts can be queried per round."""

__version__ = "0.1.0"

from .algorithms import (
    AdviceEfficientLearner,
    FullInformationHedge,
    LearnerConfig,
    RoundTrace,
    best_expert_in_hindsight,
)
from .core import (
    CumulativeEstimates,
    SampleSet,
    SamplingDistribution,
    compute_distribution,
    importance_weighted_estimate,
    inclusion_probability,
    learning_rate,
    sample_experts,
)
from .errors import (
    AdviceEfficientError,
    InfeasibleInstanceError,
    InvalidInputError,
    InvalidStateError,
    InvariantViolationError,
    ProtocolViolationError,
)
from .harness import EnvironmentSpec, ExperimentConfig, ExperimentResult, run_once, run_repeated, sweep_M

__all__ = [
    "AdviceEfficientError",
    "AdviceEfficientLearner",
    "CumulativeEstimates",
    "EnvironmentSpec",
    "ExperimentConfig",
    "ExperimentResult",
    "FullInformationHedge",
    "InfeasibleInstanceError",
    "InvalidInputError",
    "InvalidStateError",
    "InvariantViolationError",
    "LearnerConfig",
    "ProtocolViolationError",
    "RoundTrace",
    "SampleSet",
    "SamplingDistribution",
    "best_expert_in_hindsight",
    "compute_distribution",
    "importance_weighted_estimate",
    "inclusion_probability",
    "learning_rate",
    "run_once",
    "run_repeated",
    "sample_experts",
    "sweep_M",
]
