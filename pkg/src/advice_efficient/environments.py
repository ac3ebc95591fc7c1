"""Oblivious loss oracles and the query ledger that enforces the advice budget.

Each oracle fixes its whole T x N loss table at construction, so the loss of a
(round, expert) pair does not depend on query order or repetition. Rounds are
1-based throughout, matching the learner.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError, InvariantViolationError

__all__ = [
    "QueryLedger",
    "LossOracle",
    "matrix_environment",
    "bernoulli_environment",
    "drifting_environment",
    "bandit_adapter",
    "load_matrix_csv",
]

Seed = Union[int, np.random.Generator, None]


@dataclass
class QueryLedger:
    """Distinct experts queried per round, plus the raw query count."""

    horizon: int
    _seen: dict[int, set[int]] = field(default_factory=dict, repr=False)
    total_queries: int = 0

    def record(self, round: int, experts: Iterable[int]) -> None:
        seen = self._seen.setdefault(round, set())
        for h in experts:
            seen.add(h)
            self.total_queries += 1

    def count(self, round: int) -> int:
        return len(self._seen.get(round, ()))

    def counts(self) -> np.ndarray:
        return np.array([self.count(t) for t in range(1, self.horizon + 1)], dtype=np.int64)

    def check_round(self, round: int, budget: int) -> None:
        n = self.count(round)
        if n > budget:
            raise InvariantViolationError(
                f"round {round}: {n} distinct experts queried, budget is {budget}"
            )

    def verify(self, budget: int, rounds: Optional[int] = None) -> None:
        """Every round up to ``rounds`` must have queried exactly ``budget`` experts."""
        counts = self.counts()[: rounds if rounds is not None else self.horizon]
        bad = np.flatnonzero(counts != budget)
        if bad.size:
            t = int(bad[0]) + 1
            raise InvariantViolationError(
                f"round {t}: {int(counts[bad[0]])} distinct experts queried, expected exactly {budget}"
            )

    def summary(self) -> dict:
        counts = self.counts()
        return {
            "rounds": self.horizon,
            "min_per_round": int(counts.min()) if counts.size else 0,
            "max_per_round": int(counts.max()) if counts.size else 0,
            "total_queries": int(self.total_queries),
        }


class LossOracle:
    """Answers per-round loss queries for requested experts and logs them."""

    def __init__(self, kind: str, losses: np.ndarray, params: Optional[dict] = None) -> None:
        losses = np.asarray(losses, dtype=np.float64)
        if losses.ndim != 2 or losses.size == 0:
            raise InvalidInputError("loss table must be a non-empty T x N matrix")
        if not np.all((losses >= 0.0) & (losses <= 1.0)):
            raise InvalidInputError("every loss must lie in [0, 1]")
        losses.setflags(write=False)
        self.kind = kind
        self.params = dict(params or {})
        self._losses = losses
        self.ledger = QueryLedger(self.T)

    @property
    def T(self) -> int:
        return int(self._losses.shape[0])

    @property
    def N(self) -> int:
        return int(self._losses.shape[1])

    def _row(self, round: int) -> np.ndarray:
        if not 1 <= round <= self.T:
            raise InvalidInputError(f"round {round} outside horizon 1..{self.T}")
        return self._losses[round - 1]

    def query(self, round: int, experts: Iterable[int]) -> dict[int, float]:
        """Losses of the requested experts in ``round``; every request is logged."""
        row = self._row(round)
        experts = list(experts)
        for h in experts:
            if not 0 <= h < self.N:
                raise InvalidInputError(f"expert {h} out of range for N={self.N}")
        self.ledger.record(round, experts)
        return {h: float(row[h]) for h in experts}

    def true_losses(self, round: int) -> np.ndarray:
        """Full loss vector for harness-side regret accounting (not logged)."""
        return self._row(round).copy()

    @property
    def loss_matrix(self) -> np.ndarray:
        return self._losses

    def reset_ledger(self) -> None:
        self.ledger = QueryLedger(self.T)


def _as_rng(rng: Seed) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_means(means: Sequence[float]) -> np.ndarray:
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 1 or means.size == 0:
        raise InvalidInputError("means must be a non-empty vector")
    if not np.all((means >= 0.0) & (means <= 1.0)):
        raise InvalidInputError("Bernoulli means must lie in [0, 1]")
    return means


def _check_horizon(T: int) -> int:
    if int(T) != T or T < 1:
        raise InvalidInputError(f"horizon T must be an integer >= 1, got {T!r}")
    return int(T)


def matrix_environment(losses) -> LossOracle:
    """Replay an explicit T x N loss matrix."""
    return LossOracle("matrix", np.array(losses, dtype=np.float64))


def bernoulli_environment(means: Sequence[float], T: int, rng: Seed = None) -> LossOracle:
    """Independent Bernoulli(means[h]) losses for every (round, expert)."""
    means = _check_means(means)
    T = _check_horizon(T)
    u = _as_rng(rng).random((T, means.size))
    return LossOracle("bernoulli", (u < means).astype(np.float64), {"means": means.tolist()})


def drifting_means(base_means: Sequence[float], drift_period: int, round: int) -> np.ndarray:
    """Means in force at a 1-based round: rotated left once per elapsed period."""
    base = np.asarray(base_means, dtype=np.float64)
    shift = (round - 1) // drift_period
    return base[(np.arange(base.size) + shift) % base.size]


def drifting_environment(
    base_means: Sequence[float], drift_period: int, T: int, rng: Seed = None
) -> LossOracle:
    """Bernoulli losses whose means rotate one position every ``drift_period`` rounds.

    Uses the same uniform draws as :func:`bernoulli_environment` for a given
    seed, so a period longer than the horizon reproduces it exactly.
    """
    base = _check_means(base_means)
    if int(drift_period) != drift_period or drift_period < 1:
        raise InvalidInputError(f"drift_period must be an integer >= 1, got {drift_period!r}")
    T = _check_horizon(T)
    u = _as_rng(rng).random((T, base.size))
    shifts = (np.arange(T) // drift_period)[:, None]
    means = base[(np.arange(base.size)[None, :] + shifts) % base.size]
    return LossOracle(
        "drifting",
        (u < means).astype(np.float64),
        {"base_means": base.tolist(), "drift_period": int(drift_period)},
    )


def bandit_adapter(
    arm_means: Optional[Sequence[float]] = None,
    arm_matrix=None,
    T: Optional[int] = None,
    rng: Seed = None,
) -> LossOracle:
    """K-armed bandit as K constant experts: expert h always plays arm h.

    Give either Bernoulli ``arm_means`` (with ``T``) or an explicit ``arm_matrix``.
    Observing M experts then means seeing the played arm plus M - 1 others.
    """
    if (arm_means is None) == (arm_matrix is None):
        raise InvalidInputError("give exactly one of arm_means or arm_matrix")
    if arm_matrix is not None:
        inner = matrix_environment(arm_matrix)
        params = {}
    else:
        if T is None:
            raise InvalidInputError("arm_means needs a horizon T")
        inner = bernoulli_environment(arm_means, T, rng)
        params = dict(inner.params)
    params["K"] = inner.N
    return LossOracle("bandit-adapter", inner.loss_matrix, params)


def load_matrix_csv(path: Union[str, PathLike]) -> np.ndarray:
    """Strictly parse a headerless CSV of T rows by N losses in [0, 1]."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record:
                raise InvalidInputError(f"{path}:{lineno}: empty row")
            values = []
            for cell in record:
                try:
                    x = float(cell)
                except ValueError:
                    raise InvalidInputError(f"{path}:{lineno}: not a number: {cell!r}") from None
                if not math.isfinite(x) or not 0.0 <= x <= 1.0:
                    raise InvalidInputError(f"{path}:{lineno}: loss {cell!r} outside [0, 1]")
                values.append(x)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InvalidInputError(
                    f"{path}:{lineno}: ragged row ({len(values)} columns, expected {width})"
                )
            rows.append(values)
    if not rows:
        raise InvalidInputError(f"{path}: no rows")
    return np.array(rows, dtype=np.float64)
