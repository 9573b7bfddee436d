# -*- coding: utf-8 -*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus.  If not, see <https://www.gnu.org/licenses/>.
#

"""Consensus matrices, step-size schedules and the convergence assumptions.

A consensus step replaces the parameter vector of each agent with a weighted
mixture of the vectors of all agents:

    w^i <- sum_j c(i, j) w^j

where C = [c(i, j)] is row-stochastic.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from gym_consensus.core import constants

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12
COLUMN_SUM_TOLERANCE = 1e-3
SPECTRAL_MARGIN = 1e-6
MIN_SAMPLES = 10_000


class Assumption(Enum):
    """The assumptions behind the convergence of the consensus actor-critic."""

    MARKOV_GAME = 1
    FEATURES = 2
    STEPSIZES = 3
    CONSENSUS = 4
    STABILITY = 5

    @property
    def label(self) -> str:
        """Human readable name."""
        return f"Assumption {self.value} ({constants.ASSUMPTION_NAMES[self.value]})"


class AssumptionViolation(ValueError):
    """A convergence assumption does not hold."""

    def __init__(self, assumption: Assumption, message: str):
        """Initialize."""
        super().__init__(f"{assumption.label}: {message}")
        self.assumption = assumption


def column_rank(matrix: np.ndarray) -> int:
    """Numerical column rank from a QR factorization with column pivoting."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    r = scipy.linalg.qr(matrix, mode="r", pivoting=True)[0]
    diagonal = np.abs(np.diag(r))
    if diagonal.size == 0 or diagonal[0] == 0.0:
        return 0
    tol = max(matrix.shape) * np.finfo(float).eps * diagonal[0]
    return int(np.sum(diagonal > tol))


@dataclass(frozen=True)
class ConsensusMatrix:
    """A nonnegative row-stochastic N x N matrix."""

    weights: np.ndarray

    def __post_init__(self):
        """Validate."""
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ValueError("A consensus matrix must be square")
        if np.any(weights < 0.0):
            raise ValueError("A consensus matrix must be nonnegative")
        row_sums = weights.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError(f"A consensus matrix must be row-stochastic: {row_sums}")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        """Get the number of agents."""
        return self.weights.shape[0]

    @property
    def is_doubly_stochastic(self) -> bool:
        """Check whether the columns sum to one as well."""
        return bool(np.all(np.abs(self.weights.sum(axis=0) - 1.0) <= ROW_SUM_TOLERANCE))

    @property
    def is_identity(self) -> bool:
        """Check whether the matrix does nothing."""
        return bool(np.array_equal(self.weights, np.eye(self.n)))

    @classmethod
    def uniform(cls, n: int) -> "ConsensusMatrix":
        """Every agent takes the mean of all agents."""
        return cls(np.full((n, n), 1.0 / n))

    @classmethod
    def identity(cls, n: int) -> "ConsensusMatrix":
        """No communication."""
        return cls(np.eye(n))

    @classmethod
    def gossip(cls, n: int, i: int, j: int) -> "ConsensusMatrix":
        """Agents i and j replace their vectors with the pairwise average."""
        if i == j:
            raise ValueError("A gossip pair needs two distinct agents")
        weights = np.eye(n)
        weights[[i, i, j, j], [i, j, i, j]] = 0.5
        return cls(weights)


def apply_consensus(
    params: Union[np.ndarray, Sequence[np.ndarray]],
    c: Union[ConsensusMatrix, np.ndarray],
) -> np.ndarray:
    """
    Mix the per-agent parameter vectors.

    :param params: N vectors of equal dimension, stacked or as a list.
    :param c: the consensus matrix (validated if given as an array).
    :return: array of shape (N, d) whose row i is sum_j c(i, j) params[j].
    """
    if not isinstance(c, ConsensusMatrix):
        c = ConsensusMatrix(c)
    if not isinstance(params, np.ndarray):
        if len({np.shape(p) for p in params}) > 1:
            raise ValueError("All agent vectors must have the same dimension")
    stacked = np.asarray(params, dtype=float)
    if stacked.ndim == 1:
        stacked = stacked[:, None]
    if stacked.shape[0] != c.n:
        raise ValueError(f"Expected {c.n} agent vectors, got {stacked.shape[0]}")
    shape = stacked.shape
    mixed = c.weights @ stacked.reshape(shape[0], -1)
    return mixed.reshape(shape)


def disagreement(params: Union[np.ndarray, Sequence[np.ndarray]]) -> tuple[np.ndarray, float]:
    """
    Split stacked parameters into the agreement and disagreement components.

    :param params: N vectors of equal dimension.
    :return: the mean vector and the Euclidean norm of the stacked deviations.
    """
    stacked = np.asarray(params, dtype=float)
    mean = stacked.mean(axis=0)
    return mean, float(np.linalg.norm(stacked - mean))


class ConsensusProcess:
    """A source of consensus matrices, one per step.

    Kinds: "uniform" (1/N everywhere), "gossip" (one uniformly random pair
    averages), "off" (identity).
    """

    def __init__(self, kind: str, n: int):
        """Initialize."""
        if kind not in ("uniform", "gossip", "off"):
            raise ValueError(f"Unknown consensus kind: {kind}")
        if kind == "gossip" and n < 2:
            raise ValueError("Gossip needs at least two agents")
        self.kind = kind
        self.n = n
        self._static = {
            "uniform": ConsensusMatrix.uniform(n),
            "off": ConsensusMatrix.identity(n),
        }.get(kind)

    def __call__(self, rng: np.random.Generator) -> ConsensusMatrix:
        """Draw the matrix of the next step."""
        if self._static is not None:
            return self._static
        i, j = rng.choice(self.n, size=2, replace=False)
        return ConsensusMatrix.gossip(self.n, int(i), int(j))


class ScheduleKind(Enum):
    """Families of step sizes."""

    POWER_DECAY = "power"
    CONSTANT = "constant"
    ADAPTIVE_MOMENT = "adam"


@dataclass(frozen=True)
class StepSchedule:
    """Step size beta_t.

    For POWER_DECAY, beta_t = scale * (1 + t)^(-exponent). For
    ADAPTIVE_MOMENT, `scale` is the learning rate of the optimizer.
    """

    kind: ScheduleKind = ScheduleKind.POWER_DECAY
    exponent: float = 0.65
    scale: float = 1.0

    def __post_init__(self):
        """Validate."""
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.scale <= 0.0:
            raise ValueError("The step scale must be positive")

    def __call__(self, t: int) -> float:
        """Step size at step t (0-based)."""
        if self.kind == ScheduleKind.POWER_DECAY:
            return self.scale * (1.0 + t) ** (-self.exponent)
        return self.scale

    @property
    def diverging_sum(self) -> bool:
        """Whether sum_t beta_t diverges."""
        if self.kind == ScheduleKind.POWER_DECAY:
            return self.exponent <= 1.0
        return self.kind == ScheduleKind.CONSTANT

    @property
    def summable_squares(self) -> bool:
        """Whether sum_t beta_t^2 converges."""
        return self.kind == ScheduleKind.POWER_DECAY and self.exponent > 0.5

    @classmethod
    def default_critic(cls) -> "StepSchedule":
        """beta_w = (1 + t)^-0.65."""
        return cls(ScheduleKind.POWER_DECAY, 0.65)

    @classmethod
    def default_actor(cls) -> "StepSchedule":
        """beta_theta = (1 + t)^-0.85."""
        return cls(ScheduleKind.POWER_DECAY, 0.85)


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one check."""

    assumption: Assumption
    name: str
    passed: bool
    value: Optional[float] = None
    detail: str = ""


@dataclass
class AssumptionReport:
    """Outcome of 'validate_assumptions'."""

    checks: list[AssumptionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True iff every check passed."""
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        """The failed checks."""
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> AssumptionCheck:
        """Look up a check by name."""
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def raise_for_failure(self):
        """Raise an AssumptionViolation for the first failed check."""
        failures = self.failures()
        if failures:
            first = failures[0]
            raise AssumptionViolation(first.assumption, f"{first.name}: {first.detail}")

    def to_dict(self) -> dict[str, Any]:
        """Encode into a JSON-friendly dictionary."""
        return {
            "passed": self.passed,
            "checks": [
                {
                    "assumption": c.assumption.value,
                    "name": c.name,
                    "passed": c.passed,
                    "value": c.value,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _check_consensus(
    c_sampler: Callable[[np.random.Generator], ConsensusMatrix],
    n_samples: int,
    rng: np.random.Generator,
) -> list[AssumptionCheck]:
    first = c_sampler(rng)
    n = first.n
    projector = np.eye(n) - np.full((n, n), 1.0 / n)
    mean = np.zeros((n, n))
    contraction = np.zeros((n, n))
    worst_row = 0.0
    for k in range(n_samples):
        c = first if k == 0 else c_sampler(rng)
        w = np.asarray(c.weights)
        worst_row = max(worst_row, float(np.max(np.abs(w.sum(axis=1) - 1.0))))
        mean += w
        contraction += w.T @ projector @ w
    mean /= n_samples
    contraction /= n_samples
    column_error = float(np.max(np.abs(mean.sum(axis=0) - 1.0)))
    spectral = float(np.linalg.norm(contraction, ord=2))
    return [
        AssumptionCheck(
            Assumption.CONSENSUS,
            "row_stochastic",
            worst_row <= ROW_SUM_TOLERANCE,
            worst_row,
            "every sampled matrix must be row-stochastic",
        ),
        AssumptionCheck(
            Assumption.CONSENSUS,
            "mean_column_stochastic",
            column_error <= COLUMN_SUM_TOLERANCE,
            column_error,
            f"columns of E[C] must sum to 1 within {COLUMN_SUM_TOLERANCE}",
        ),
        AssumptionCheck(
            Assumption.CONSENSUS,
            "spectral_contraction",
            spectral < 1.0 - SPECTRAL_MARGIN,
            spectral,
            "spectral norm of E[C^T (I - 11^T/N) C] must be below 1",
        ),
    ]


def _check_schedules(critic: StepSchedule, actor: StepSchedule) -> list[AssumptionCheck]:
    checks = []
    for name, schedule in (("critic", critic), ("actor", actor)):
        ok = schedule.diverging_sum and schedule.summable_squares
        checks.append(
            AssumptionCheck(
                Assumption.STEPSIZES,
                f"{name}_robbins_monro",
                ok,
                schedule.exponent if schedule.kind == ScheduleKind.POWER_DECAY else None,
                f"{schedule.kind.value} schedule: sum beta = inf and sum beta^2 < inf "
                "hold only for power decay with exponent in (0.5, 1]",
            )
        )
    two_timescale = (
        critic.kind == ScheduleKind.POWER_DECAY
        and actor.kind == ScheduleKind.POWER_DECAY
        and actor.exponent > critic.exponent
    )
    checks.append(
        AssumptionCheck(
            Assumption.STEPSIZES,
            "two_timescales",
            two_timescale,
            None,
            "beta_theta / beta_omega -> 0 needs a larger actor exponent",
        )
    )
    return checks


def validate_assumptions(
    c_sampler: Callable[[np.random.Generator], ConsensusMatrix],
    schedules: tuple[StepSchedule, StepSchedule],
    features: Optional[Any] = None,
    n_samples: int = MIN_SAMPLES,
    seed: int = 0,
) -> AssumptionReport:
    """
    Check the consensus, step-size and feature assumptions.

    :param c_sampler: draws consensus matrices from a random generator.
    :param schedules: the (critic, actor) step-size schedules.
    :param features: a feature matrix, or an object with a `matrix` attribute.
    :param n_samples: number of sampled matrices, at least 10^4.
    :param seed: seed of the sampling generator.
    :return: the report; call `raise_for_failure` to turn it into an exception.
    """
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"At least {MIN_SAMPLES} samples are needed")
    rng = np.random.default_rng(seed)
    report = AssumptionReport()
    report.checks.extend(_check_consensus(c_sampler, n_samples, rng))
    report.checks.extend(_check_schedules(*schedules))
    if features is not None:
        matrix = np.asarray(getattr(features, "matrix", features), dtype=float)
        rank = column_rank(matrix)
        report.checks.append(
            AssumptionCheck(
                Assumption.FEATURES,
                "full_column_rank",
                rank == matrix.shape[1],
                float(rank),
                f"rank {rank} with {matrix.shape[1]} columns",
            )
        )
    for check in report.failures():
        logger.warning("%s failed: %s (value=%s)", check.name, check.detail, check.value)
    return report
