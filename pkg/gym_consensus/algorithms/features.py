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

"""Critic feature maps phi(s, a) over finite games."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from gym_consensus.algorithms.consensus import (
    Assumption,
    AssumptionViolation,
    column_rank,
)
from gym_consensus.core.games import FiniteMG, JointValue

logger = logging.getLogger(__name__)


def independent_columns(matrix: np.ndarray) -> list[int]:
    """Greedily keep the columns that increase the rank, left to right."""
    kept: list[int] = []
    rank = 0
    for k in range(matrix.shape[1]):
        candidate = column_rank(matrix[:, kept + [k]])
        if candidate > rank:
            kept.append(k)
            rank = candidate
    return kept


@dataclass(frozen=True)
class FeatureMap:
    """The matrix view of a feature map.

    Row s * |A| + a holds phi(s, a), so that the matrix has shape
    (|S| * |A|, K).
    """

    matrix: np.ndarray
    n_actions: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        """Validate."""
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] % self.n_actions != 0:
            raise ValueError("Feature matrix must have shape (|S| * |A|, K)")
        if not np.all(np.isfinite(matrix)):
            raise AssumptionViolation(Assumption.FEATURES, "features must be bounded")
        names = tuple(self.names) or tuple(f"phi{k}" for k in range(matrix.shape[1]))
        if len(names) != matrix.shape[1]:
            raise ValueError("Need one name per feature")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        """Get the feature dimension K."""
        return self.matrix.shape[1]

    @property
    def n_states(self) -> int:
        """Get the number of joint states."""
        return self.matrix.shape[0] // self.n_actions

    def phi(self, state: int, action: int) -> np.ndarray:
        """Feature vector of a (state, action) pair."""
        return self.matrix[state * self.n_actions + action]

    def cube(self) -> np.ndarray:
        """Features as an array of shape (|S|, |A|, K)."""
        return self.matrix.reshape(self.n_states, self.n_actions, self.dim)

    def select(self, columns: Sequence[int]) -> "FeatureMap":
        """Keep a subset of the columns."""
        columns = list(columns)
        return FeatureMap(
            self.matrix[:, columns], self.n_actions, tuple(self.names[k] for k in columns)
        )

    def rank(self, rows: Optional[np.ndarray] = None) -> int:
        """Column rank, optionally restricted to some rows."""
        matrix = self.matrix if rows is None else self.matrix[rows]
        return column_rank(matrix)

    def check_full_rank(self, rows: Optional[np.ndarray] = None):
        """Raise unless the (restricted) matrix has full column rank."""
        rank = self.rank(rows)
        if rank < self.dim:
            raise AssumptionViolation(
                Assumption.FEATURES,
                f"feature matrix has rank {rank} < {self.dim} columns",
            )

    def reduced(self, rows: Optional[np.ndarray] = None) -> "FeatureMap":
        """Drop the columns that are linearly dependent on earlier ones."""
        matrix = self.matrix if rows is None else self.matrix[rows]
        kept = independent_columns(matrix)
        dropped = [self.names[k] for k in range(self.dim) if k not in kept]
        if dropped:
            logger.warning("dropping %d dependent feature columns: %s", len(dropped), dropped)
        return self.select(kept)

    @classmethod
    def from_function(
        cls,
        mg: FiniteMG,
        fn: Callable[[JointValue, JointValue], Sequence[float]],
        names: Sequence[str] = (),
    ) -> "FeatureMap":
        """Tabulate phi over every (state, action) pair of a game.

        Terminal states get zero features: their value is 0 by convention.
        """
        states = [mg.joint_state(s) for s in range(mg.n_states)]
        actions = [mg.joint_action(a) for a in range(mg.n_actions)]
        first = np.asarray(fn(states[0], actions[0]), dtype=float)
        matrix = np.zeros((mg.n_states * mg.n_actions, first.size))
        for s, state in enumerate(states):
            if s in mg.terminal_states:
                continue
            for a, action in enumerate(actions):
                matrix[s * mg.n_actions + a] = fn(state, action)
        return cls(matrix, mg.n_actions, tuple(names))

    @classmethod
    def tabular(cls, mg: FiniteMG) -> "FeatureMap":
        """One indicator per (state, action) pair."""
        size = mg.n_states * mg.n_actions
        return cls(np.eye(size), mg.n_actions)
