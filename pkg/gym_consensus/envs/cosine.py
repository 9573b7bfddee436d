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

"""A stateless game with a dense reward, for many agents.

Agent i sits at the constant local state s^i = cos(i / (N - 1) * pi) and
plays 0 or 1. The shared reward is the fraction of agents with s^i >= 0
playing 1 minus the fraction of agents with s^i < 0 playing 1, so the best
joint action plays 1 exactly on the non-negative side and earns +1.

Critic features concatenate (s^i, 1[a^i = 0], 1[a^i = 1]) over the agents.
Since the state never changes, most of these columns are constant or
linearly dependent; only N + 1 independent columns are kept.
"""
import logging
from typing import Hashable, Optional

import numpy as np
import scipy.linalg

from gym_consensus import utils
from gym_consensus.algorithms.features import FeatureMap, independent_columns
from gym_consensus.algorithms.linear_ac import ExpectedTerms
from gym_consensus.core.constants import DISCOUNT
from gym_consensus.core.games import FiniteMG, JointValue, ObservationMap, build_finite_mg
from gym_consensus.core.types import TERMINAL

logger = logging.getLogger(__name__)

ACTIONS = (0, 1)
MAX_ENUMERATED_AGENTS = 12
MAX_TABULATED_AGENTS = 4


def local_states(n_agents: int) -> np.ndarray:
    """
    The constant local states.

    >>> local_states(2).tolist()
    [1.0, -1.0]
    """
    if n_agents < 2:
        raise ValueError(f"At least two agents are needed, got {n_agents}")
    return np.cos(np.arange(n_agents) / (n_agents - 1) * np.pi)


def dense_reward(states: np.ndarray, actions: np.ndarray) -> float:
    """Mean of 1[a^i = 1] where s^i >= 0 minus the same mean where s^i < 0."""
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions)
    positive = states >= 0.0
    plus = actions[positive].mean() if positive.any() else 0.0
    minus = actions[~positive].mean() if (~positive).any() else 0.0
    return float(plus - minus)


def raw_features(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """concat over i of (s^i, 1[a^i = 0], 1[a^i = 1])."""
    actions = np.asarray(actions)
    return np.column_stack([states, actions == 0, actions == 1]).astype(float).reshape(-1)


class CosineToyMG:
    """The cosine game as a linear-trainer environment.

    In repeated mode the same state comes back at every step and values are
    discounted; in one-step mode every episode ends after one action.
    """

    n_local_actions = len(ACTIONS)

    def __init__(self, n_agents: int = 3, one_step: bool = False, discount: float = DISCOUNT):
        """Initialize."""
        self.states = local_states(n_agents)
        if not 0.0 <= discount < 1.0:
            raise ValueError("The discount must lie in [0, 1)")
        self.n_agents = n_agents
        self.one_step = one_step
        self.discount = discount
        positive = self.states >= 0.0
        self.reward_weights = np.where(
            positive, 1.0 / positive.sum(), -1.0 / (~positive).sum()
        )
        self.kept_columns = independent_columns(
            np.array([raw_features(self.states, a) for a in self._support_actions()])
        )
        logger.debug(
            "keeping %d of %d feature columns", len(self.kept_columns), 3 * n_agents
        )

    def _support_actions(self) -> np.ndarray:
        """The all-zero joint action and its N single flips."""
        return np.vstack([np.zeros(self.n_agents, dtype=int), np.eye(self.n_agents, dtype=int)])

    @property
    def feature_dim(self) -> int:
        """Critic feature dimension."""
        return len(self.kept_columns)

    @property
    def feature_names(self) -> list[str]:
        """Names of the kept columns."""
        names = [
            name
            for i in range(self.n_agents)
            for name in (f"s{i}", f"a{i}=0", f"a{i}=1")
        ]
        return [names[k] for k in self.kept_columns]

    def reward(self, actions: np.ndarray) -> float:
        """The shared reward of a joint action."""
        return float(self.reward_weights @ np.asarray(actions, dtype=float))

    def optimal_action(self) -> np.ndarray:
        """Play 1 exactly where s^i >= 0."""
        return (self.states >= 0.0).astype(int)

    def policy_inputs(self) -> np.ndarray:
        """Observation features (1, s^i) of each agent, shape (N, 1, 2)."""
        return np.column_stack([np.ones(self.n_agents), self.states])[:, None, :]

    def reset(self, rng: np.random.Generator) -> int:
        """The only state."""
        return 0

    def observe(self, state: int) -> np.ndarray:
        """Every agent has a single input."""
        return np.zeros(self.n_agents, dtype=int)

    def step(
        self, state: int, actions: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, int, bool]:
        """Shared reward; the episode ends only in one-step mode."""
        return np.full(self.n_agents, self.reward(actions)), 0, self.one_step

    def features(self, state: int, actions: np.ndarray) -> np.ndarray:
        """phi(s, a) on the kept columns."""
        return raw_features(self.states, actions)[self.kept_columns]

    def _probabilities(self, tables: np.ndarray) -> np.ndarray:
        """Probability that each agent plays 1."""
        return np.asarray(tables)[:, 0, 1]

    def exact_return(self, tables: np.ndarray) -> float:
        """Expected reward per step, i.e. (1 - gamma) J in repeated mode and J in one-step mode."""
        return float(self.reward_weights @ self._probabilities(tables))

    def action_values(self, tables: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Q of each joint action (one per row)."""
        immediate = np.asarray(actions, dtype=float) @ self.reward_weights
        if self.one_step:
            return immediate
        future = self.discount / (1.0 - self.discount) * self.exact_return(tables)
        return immediate + future

    def oracle_weights(self, tables: np.ndarray) -> Optional[np.ndarray]:
        """Critic weights matching Q exactly; Q is affine in the action indicators."""
        actions = self._support_actions()
        phi = np.array([self.features(0, a) for a in actions])
        return scipy.linalg.solve(phi, self.action_values(tables, actions))

    def expected_terms(self, tables: np.ndarray) -> ExpectedTerms:
        """Enumerate the 2^N joint actions."""
        if self.n_agents > MAX_ENUMERATED_AGENTS:
            raise ValueError(
                f"Expected updates enumerate 2^N joint actions; N <= {MAX_ENUMERATED_AGENTS}"
            )
        p = self._probabilities(tables)
        actions = utils.index_table([2] * self.n_agents)
        weights = np.prod(np.where(actions == 1, p, 1.0 - p), axis=1)
        phi = np.array([self.features(0, a) for a in actions])
        if self.one_step:
            next_phi = np.zeros_like(phi)
        else:
            next_phi = np.broadcast_to(weights @ phi, phi.shape).copy()
        rewards = np.repeat((actions @ self.reward_weights)[:, None], self.n_agents, axis=1)
        return ExpectedTerms(
            weights,
            phi,
            next_phi,
            rewards,
            np.zeros_like(actions),
            actions,
            self.discount,
        )

    def to_finite_mg(self) -> tuple[FiniteMG, ObservationMap]:
        """
        Tabulate the game for exact verification (N <= 4).

        All agents share the local state space {s^0, ..., s^N-1} (plus the
        terminal marker in one-step mode); the reward formula applies to any
        joint state. Agent i observes (s^i, sorted local states).
        """
        if self.n_agents > MAX_TABULATED_AGENTS:
            raise ValueError(f"Tabulation is limited to {MAX_TABULATED_AGENTS} agents")
        space: tuple[Hashable, ...] = tuple(float(s) for s in self.states)
        if self.one_step:
            space = space + (TERMINAL,)
        start = tuple(float(s) for s in self.states)
        end = (TERMINAL,) * self.n_agents

        def transition(state: JointValue, action: JointValue) -> dict:
            return {end if self.one_step else state: 1.0}

        def reward(state: JointValue, action: JointValue) -> list[float]:
            return [dense_reward(np.array(state), np.array(action))] * self.n_agents

        mg = build_finite_mg(
            [space] * self.n_agents,
            [ACTIONS] * self.n_agents,
            transition,
            reward,
            {start: 1.0},
            self.discount,
            name=f"cosine{self.n_agents}" + ("-one-step" if self.one_step else ""),
        )
        obs = ObservationMap.from_functions(
            mg,
            [
                lambda s, i=i: (s[i], tuple(sorted(s, key=repr)))
                for i in range(self.n_agents)
            ],
        )
        return mg, obs

    def feature_map(self, mg: FiniteMG) -> FeatureMap:
        """The kept feature columns tabulated over a game from 'to_finite_mg'."""
        names = self.feature_names

        def phi(state: JointValue, action: JointValue) -> np.ndarray:
            return raw_features(np.array(state, dtype=float), np.array(action))[
                self.kept_columns
            ]

        return FeatureMap.from_function(mg, phi, names)
