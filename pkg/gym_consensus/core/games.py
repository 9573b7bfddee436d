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

"""Finite cooperative Markov games and observation maps.

Joint states and joint actions are the Cartesian products of the local
spaces, indexed with `utils.encode` (agent 0 least significant). Terminal
states are absorbing and pay zero reward.
"""
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Optional, Sequence

import numpy as np

from gym_consensus import utils
from gym_consensus.core.types import TERMINAL, Permutation

ROW_SUM_TOLERANCE = 1e-12

JointValue = tuple[Hashable, ...]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FiniteMG:
    """A cooperative Markov game with enumerable states and actions.

    :param local_state_spaces: one ordered tuple of local states per agent.
    :param local_action_spaces: one ordered tuple of local actions per agent.
    :param transition: array P[s, a, s'] of shape (|S|, |A|, |S|).
    :param rewards: array R[s, a, i] of shape (|S|, |A|, N).
    :param initial_dist: distribution over joint states.
    :param discount: the discount factor. 1 is accepted for episodic games.
    :param terminal_states: joint state indices that end an episode.
    """

    local_state_spaces: tuple[tuple[Hashable, ...], ...]
    local_action_spaces: tuple[tuple[Hashable, ...], ...]
    transition: np.ndarray
    rewards: np.ndarray
    initial_dist: np.ndarray
    discount: float
    terminal_states: frozenset[int] = field(default_factory=frozenset)
    name: str = "game"

    def __post_init__(self):
        """Validate the tables and normalize terminal states."""
        state_spaces = tuple(tuple(s) for s in self.local_state_spaces)
        action_spaces = tuple(tuple(a) for a in self.local_action_spaces)
        if len(state_spaces) != len(action_spaces) or len(state_spaces) == 0:
            raise ValueError("Need one state space and one action space per agent")
        for space in state_spaces + action_spaces:
            if len(space) == 0 or len(set(space)) != len(space):
                raise ValueError(f"Local spaces must be non-empty and unique: {space}")
        object.__setattr__(self, "local_state_spaces", state_spaces)
        object.__setattr__(self, "local_action_spaces", action_spaces)

        state_sizes = [len(s) for s in state_spaces]
        action_sizes = [len(a) for a in action_spaces]
        n_states = int(np.prod(state_sizes))
        n_actions = int(np.prod(action_sizes))
        n_agents = len(state_spaces)

        transition = np.array(self.transition, dtype=float)
        rewards = np.array(self.rewards, dtype=float)
        initial = np.array(self.initial_dist, dtype=float)
        if transition.shape != (n_states, n_actions, n_states):
            raise ValueError(
                f"Transition shape {transition.shape} != {(n_states, n_actions, n_states)}"
            )
        if rewards.shape != (n_states, n_actions, n_agents):
            raise ValueError(
                f"Reward shape {rewards.shape} != {(n_states, n_actions, n_agents)}"
            )
        if initial.shape != (n_states,):
            raise ValueError("Initial distribution has the wrong size")
        if not np.all(np.isfinite(rewards)):
            raise ValueError("Rewards must be finite")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("Discount must lie in [0, 1]")

        terminal = frozenset(int(s) for s in self.terminal_states)
        if any(not 0 <= s < n_states for s in terminal):
            raise ValueError("Terminal state index out of range")
        if self.discount == 1.0 and not terminal:
            raise ValueError("Discount 1 is only accepted for episodic games")
        for s in terminal:
            transition[s] = 0.0
            transition[s, :, s] = 1.0
            rewards[s] = 0.0

        if np.any(transition < 0.0):
            raise ValueError("Negative transition probability")
        row_sums = transition.sum(axis=2)
        bad = np.argwhere(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE)
        if len(bad) > 0:
            s, a = bad[0]
            raise ValueError(
                f"Transition row (s={self.joint_state(int(s), state_spaces)}, "
                f"a={self.joint_action(int(a), action_spaces)}) sums to {row_sums[s, a]}"
            )
        if np.any(initial < 0.0) or abs(initial.sum() - 1.0) > ROW_SUM_TOLERANCE:
            raise ValueError("Initial distribution must be a probability vector")

        object.__setattr__(self, "transition", _frozen(transition))
        object.__setattr__(self, "rewards", _frozen(rewards))
        object.__setattr__(self, "initial_dist", _frozen(initial))
        object.__setattr__(self, "terminal_states", terminal)
        object.__setattr__(self, "_state_sizes", tuple(state_sizes))
        object.__setattr__(self, "_action_sizes", tuple(action_sizes))
        object.__setattr__(self, "_state_table", utils.index_table(state_sizes))
        object.__setattr__(self, "_action_table", utils.index_table(action_sizes))

    @property
    def n_agents(self) -> int:
        """Get the number of agents."""
        return len(self.local_state_spaces)

    @property
    def n_states(self) -> int:
        """Get the number of joint states."""
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        """Get the number of joint actions."""
        return self.transition.shape[1]

    @property
    def state_sizes(self) -> tuple[int, ...]:
        """Get the sizes of the local state spaces."""
        return self._state_sizes  # type: ignore

    @property
    def action_sizes(self) -> tuple[int, ...]:
        """Get the sizes of the local action spaces."""
        return self._action_sizes  # type: ignore

    @property
    def state_table(self) -> np.ndarray:
        """Local state indices of every joint state, shape (|S|, N)."""
        return self._state_table  # type: ignore

    @property
    def action_table(self) -> np.ndarray:
        """Local action indices of every joint action, shape (|A|, N)."""
        return self._action_table  # type: ignore

    @property
    def is_episodic(self) -> bool:
        """Check whether the game has terminal states."""
        return len(self.terminal_states) > 0

    @property
    def nonterminal_mask(self) -> np.ndarray:
        """Boolean mask of the non-terminal joint states."""
        mask = np.ones(self.n_states, dtype=bool)
        mask[list(self.terminal_states)] = False
        return mask

    @property
    def mean_reward(self) -> np.ndarray:
        """The team reward r(s, a) = mean_i R^i(s, a)."""
        return self.rewards.mean(axis=2)

    @property
    def is_one_step(self) -> bool:
        """Check whether every non-terminal state moves to a terminal state."""
        if not self.is_episodic:
            return False
        terminal = sorted(self.terminal_states)
        mass = self.transition[self.nonterminal_mask][:, :, terminal].sum(axis=2)
        return bool(np.allclose(mass, 1.0, atol=ROW_SUM_TOLERANCE))

    def joint_state(
        self, index: int, spaces: Optional[Sequence[Sequence[Hashable]]] = None
    ) -> JointValue:
        """Decode a joint state index into local states."""
        spaces = spaces if spaces is not None else self.local_state_spaces
        digits = utils.decode(index, [len(s) for s in spaces])
        return tuple(space[d] for space, d in zip(spaces, digits))

    def joint_action(
        self, index: int, spaces: Optional[Sequence[Sequence[Hashable]]] = None
    ) -> JointValue:
        """Decode a joint action index into local actions."""
        spaces = spaces if spaces is not None else self.local_action_spaces
        digits = utils.decode(index, [len(a) for a in spaces])
        return tuple(space[d] for space, d in zip(spaces, digits))

    def state_index(self, state: Sequence[Hashable]) -> int:
        """Encode a tuple of local states."""
        if len(state) != self.n_agents:
            raise ValueError("Wrong number of local states")
        digits = [space.index(v) for space, v in zip(self.local_state_spaces, state)]
        return utils.encode(digits, self.state_sizes)

    def action_index(self, action: Sequence[Hashable]) -> int:
        """Encode a tuple of local actions."""
        if len(action) != self.n_agents:
            raise ValueError("Wrong number of local actions")
        digits = [space.index(v) for space, v in zip(self.local_action_spaces, action)]
        return utils.encode(digits, self.action_sizes)

    def permuted_states(self, m: Permutation) -> np.ndarray:
        """Array `p` with p[s] the index of the joint state Ms.

        Only meaningful when all local state spaces coincide.
        """
        permuted = np.empty_like(self.state_table)
        permuted[:, list(m.mapping)] = self.state_table
        return utils.encode_rows(permuted, self.state_sizes)

    def permuted_actions(self, m: Permutation) -> np.ndarray:
        """Array `p` with p[a] the index of the joint action Ma."""
        permuted = np.empty_like(self.action_table)
        permuted[:, list(m.mapping)] = self.action_table
        return utils.encode_rows(permuted, self.action_sizes)

    def step(
        self, state: int, action: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, int, bool]:
        """Sample a transition: per-agent rewards, next state and termination."""
        rewards = self.rewards[state, action]
        next_state = int(rng.choice(self.n_states, p=self.transition[state, action]))
        return rewards, next_state, next_state in self.terminal_states

    def sample_initial(self, rng: np.random.Generator) -> int:
        """Sample an initial joint state."""
        return int(rng.choice(self.n_states, p=self.initial_dist))


def build_finite_mg(
    local_states: Sequence[Sequence[Hashable]],
    local_actions: Sequence[Sequence[Hashable]],
    transition_fn: Callable[[JointValue, JointValue], Mapping[JointValue, float]],
    reward_fn: Callable[[JointValue, JointValue], Sequence[float]],
    initial: Mapping[JointValue, float],
    discount: float,
    terminal_fn: Optional[Callable[[JointValue], bool]] = None,
    name: str = "game",
) -> FiniteMG:
    """
    Build a FiniteMG by tabulating functions of local values.

    Terminal states are not queried: they are normalized to zero-reward
    self-loops.

    :param local_states: one ordered local state space per agent.
    :param local_actions: one ordered local action space per agent.
    :param transition_fn: maps (state, action) to a sparse next-state distribution.
    :param reward_fn: maps (state, action) to one reward per agent.
    :param initial: sparse initial distribution.
    :param discount: the discount factor.
    :param terminal_fn: predicate on joint states; defaults to "contains TERMINAL".
    :param name: a label.
    :return: the game.
    """
    is_terminal = terminal_fn or (lambda state: TERMINAL in state)
    state_spaces = tuple(tuple(s) for s in local_states)
    action_spaces = tuple(tuple(a) for a in local_actions)
    state_sizes = [len(s) for s in state_spaces]
    action_sizes = [len(a) for a in action_spaces]
    n_states = int(np.prod(state_sizes))
    n_actions = int(np.prod(action_sizes))
    n_agents = len(state_spaces)

    def encode_state(state: Sequence[Hashable]) -> int:
        digits = [space.index(v) for space, v in zip(state_spaces, state)]
        return utils.encode(digits, state_sizes)

    states = [
        tuple(space[d] for space, d in zip(state_spaces, row))
        for row in utils.index_table(state_sizes)
    ]
    actions = [
        tuple(space[d] for space, d in zip(action_spaces, row))
        for row in utils.index_table(action_sizes)
    ]

    transition = np.zeros((n_states, n_actions, n_states))
    rewards = np.zeros((n_states, n_actions, n_agents))
    terminal = set()
    for s, state in enumerate(states):
        if is_terminal(state):
            terminal.add(s)
            continue
        for a, action in enumerate(actions):
            for next_state, p in transition_fn(state, action).items():
                transition[s, a, encode_state(next_state)] += p
            rewards[s, a] = reward_fn(state, action)

    initial_dist = np.zeros(n_states)
    for state, p in initial.items():
        initial_dist[encode_state(state)] += p

    return FiniteMG(
        state_spaces,
        action_spaces,
        transition,
        rewards,
        initial_dist,
        discount,
        frozenset(terminal),
        name,
    )


@dataclass(frozen=True)
class ObservationMap:
    """Per-agent observation functions into a common observation space.

    :param table: array of shape (N, |S|); table[i, s] indexes the
        observation of agent i in joint state s.
    :param observation_space: the common observation space, ordered.
    :param full_observability: whether each o^i is declared bijective.
    """

    table: np.ndarray
    observation_space: tuple[Hashable, ...]
    full_observability: bool = False

    def __post_init__(self):
        """Check that every observation belongs to the declared space."""
        table = np.array(self.table, dtype=np.int64)
        if table.ndim != 2:
            raise ValueError("Observation table must have shape (N, |S|)")
        space = tuple(self.observation_space)
        if table.size and (table.min() < 0 or table.max() >= len(space)):
            raise ValueError("Observation outside the declared observation space")
        if self.full_observability:
            for i, row in enumerate(table):
                if len(np.unique(row)) != len(row):
                    raise ValueError(
                        f"Observation function of agent {i} is not injective"
                    )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "observation_space", space)

    @property
    def n_agents(self) -> int:
        """Get the number of agents."""
        return self.table.shape[0]

    @property
    def n_states(self) -> int:
        """Get the number of joint states."""
        return self.table.shape[1]

    @property
    def n_observations(self) -> int:
        """Get the size of the observation space."""
        return len(self.observation_space)

    def observe(self, agent: int, state: int) -> Hashable:
        """Observation of an agent in a joint state."""
        return self.observation_space[self.table[agent, state]]

    def check_compatible(self, mg: FiniteMG):
        """Raise if the map does not fit the game."""
        if self.n_agents != mg.n_agents or self.n_states != mg.n_states:
            raise ValueError(
                f"Observation map of shape {self.table.shape} does not match "
                f"a game with {mg.n_agents} agents and {mg.n_states} states"
            )

    @classmethod
    def from_functions(
        cls,
        mg: FiniteMG,
        functions: Sequence[Callable[[JointValue], Hashable]],
        full_observability: bool = False,
    ) -> "ObservationMap":
        """Tabulate one observation function per agent over the joint states."""
        if len(functions) != mg.n_agents:
            raise ValueError("Need one observation function per agent")
        values = [
            [fn(mg.joint_state(s)) for s in range(mg.n_states)] for fn in functions
        ]
        space = sorted({v for row in values for v in row}, key=repr)
        lookup = {v: k for k, v in enumerate(space)}
        table = np.array([[lookup[v] for v in row] for row in values])
        return cls(table, tuple(space), full_observability)

    @classmethod
    def identity(cls, mg: FiniteMG) -> "ObservationMap":
        """Every agent observes the full joint state."""
        table = np.tile(np.arange(mg.n_states), (mg.n_agents, 1))
        space = tuple(mg.joint_state(s) for s in range(mg.n_states))
        return cls(table, space, full_observability=True)
