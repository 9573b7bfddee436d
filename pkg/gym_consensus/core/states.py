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

"""State of the navigation game."""
from typing import Any, Optional

import numpy as np
from scipy.spatial.distance import cdist

from gym_consensus.core.configurations import ParticleNavConfiguration
from gym_consensus.core.types import Permutation


class NavigationState:
    """Positions and velocities of the agents, and the landmark positions."""

    def __init__(
        self,
        config: ParticleNavConfiguration,
        positions: np.ndarray,
        velocities: np.ndarray,
        landmarks: np.ndarray,
    ):
        """Initialize the state."""
        n = config.n_agents
        if positions.shape != (n, 2) or velocities.shape != (n, 2):
            raise ValueError("positions and velocities must have shape (N, 2)")
        if landmarks.ndim != 2 or landmarks.shape[1] != 2:
            raise ValueError("landmarks must have shape (L, 2)")
        self.config = config
        self.positions = np.array(positions, dtype=float)
        self.velocities = np.array(velocities, dtype=float)
        self.landmarks = np.array(landmarks, dtype=float)
        self.t = 0

    @classmethod
    def random(
        cls, config: ParticleNavConfiguration, rng: np.random.Generator
    ) -> "NavigationState":
        """Sample agents and landmarks uniformly in the box, agents at rest."""
        n = config.n_agents
        positions = rng.uniform(-config.box, config.box, size=(n, 2))
        landmarks = rng.uniform(-config.box, config.box, size=(n, 2))
        return cls(config, positions, np.zeros((n, 2)), landmarks)

    def copy(self) -> "NavigationState":
        """Return a copy."""
        state = NavigationState(self.config, self.positions, self.velocities, self.landmarks)
        state.t = self.t
        return state

    def permuted(self, m: Permutation) -> "NavigationState":
        """Relabel the agents: agent i becomes agent m(i)."""
        state = NavigationState(
            self.config,
            m.apply_array(self.positions),
            m.apply_array(self.velocities),
            self.landmarks,
        )
        state.t = self.t
        return state

    @property
    def is_finished(self) -> bool:
        """Check whether the episode is over."""
        return self.t >= self.config.episode_length

    def step(self, actions: np.ndarray) -> np.ndarray:
        """
        Apply one step of double-integrator dynamics.

        :param actions: accelerations of shape (N, 2), clipped to the limits.
        :return: the per-agent rewards after the move.
        """
        actions = np.asarray(actions, dtype=float)
        if actions.shape != self.positions.shape:
            raise ValueError("Some actions are missing.")
        limit = self.config.max_acceleration
        accelerations = np.clip(actions, -limit, limit) * self.config.scales[:, None]
        velocities = self.velocities + accelerations * self.config.dt
        speeds = np.linalg.norm(velocities, axis=1, keepdims=True)
        too_fast = speeds > self.config.max_speed
        velocities = np.where(
            too_fast, velocities * self.config.max_speed / np.maximum(speeds, 1e-12), velocities
        )
        positions = self.positions + velocities * self.config.dt

        # Walls stop the orthogonal velocity component.
        box = self.config.box
        outside = np.abs(positions) > box
        positions = np.clip(positions, -box, box)
        velocities = np.where(outside, 0.0, velocities)

        self.positions, self.velocities = positions, velocities
        self.t += 1
        return self.rewards()

    def rewards(self) -> np.ndarray:
        """Coverage of the landmarks plus per-agent collision penalties."""
        to_landmarks = cdist(self.landmarks, self.positions)
        coverage = -to_landmarks.min(axis=1).mean()
        return coverage + self.config.collision_penalty * self.collisions()

    def collisions(self) -> np.ndarray:
        """Number of other agents within the collision radius, per agent."""
        distances = cdist(self.positions, self.positions)
        close = distances < self.config.collision_radius
        np.fill_diagonal(close, False)
        return close.sum(axis=1)

    def neighbor_ids(self, k: Optional[int] = None) -> np.ndarray:
        """The k nearest other agents of each agent, nearest first, ties by index."""
        k = self.config.visible_neighbors if k is None else k
        distances = cdist(self.positions, self.positions)
        np.fill_diagonal(distances, np.inf)
        return np.argsort(distances, axis=1, kind="stable")[:, :k]

    def landmark_ids(self) -> np.ndarray:
        """The k + 1 nearest landmarks of each agent, nearest first."""
        distances = cdist(self.positions, self.landmarks)
        return np.argsort(distances, axis=1, kind="stable")[:, : self.config.visible_landmarks]

    def to_dict(self) -> tuple[dict[str, Any], ...]:
        """Encode into one dictionary per agent."""
        neighbors = self.neighbor_ids()
        landmarks = self.landmark_ids()
        return tuple(
            {
                "position": self.positions[i].astype(np.float32),
                "velocity": self.velocities[i].astype(np.float32),
                "neighbors": (self.positions[neighbors[i]] - self.positions[i]).astype(
                    np.float32
                ),
                "neighbor_ids": neighbors[i].astype(np.int64),
                "landmarks": (self.landmarks[landmarks[i]] - self.positions[i]).astype(
                    np.float32
                ),
            }
            for i in range(self.config.n_agents)
        )


def make_state(
    config: ParticleNavConfiguration, rng: np.random.Generator
) -> NavigationState:
    """Make the initial state, according to the configuration."""
    return NavigationState.random(config, rng)
