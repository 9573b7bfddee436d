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

"""Cooperative navigation among particles, with a Gym interface."""
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from gymnasium import Env
from gymnasium.spaces import Box, Dict, MultiDiscrete, Tuple

from gym_consensus.core.configurations import ParticleNavConfiguration
from gym_consensus.core.states import NavigationState, make_state

TRAJECTORY_COLUMNS = ["t", "agent", "x", "y", "vx", "vy", "reward"]


class ParticleNav(Env):
    """N agents cover N landmarks in a box.

    Observations are one dictionary per agent with:
    - the agent's absolute position and velocity;
    - the relative positions of its k nearest agents, and their indices;
    - the relative positions of its k + 1 nearest landmarks.

    Rewards are per agent: the negative mean distance from each landmark to
    its nearest agent, minus a penalty per collision of the agent.
    """

    metadata = {"render_modes": []}

    def __init__(
        self,
        configuration: Optional[ParticleNavConfiguration] = None,
        *args,
        **kwargs,
    ):
        """
        Initialize the environment.

        :param configuration: the configuration object; built from the other
            arguments if None.
        """
        self.configuration = (
            configuration
            if configuration is not None
            else ParticleNavConfiguration(*args, **kwargs)
        )
        self.rng = np.random.default_rng()
        self.state: NavigationState = make_state(self.configuration, self.rng)
        self.action_space = self.configuration.action_space
        self.trajectory: list[dict[str, Any]] = []

        config = self.configuration
        k = config.visible_neighbors
        span = 2.0 * config.box
        self.observation_space = Tuple(
            [
                Dict(
                    {
                        "position": Box(-config.box, config.box, shape=(2,)),
                        "velocity": Box(-config.max_speed, config.max_speed, shape=(2,)),
                        "neighbors": Box(-span, span, shape=(k, 2)),
                        "neighbor_ids": MultiDiscrete([config.n_agents] * k),
                        "landmarks": Box(-span, span, shape=(config.visible_landmarks, 2)),
                    }
                )
                for _ in range(config.n_agents)
            ]
        )

    @property
    def n_agents(self) -> int:
        """Get the number of agents."""
        return self.configuration.n_agents

    def reset(self, *, seed=None, options=None):
        """Reset the environment."""
        super().reset(seed=seed)
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = make_state(self.configuration, self.rng)
        self.trajectory = []
        self._log(np.zeros(self.n_agents))
        return self.observe(self.state), {}

    def step(self, action):
        """Move all agents at once."""
        rewards = self.state.step(np.asarray(action, dtype=float).reshape(self.n_agents, 2))
        self._log(rewards)
        truncated = self.state.is_finished
        info = {"collisions": self.state.collisions()}
        return self.observe(self.state), rewards, False, truncated, info

    def observe(self, state: NavigationState) -> tuple[dict[str, Any], ...]:
        """Observe the state."""
        return state.to_dict()

    def _log(self, rewards: np.ndarray):
        for i in range(self.n_agents):
            x, y = self.state.positions[i]
            vx, vy = self.state.velocities[i]
            self.trajectory.append(
                {
                    "t": self.state.t,
                    "agent": i,
                    "x": x,
                    "y": y,
                    "vx": vx,
                    "vy": vy,
                    "reward": float(rewards[i]),
                }
            )

    def trajectory_frame(self) -> pd.DataFrame:
        """The positions, velocities and rewards since the last reset."""
        return pd.DataFrame(self.trajectory, columns=TRAJECTORY_COLUMNS)

    def export_trajectory(self, path: Union[str, Path]):
        """Write the trajectory since the last reset as CSV."""
        self.trajectory_frame().to_csv(path, index=False)
