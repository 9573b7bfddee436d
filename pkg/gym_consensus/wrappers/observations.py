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

"""Flat observation vectors for the navigation environment.

ParticleNav observes one dictionary per agent. A feature class picks some
of its entries and flattens them into a float32 vector.
"""

from abc import ABC, abstractmethod
from typing import Any, Sequence, Type, cast

import numpy as np
from gymnasium import ObservationWrapper, Space, spaces

from gym_consensus import utils
from gym_consensus.envs.particle_nav import ParticleNav

DictObs = dict[str, Any]


class Features(ABC):
    """Maps the dictionary observation of one agent to a vector."""

    def __init__(self, dict_space: spaces.Dict):
        """Initialize from the dictionary space of one agent."""
        self.dict_space = dict_space
        self.observation_space = self.compute_space()

    @abstractmethod
    def compute_space(self) -> Space:
        """The flat box of the selected entries."""

    @abstractmethod
    def compute_observation(self, observation: DictObs) -> Any:
        """Concatenate the selected entries."""


class UseFeatures(ObservationWrapper):
    """Apply one feature class per agent."""

    def __init__(self, env: ParticleNav, features: Sequence[Type[Features]]):
        """Initialize.

        :param features: one feature class for each agent.
        """
        if len(features) != env.configuration.n_agents:
            raise ValueError(
                f"Wrong number of features: expected {env.configuration.n_agents}"
            )

        super().__init__(env)
        dict_spaces = cast(spaces.Tuple, env.observation_space)
        self.features = [
            feature(cast(spaces.Dict, dict_spaces[i])) for i, feature in enumerate(features)
        ]
        self.observation_space = spaces.Tuple([f.observation_space for f in self.features])

    def observation(self, observation):
        """One feature vector per agent."""
        if len(observation) != len(self.features):
            raise RuntimeError(
                f"Got {len(observation)} observations for {len(self.features)} agents"
            )
        return [f.compute_observation(o) for f, o in zip(self.features, observation)]


def _flat_box(space: spaces.Box) -> spaces.Box:
    return spaces.Box(space.low.reshape(-1), space.high.reshape(-1), dtype=np.float32)


class NavigationFeatures(Features):
    """Own position and velocity, then relative neighbour and landmark positions."""

    def compute_space(self) -> spaces.Box:
        """The flat box of the selected entries."""
        return utils.combine_boxes(
            *(
                _flat_box(cast(spaces.Box, self.dict_space.spaces[key]))
                for key in ("position", "velocity", "neighbors", "landmarks")
            )
        )

    def compute_observation(self, observation: DictObs):
        """Concatenate the selected entries."""
        return np.concatenate(
            [
                np.reshape(observation[key], [-1])
                for key in ("position", "velocity", "neighbors", "landmarks")
            ],
            dtype=np.float32,
        )


class RelativeFeatures(Features):
    """Velocity and relative positions only: unchanged by translations."""

    def compute_space(self) -> spaces.Box:
        """The flat box of the selected entries."""
        return utils.combine_boxes(
            *(
                _flat_box(cast(spaces.Box, self.dict_space.spaces[key]))
                for key in ("velocity", "neighbors", "landmarks")
            )
        )

    def compute_observation(self, observation: DictObs):
        """Concatenate the selected entries."""
        return np.concatenate(
            [
                np.reshape(observation[key], [-1])
                for key in ("velocity", "neighbors", "landmarks")
            ],
            dtype=np.float32,
        )
