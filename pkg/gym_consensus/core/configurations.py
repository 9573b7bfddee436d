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

"""Classes for the configurations.

Configurations are frozen dataclasses made of plain values (numbers, strings,
tuples), so that they serialize losslessly to TOML.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from gymnasium.spaces import Box, Tuple

from gym_consensus.core import constants


def _check_choice(name: str, value: str, choices: Sequence[str]):
    if value not in choices:
        raise ValueError(f"{name} must be one of {list(choices)}, got {value!r}")


@dataclass(frozen=True)
class ParticleNavConfiguration:
    """Configuration of the navigation game.

    Agents are double integrators in the box [-box, box]^2; actions are 2D
    accelerations clipped to max_acceleration. `speed_scales`, when given,
    multiplies each agent's acceleration and breaks the symmetry among agents.
    """

    n_agents: int = 6
    n_neighbors: int = 3
    episode_length: int = constants.EPISODE_LENGTH
    dt: float = constants.NAV_DT
    max_speed: float = constants.NAV_MAX_SPEED
    max_acceleration: float = 1.0
    box: float = constants.NAV_BOX
    collision_radius: float = constants.NAV_COLLISION_RADIUS
    collision_penalty: float = constants.NAV_COLLISION_PENALTY
    speed_scales: tuple[float, ...] = ()

    def __post_init__(self):
        """Validate."""
        if self.n_agents < 2:
            raise ValueError("At least two agents are needed.")
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be positive.")
        if self.episode_length < 1 or self.dt <= 0.0 or self.box <= 0.0:
            raise ValueError("Invalid episode length, time step or box size.")
        object.__setattr__(self, "speed_scales", tuple(float(s) for s in self.speed_scales))
        if self.speed_scales and len(self.speed_scales) != self.n_agents:
            raise ValueError("speed_scales needs one entry per agent.")

    @property
    def visible_neighbors(self) -> int:
        """Get the number of neighbours each agent sees: min(k, N - 1)."""
        return min(self.n_neighbors, self.n_agents - 1)

    @property
    def visible_landmarks(self) -> int:
        """Get the number of landmarks each agent sees: min(k + 1, N)."""
        return min(self.n_neighbors + 1, self.n_agents)

    @property
    def scales(self) -> np.ndarray:
        """Per-agent acceleration scales."""
        if not self.speed_scales:
            return np.ones(self.n_agents)
        return np.array(self.speed_scales)

    @property
    def is_homogeneous(self) -> bool:
        """Check whether all agents share the same dynamics."""
        return bool(np.all(self.scales == self.scales[0]))

    @property
    def action_space(self) -> Tuple:
        """Get the action space of the agents."""
        a = self.max_acceleration
        return Tuple([Box(-a, a, shape=(2,)) for _ in range(self.n_agents)])


@dataclass(frozen=True)
class GateConfig:
    """Observation-action communication gate.

    :param rate: the target fraction η of open gates.
    :param alpha: weight of the rate regularizer.
    :param temperature: Gumbel-Softmax temperature.
    :param literal_regularizer: average open probabilities over the selected
        neighbours only, instead of over all neighbours.
    """

    rate: float = 0.5
    alpha: float = 200.0
    temperature: float = 1.0
    literal_regularizer: bool = False

    def __post_init__(self):
        """Validate."""
        if not 0.0 < self.rate < 1.0:
            raise ValueError("The gate rate must lie in (0, 1).")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative.")
        if self.temperature <= 0.0:
            raise ValueError("The temperature must be positive.")


CONSENSUS_KINDS = ("uniform", "gossip", "off")
SCHEDULE_KINDS = ("power", "constant", "adam")
TRAINING_MODES = ("sampled", "expected")


@dataclass(frozen=True)
class LinearACConfiguration:
    """Configuration of the linear actor-critic trainer."""

    steps: int = 50_000
    eval_every: int = 1000
    critic_consensus: str = "uniform"
    actor_consensus: str = "uniform"
    schedule: str = "power"
    critic_exponent: float = 0.65
    actor_exponent: float = 0.85
    critic_scale: float = 1.0
    actor_scale: float = 1.0
    learning_rate: float = 0.01
    mode: str = "sampled"
    train_actor: bool = True
    tail_fraction: float = 0.5
    divergence_threshold: float = constants.DIVERGENCE_THRESHOLD

    def __post_init__(self):
        """Validate."""
        _check_choice("critic_consensus", self.critic_consensus, CONSENSUS_KINDS)
        _check_choice("actor_consensus", self.actor_consensus, CONSENSUS_KINDS)
        _check_choice("schedule", self.schedule, SCHEDULE_KINDS)
        _check_choice("mode", self.mode, TRAINING_MODES)
        if self.steps < 1 or self.eval_every < 1:
            raise ValueError("steps and eval_every must be positive.")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must lie in (0, 1].")


GATE_MODES = ("learned", "all", "none")
SCHEDULERS = ("bandit", "random", "rule", "full", "none")


@dataclass(frozen=True)
class BanditConfiguration:
    """Configuration of the bi-level consensus bandit."""

    window: int = constants.BANDIT_WINDOW
    learning_rate: float = constants.BANDIT_LEARNING_RATE
    exploration: float = constants.BANDIT_EXPLORATION

    def __post_init__(self):
        """Validate."""
        if self.window < 2:
            raise ValueError("The window must hold at least two returns.")
        if not 0.0 < self.exploration <= 1.0:
            raise ValueError("exploration must lie in (0, 1].")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive.")


@dataclass(frozen=True)
class DeepACConfiguration:
    """Configuration of the communication-efficient actor-critic."""

    episodes: int = 2000
    hidden: int = 32
    batch_size: int = 256
    memory_capacity: int = 100_000
    discount: float = constants.DISCOUNT
    gate_learning_rate: float = 0.001
    critic_learning_rate: float = 0.01
    actor_learning_rate: float = 0.01
    soft_update: float = constants.SOFT_UPDATE_RATE
    exploration_noise: float = 0.1
    noise_decay: float = 0.999
    min_noise: float = 0.01
    updates_per_episode: int = 5
    gate_mode: str = "learned"
    scheduler: str = "bandit"
    scheduler_frequency: float = 0.1
    actor_consensus: bool = True
    pooling: str = "mean"
    eval_every: int = 100
    eval_episodes: int = 10

    def __post_init__(self):
        """Validate."""
        _check_choice("gate_mode", self.gate_mode, GATE_MODES)
        _check_choice("scheduler", self.scheduler, SCHEDULERS)
        _check_choice("pooling", self.pooling, ("mean", "max"))
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1).")
        if not 0.0 < self.soft_update <= 1.0:
            raise ValueError("soft_update must lie in (0, 1].")
        if not 0.0 <= self.scheduler_frequency <= 1.0:
            raise ValueError("scheduler_frequency must lie in [0, 1].")
        if self.batch_size < 1 or self.hidden < 1 or self.episodes < 1:
            raise ValueError("batch_size, hidden and episodes must be positive.")
        if self.pooling == "max" and self.gate_mode == "learned":
            raise ValueError("A learned gate needs mean pooling to receive gradients.")
