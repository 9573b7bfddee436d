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

"""A stateless game where sharing one policy is lossy.

N agents (N even) act once in the state s. The team is paid 1 only when
the first half of the agents plays 0 and the second half plays 1. With the
whole joint state as the observation of every agent, the observations are
not permutation preserving, and a single shared policy cannot single out
the rewarding joint action.
"""
from gym_consensus.core.games import FiniteMG, JointValue, ObservationMap, build_finite_mg
from gym_consensus.core.types import TERMINAL

START = "s"
ACTIONS = (0, 1)


def rewarding_action(n_agents: int) -> tuple[int, ...]:
    """The only joint action paying 1."""
    half = n_agents // 2
    return (0,) * half + (1,) * half


def make_kuba(n_agents: int = 2, discount: float = 0.95) -> tuple[FiniteMG, ObservationMap]:
    """
    Build the game with identity observations.

    :param n_agents: an even number of agents.
    :param discount: the discount factor.
    :return: the game and the observation map.
    """
    if n_agents < 2 or n_agents % 2 != 0:
        raise ValueError(f"The number of agents must be even and positive, got {n_agents}")
    target = rewarding_action(n_agents)
    end = (TERMINAL,) * n_agents

    def reward(state: JointValue, action: JointValue) -> list[float]:
        return [1.0 if tuple(action) == target else 0.0] * n_agents

    mg = build_finite_mg(
        [(START, TERMINAL)] * n_agents,
        [ACTIONS] * n_agents,
        lambda s, a: {end: 1.0},
        reward,
        {(START,) * n_agents: 1.0},
        discount,
        name=f"kuba{n_agents}",
    )
    return mg, ObservationMap.identity(mg)
