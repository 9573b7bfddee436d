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

"""The illustrative triangle game.

Three agents stand at the corners L, M, R of a triangle, each behind a shape
(up or down triangle), and all move at once. The shared reward is 1 when:

- the number of up triangles is even, and agents behind up triangles go up
  while agents behind down triangles go down; or
- the number of up triangles is odd, and the choice is reversed.

Every agent observes its own corner and the three shapes read clockwise,
starting from its own.
"""
import itertools
from typing import Hashable, Sequence

from gym_consensus.core.games import FiniteMG, JointValue, ObservationMap, build_finite_mg
from gym_consensus.core.types import TERMINAL

POSITIONS = ("L", "M", "R")
UP_SHAPE = "△"
DOWN_SHAPE = "▽"
SHAPES = (UP_SHAPE, DOWN_SHAPE)
UP = "↑"
DOWN = "↓"
ACTIONS = (UP, DOWN)

LOCAL_STATES: tuple[Hashable, ...] = tuple(
    (p, s) for p in POSITIONS for s in SHAPES
) + (TERMINAL,)


def triangle_reward(shapes: Sequence[str], actions: Sequence[str]) -> int:
    """
    Reward of the triangle game.

    >>> triangle_reward(("△", "▽", "△"), ("↑", "↓", "↑"))
    1
    >>> triangle_reward(("△", "▽", "▽"), ("↑", "↑", "↑"))
    0

    :param shapes: the shape behind each agent.
    :param actions: the action of each agent.
    :return: 1 or 0.
    """
    if len(shapes) != len(actions):
        raise ValueError("Need one action per shape")
    even = sum(1 for s in shapes if s == UP_SHAPE) % 2 == 0
    for shape, action in zip(shapes, actions):
        goes_up = action == UP
        wants_up = (shape == UP_SHAPE) == even
        if goes_up != wants_up:
            return 0
    return 1


def _is_valid(state: JointValue) -> bool:
    if TERMINAL in state:
        return False
    return sorted(p for p, _ in state) == sorted(POSITIONS)  # type: ignore


def clockwise_shapes(state: JointValue, start: str) -> str:
    """Shapes read clockwise (L, M, R, L, ...) from a given corner."""
    shape_at = {p: s for p, s in state}  # type: ignore
    k = POSITIONS.index(start)
    return "".join(shape_at[POSITIONS[(k + d) % 3]] for d in range(3))


def observe(state: JointValue, agent: int) -> Hashable:
    """Observation of an agent: its corner and the shapes read clockwise.

    States that cannot be reached (two agents on one corner, or terminal)
    get the observation (own local state, sorted local states).
    """
    own = state[agent]
    if not _is_valid(state):
        return ("*", own, tuple(sorted(state, key=repr)))
    position = own[0]  # type: ignore
    return (position, clockwise_shapes(state, position))


def make_triangle(discount: float = 0.95) -> tuple[FiniteMG, ObservationMap]:
    """Build the triangle game and its observation map."""
    valid = [
        tuple(zip(positions, shapes))
        for positions in itertools.permutations(POSITIONS)
        for shapes in itertools.product(SHAPES, repeat=3)
    ]
    initial = {state: 1.0 / len(valid) for state in valid}
    end = (TERMINAL,) * 3

    def reward(state: JointValue, action: JointValue) -> list[float]:
        if not _is_valid(state):
            return [0.0] * 3
        r = float(triangle_reward([s for _, s in state], action))  # type: ignore
        return [r] * 3

    mg = build_finite_mg(
        [LOCAL_STATES] * 3,
        [ACTIONS] * 3,
        lambda s, a: {end: 1.0},
        reward,
        initial,
        discount,
        name="triangle",
    )
    obs = ObservationMap.from_functions(
        mg, [lambda s, i=i: observe(s, i) for i in range(3)]
    )
    return mg, obs
