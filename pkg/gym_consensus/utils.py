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

"""This module contains utility functions."""
from typing import Sequence

import numpy as np
from gymnasium import spaces


def encode(obs: Sequence[int], sizes: Sequence[int]) -> int:
    """
    Encode a tuple of local indices in one number.

    The first component is the least significant digit, so agent 0 moves
    fastest when joint indices are enumerated.

    >>> encode([1, 2], [2, 3])
    5

    :param obs: one index per component.
    :param sizes: the cardinality of each component.
    :return: the mixed-radix encoding.
    """
    if len(obs) != len(sizes):
        raise ValueError("Wrong input length")
    return int(np.ravel_multi_index(tuple(obs)[::-1], tuple(sizes)[::-1]))


def decode(index: int, sizes: Sequence[int]) -> list[int]:
    """
    Decode a number into a list of local indices.

    It assumes that the number has been encoded by using 'utils.encode'.

    >>> decode(5, [2, 3])
    [1, 2]

    :param index: the encoded value.
    :param sizes: the cardinality of each component.
    :return: the decoded indices.
    """
    digits = np.unravel_index(index, tuple(sizes)[::-1])
    return [int(d) for d in digits[::-1]]


def index_table(sizes: Sequence[int]) -> np.ndarray:
    """
    Enumerate every tuple of local indices in encoding order.

    Row `k` of the result is `decode(k, sizes)`.

    :param sizes: the cardinality of each component.
    :return: an integer array of shape (prod(sizes), len(sizes)).
    """
    grids = np.indices(tuple(sizes)[::-1]).reshape(len(sizes), -1)
    return np.ascontiguousarray(grids[::-1].T)


def encode_rows(table: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Vectorized 'encode' over the rows of an integer table."""
    return np.ravel_multi_index(tuple(table[:, ::-1].T), tuple(sizes)[::-1])


def combine_boxes(*boxes: spaces.Box) -> spaces.Box:
    """Combine a list of gym.Box spaces into one.

    It merges a list of unidimensional boxes to one unidimensional box by
    combining along the only dimension. Limits are kept separate.
    Output type is np.float32.
    """
    # Unidimensional spaces
    if not all(len(space.shape) == 1 for space in boxes):
        raise ValueError("Unexpected shape")

    lows = np.concatenate([space.low for space in boxes])
    highs = np.concatenate([space.high for space in boxes])

    return spaces.Box(lows, highs, dtype=np.float32)
