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

"""Define basic types.

Agents are indexed from 0. A permutation `m` acts on an ordered list `x`
by moving the i-th item to position m(i):

    (Mx)[m(i)] = x[i]

so that the transposition of agents 0 and 1 turns (a, b, c) into (b, a, c).
"""
import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

TERMINAL = "⊥"
"""Local state shared by all agents once an episode has ended."""


@dataclass(frozen=True)
class Permutation:
    """A bijection on the agent indices 0..N-1."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        """Check the mapping is a bijection."""
        mapping = tuple(int(i) for i in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"Not a permutation: {self.mapping}")
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        """Get the number of agents."""
        return len(self.mapping)

    @property
    def is_identity(self) -> bool:
        """Check whether this is the identity."""
        return all(i == j for i, j in enumerate(self.mapping))

    def __call__(self, i: int) -> int:
        """Image of agent i."""
        return self.mapping[i]

    def apply(self, x: Sequence[T]) -> tuple[T, ...]:
        """Permute an ordered list."""
        if len(x) != self.n:
            raise ValueError(f"Expected a list of length {self.n}, got {len(x)}")
        out: list = [None] * self.n
        for i, value in enumerate(x):
            out[self.mapping[i]] = value
        return tuple(out)

    def apply_array(self, x: np.ndarray, axis: int = 0) -> np.ndarray:
        """Permute a numpy array along the agent axis."""
        if x.shape[axis] != self.n:
            raise ValueError(f"Expected {self.n} entries on axis {axis}")
        return np.take(x, self.inverse().mapping, axis=axis)

    def compose(self, other: "Permutation") -> "Permutation":
        """Return self after other, so that (p.compose(q)).apply(x) == p.apply(q.apply(x))."""
        if other.n != self.n:
            raise ValueError("Permutations act on a different number of agents")
        return Permutation(tuple(self.mapping[j] for j in other.mapping))

    def inverse(self) -> "Permutation":
        """Return the inverse permutation."""
        inv = [0] * self.n
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))

    def __str__(self) -> str:
        """Cycle-free string representation."""
        return "(" + " ".join(str(j) for j in self.mapping) + ")"

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        """Identity on n agents."""
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "Permutation":
        """Swap agents i and j."""
        mapping = list(range(n))
        mapping[i], mapping[j] = mapping[j], mapping[i]
        return cls(tuple(mapping))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        """Draw a uniformly random permutation."""
        return cls(tuple(int(i) for i in rng.permutation(n)))


def apply_permutation(x: Sequence[T], m: Permutation) -> tuple[T, ...]:
    """
    Apply a permutation to an ordered list of per-agent items.

    >>> apply_permutation(("a", "b", "c"), Permutation.transposition(3, 0, 1))
    ('b', 'a', 'c')

    :param x: one item per agent.
    :param m: the permutation.
    :return: the permuted list.
    """
    return m.apply(x)


def all_permutations(n: int) -> Iterator[Permutation]:
    """Enumerate the N! permutations, identity excluded."""
    for mapping in itertools.permutations(range(n)):
        p = Permutation(mapping)
        if not p.is_identity:
            yield p


def transpositions(n: int) -> Iterator[Permutation]:
    """Enumerate the N(N-1)/2 transpositions."""
    for i, j in itertools.combinations(range(n), 2):
        yield Permutation.transposition(n, i, j)


class PermutationPolicy(Enum):
    """Which permutations a verifier enumerates."""

    TRANSPOSITIONS = "transpositions"
    ALL = "all"

    def permutations(self, n: int) -> list[Permutation]:
        """Get the permutations to check for n agents."""
        if self == PermutationPolicy.ALL:
            return list(all_permutations(n))
        return list(transpositions(n))
