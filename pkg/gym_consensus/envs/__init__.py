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

"""Bundled environments, registered by name."""
from typing import Any, NamedTuple, Union

from gym_consensus.core.configurations import ParticleNavConfiguration
from gym_consensus.core.game_files import load_bundled_game
from gym_consensus.core.games import FiniteMG, ObservationMap
from gym_consensus.envs.cosine import CosineToyMG
from gym_consensus.envs.kuba import make_kuba
from gym_consensus.envs.particle_nav import ParticleNav
from gym_consensus.envs.triangle import make_triangle


class FiniteGame(NamedTuple):
    """A finite game and the observations of its agents."""

    mg: FiniteMG
    obs: ObservationMap


FINITE_GAMES = ("triangle", "kuba", "cosine", "kuba2", "swap2")
ENVIRONMENTS = FINITE_GAMES + ("cosine-toy", "particle-nav")


def _finite(name: str, params: dict[str, Any]) -> FiniteGame:
    if name == "triangle":
        return FiniteGame(*make_triangle(**params))
    if name == "kuba":
        return FiniteGame(*make_kuba(**params))
    if name == "cosine":
        params.setdefault("one_step", True)
        return FiniteGame(*CosineToyMG(**params).to_finite_mg())
    if params:
        raise ValueError(f"The bundled game {name!r} takes no parameters")
    return FiniteGame(*load_bundled_game(name))


def build(name: str, **params: Any) -> Union[FiniteGame, CosineToyMG, ParticleNav]:
    """
    Build an environment by name.

    - "triangle", "kuba", "cosine", "kuba2", "swap2": a FiniteGame; "cosine"
      is the tabulated cosine game, one-step unless `one_step=False`;
    - "cosine-toy": the cosine game for the linear trainer, any N;
    - "particle-nav": the navigation game.

    :param name: the environment name.
    :param params: keyword parameters of the environment.
    :return: the environment.
    :raises ValueError: for unknown names or invalid parameters.
    """
    try:
        if name in FINITE_GAMES:
            return _finite(name, dict(params))
        if name == "cosine-toy":
            return CosineToyMG(**params)
        if name == "particle-nav":
            return ParticleNav(ParticleNavConfiguration(**params))
    except TypeError as e:
        raise ValueError(f"Invalid parameters for {name!r}: {e}") from e
    raise ValueError(f"Unknown environment {name!r}; choose from {list(ENVIRONMENTS)}")


__all__ = ["CosineToyMG", "FiniteGame", "ParticleNav", "build"]
