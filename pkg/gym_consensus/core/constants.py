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

"""Constants of the package."""

EPISODE_LENGTH = 25
DISCOUNT = 0.95

# Convergence assumptions, by number.
ASSUMPTION_NAMES = {
    1: "Markov game (finite, bounded rewards, irreducible chains)",
    2: "critic features (bounded, full column rank)",
    3: "stepsizes (two timescales)",
    4: "consensus matrices (row-stochastic, mean column-stochastic, contraction)",
    5: "stability of the critic iterates",
}

# Navigation physics.
NAV_DT = 0.1
NAV_MAX_SPEED = 1.0
NAV_COLLISION_RADIUS = 0.1
NAV_COLLISION_PENALTY = -1.0
NAV_BOX = 1.0

# Bi-level bandit.
BANDIT_WINDOW = 10
BANDIT_LEARNING_RATE = 0.1
BANDIT_EXPLORATION = 0.1
SHAPING_STD_FLOOR = 1e-8

SOFT_UPDATE_RATE = 0.01
DIVERGENCE_THRESHOLD = 1e6
