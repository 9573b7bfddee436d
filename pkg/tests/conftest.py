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

"""Conftest module."""
import numpy as np
import pytest


def pytest_addoption(parser):
    """Add options to pytest parser."""
    parser.addoption("--ci", action="store_true", default=False, help="Run on CI.")
    parser.addoption(
        "--runslow", action="store_true", default=False, help="Run the long experiments."
    )


def pytest_configure(config):
    """Register the markers."""
    config.addinivalue_line("markers", "slow: long experiment, run with --runslow")


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless asked."""
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """A seeded random generator."""
    return np.random.default_rng(0)
