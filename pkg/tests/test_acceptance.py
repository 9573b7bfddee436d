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

"""Full-budget experiments; run with --runslow."""
import pytest

from gym_consensus.harness.presets import run_preset


@pytest.mark.slow
@pytest.mark.parametrize(
    "preset", ["linear-convergence", "toy-consensus-ablation", "bandit-ablation"]
)
def test_linear_and_bandit_presets(tmp_path, preset):
    """Every check of the preset passes."""
    result = run_preset(preset, tmp_path, workers=4)
    failed = [c.name for c in result.checks if not c.passed]
    assert result.passed, failed


@pytest.mark.slow
@pytest.mark.parametrize("preset", ["nav-baselines", "eta-sweep"])
def test_navigation_presets(tmp_path, preset):
    """Every check of the preset passes."""
    result = run_preset(preset, tmp_path, workers=4)
    failed = [c.name for c in result.checks if not c.passed]
    assert result.passed, failed


@pytest.mark.parametrize("preset", ["linear-convergence", "toy-consensus-ablation", "eta-sweep"])
def test_quick_presets_finish(tmp_path, preset):
    """Shrunk presets finish every run and write their summary."""
    result = run_preset(preset, tmp_path, quick=True)
    assert not result.failures
    assert result.checks
    assert (tmp_path / preset / "summary.json").is_file()
