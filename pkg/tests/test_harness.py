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

"""Tests for the experiment files, the metrics and the multi-seed runs."""
import json

import pandas as pd
import pytest

import gym_consensus
from gym_consensus.core.configurations import LinearACConfiguration
from gym_consensus.harness.config import ExperimentConfig, parse_override
from gym_consensus.harness.metrics import (
    MetricsRecorder,
    confidence_interval,
    emit_csv,
    final_value,
    read_run,
    summarize,
)
from gym_consensus.harness.presets import SUMMARY_FILE, run_preset
from gym_consensus.harness.runners import CONFIG_FILE, VERSION_FILE, run_experiment


def _tiny_linear(**kwargs) -> ExperimentConfig:
    return ExperimentConfig(
        name="tiny",
        env="cosine-toy",
        env_params={"n_agents": 2, "one_step": True},
        seeds=(0, 1),
        linear=LinearACConfiguration(steps=60, eval_every=20),
        **kwargs,
    )


def test_config_round_trip(tmp_path):
    """A saved experiment loads back equal."""
    config = _tiny_linear()
    config.save(tmp_path / "experiment.toml")
    assert ExperimentConfig.load(tmp_path / "experiment.toml") == config
    assert ExperimentConfig.loads(config.dumps()) == config


def test_config_defaults_and_errors():
    """Missing sections take their defaults; unknown values are refused."""
    config = ExperimentConfig.loads('name = "x"\nseeds = [3]\n[linear]\nsteps = 7\n')
    assert config.seeds == (3,)
    assert config.linear.steps == 7
    assert config.deep == ExperimentConfig().deep
    with pytest.raises(ValueError):
        ExperimentConfig.loads("[linear]\nstepz = 7\n")
    with pytest.raises(ValueError):
        ExperimentConfig(env="moon")
    with pytest.raises(ValueError):
        ExperimentConfig(algorithm="deep_ac", env="cosine-toy")
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=())


def test_overrides():
    """Dotted keys replace single values."""
    config = ExperimentConfig().with_overrides(
        dict(parse_override(t) for t in ["linear.steps=10", "linear.schedule=adam", "name=o"])
    )
    assert config.linear.steps == 10
    assert config.linear.schedule == "adam"
    assert config.name == "o"
    with pytest.raises(ValueError):
        ExperimentConfig().with_overrides({"moon.steps": 1})
    with pytest.raises(ValueError):
        parse_override("linear.steps")


def test_recorder():
    """Rows keep the declared columns and a strictly increasing key."""
    recorder = MetricsRecorder(["step", "J"])
    recorder.append({"step": 0, "J": 0.1, "extra": 1})
    recorder.append({"step": 5, "J": 0.2})
    assert len(recorder) == 2
    assert recorder.to_frame().columns.tolist() == ["step", "J"]
    with pytest.raises(ValueError):
        recorder.append({"step": 4, "J": 0.3})
    with pytest.raises(ValueError):
        recorder.append({"step": 5, "J": 0.3})
    assert recorder.last_key == 5
    with pytest.raises(ValueError):
        recorder.append({"step": 6})
    with pytest.raises(ValueError):
        MetricsRecorder(["J"])


def test_empty_csv_has_a_header(tmp_path):
    """An empty table still names its columns."""
    path = emit_csv(MetricsRecorder(["step", "J"]), tmp_path / "out" / "empty.csv")
    assert path.read_text().strip() == "step,J"


def test_summaries():
    """The median of the per-seed final values, with a bootstrap interval."""
    frames = {
        s: pd.DataFrame({"J": [0.0] * 5 + [float(s)] * 5}) for s in range(5)
    }
    summary = summarize(frames, "J")
    assert summary["median"] == 2.0
    assert summary["per_seed"] == {s: float(s) for s in range(5)}
    assert summary["ci_low"] <= 2.0 <= summary["ci_high"]
    assert confidence_interval([1.0, 1.0]) == (1.0, 1.0)
    assert final_value(pd.DataFrame({"J": []}), "J") != final_value(frames[0], "J")


def test_run_directory(tmp_path):
    """A run records its config, the version and one CSV per seed."""
    result = run_experiment(_tiny_linear(), tmp_path / "tiny")
    assert result.passed
    assert (tmp_path / "tiny" / VERSION_FILE).read_text().strip() == gym_consensus.__version__
    assert ExperimentConfig.load(tmp_path / "tiny" / CONFIG_FILE) == result.config
    frames = read_run(tmp_path / "tiny")
    assert sorted(frames) == [0, 1]
    assert frames[0]["step"].tolist() == [0, 20, 40, 60]


def test_parallel_runs_are_identical(tmp_path):
    """Worker processes do not change the results."""
    serial = run_experiment(_tiny_linear(), tmp_path / "serial")
    parallel = run_experiment(_tiny_linear(), tmp_path / "parallel", workers=2)
    for seed in (0, 1):
        assert (tmp_path / "serial" / f"seed{seed}.csv").read_text() == (
            tmp_path / "parallel" / f"seed{seed}.csv"
        ).read_text()
    assert serial.frames()[1].equals(parallel.frames()[1])


def test_failed_seeds_are_reported(tmp_path):
    """A failing seed does not stop the others."""
    config = _tiny_linear().with_overrides({"env_params": {"n_agents": 0}})
    result = run_experiment(config, tmp_path / "broken")
    assert not result.passed
    assert sorted(result.failures) == [0, 1]
    assert "Traceback" in result.failures[0]


def test_exact_preset(tmp_path):
    """The exact suite passes and writes its summary."""
    result = run_preset("theorem1-suite", tmp_path)
    assert result.passed
    summary = json.loads((tmp_path / "theorem1-suite" / SUMMARY_FILE).read_text())
    assert summary["passed"]
    assert all(check["passed"] for check in summary["checks"])


def test_quick_bandit_preset(tmp_path):
    """The synthetic checks of the bandit preset pass."""
    result = run_preset("bandit-ablation", tmp_path, quick=True)
    assert result.passed
    assert len(result.checks) == 3


def test_unknown_preset(tmp_path):
    """Presets are looked up by name."""
    with pytest.raises(ValueError):
        run_preset("moon", tmp_path)
