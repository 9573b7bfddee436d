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

"""Multi-seed runs of the trainers.

A run directory holds the resolved `config.toml`, the package version in
`version.txt`, and one `seed<k>.csv` per seed. Deep runs add
`seed<k>_eval.csv` and the saved parameters under `seed<k>/`.
"""
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import pandas as pd

import gym_consensus
from gym_consensus.algorithms.deep_ac import train_deep
from gym_consensus.algorithms.linear_ac import (
    METRIC_COLUMNS,
    FiniteGameEnvironment,
    LinearEnvironment,
    train,
)
from gym_consensus.envs import FiniteGame, build
from gym_consensus.harness.config import ExperimentConfig
from gym_consensus.harness.metrics import emit_csv

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.toml"
VERSION_FILE = "version.txt"


def prepare_run_directory(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Create a run directory recording the resolved config and the code version."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    config.save(path / CONFIG_FILE)
    (path / VERSION_FILE).write_text(gym_consensus.__version__ + "\n", encoding="utf-8")
    return path


def linear_environment(config: ExperimentConfig) -> LinearEnvironment:
    """The environment of a linear run."""
    env = build(config.env, **config.env_params)
    if isinstance(env, FiniteGame):
        return FiniteGameEnvironment(env.mg, env.obs)
    if config.env != "cosine-toy":
        raise ValueError(f"The linear trainer cannot run on {config.env!r}")
    return env  # type: ignore


def run_seed(config: ExperimentConfig, seed: int, run_dir: Union[str, Path]) -> Path:
    """Train with one seed and write its CSV files."""
    run_dir = Path(run_dir)
    logger.info("%s: seed %d", config.name, seed)
    if config.algorithm == "linear_ac":
        result = train(linear_environment(config), config.linear, seed)
        return emit_csv(result.frame, run_dir / f"seed{seed}.csv", METRIC_COLUMNS)
    deep = train_deep(
        config.deep, config.nav, config.gate, config.bandit, seed, run_dir / f"seed{seed}"
    )
    emit_csv(deep.evaluations, run_dir / f"seed{seed}_eval.csv")
    return emit_csv(deep.frame, run_dir / f"seed{seed}.csv")


def _run_seed_safely(
    config: ExperimentConfig, seed: int, run_dir: str
) -> tuple[int, Optional[str]]:
    try:
        run_seed(config, seed, run_dir)
    except Exception:
        return seed, traceback.format_exc()
    return seed, None


@dataclass
class RunResult:
    """Outcome of a multi-seed run."""

    path: Path
    config: ExperimentConfig
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True iff every seed finished."""
        return not self.failures

    def frames(self, suffix: str = "") -> dict[int, pd.DataFrame]:
        """The per-seed CSV files of the finished seeds."""
        return {
            seed: pd.read_csv(self.path / f"seed{seed}{suffix}.csv")
            for seed in self.config.seeds
            if seed not in self.failures
        }


def run_experiment(
    config: ExperimentConfig,
    path: Optional[Union[str, Path]] = None,
    workers: int = 1,
) -> RunResult:
    """
    Run every seed of an experiment, in parallel processes if workers > 1.

    :param config: the experiment.
    :param path: the run directory; `<out_dir>/<name>` if None.
    :param workers: the number of processes.
    :return: the run directory and the failed seeds with their traceback.
    """
    run_dir = prepare_run_directory(
        config, path if path is not None else Path(config.out_dir) / config.name
    )
    if workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(
                    _run_seed_safely,
                    [config] * len(config.seeds),
                    config.seeds,
                    [str(run_dir)] * len(config.seeds),
                )
            )
    else:
        outcomes = [_run_seed_safely(config, seed, str(run_dir)) for seed in config.seeds]
    failures = {seed: error for seed, error in outcomes if error is not None}
    for seed, error in failures.items():
        logger.error("%s: seed %d failed\n%s", config.name, seed, error)
    return RunResult(run_dir, config, failures)
