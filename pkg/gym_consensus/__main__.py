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

"""Command-line interface of gym-consensus."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence, cast

import numpy as np

from gym_consensus.algorithms.consensus import (
    ConsensusProcess,
    ScheduleKind,
    StepSchedule,
    validate_assumptions,
)
from gym_consensus.algorithms.exact_eval import DEFAULT_POLICY_BUDGET, compare_policy_classes
from gym_consensus.core.configurations import CONSENSUS_KINDS, SCHEDULERS
from gym_consensus.core.game_files import load_game
from gym_consensus.core.homogeneity import (
    DEFAULT_BUDGET,
    check_homogeneous,
    check_observation_identity,
)
from gym_consensus.envs import FINITE_GAMES, FiniteGame, build
from gym_consensus.harness.config import ExperimentConfig, parse_override
from gym_consensus.harness.metrics import read_run, summarize
from gym_consensus.harness.presets import PRESETS, run_preset
from gym_consensus.harness.runners import run_experiment

LOG_FORMAT = "%(asctime)s [%(levelname)8s] %(message)s"


def _game(name: str, params: Sequence[str], n_agents: Optional[int] = None) -> FiniteGame:
    if name.endswith(".toml") or Path(name).is_file():
        if params or n_agents is not None:
            raise ValueError("Game files take no parameters")
        return FiniteGame(*load_game(name))
    if name not in FINITE_GAMES:
        raise ValueError(f"Unknown game {name!r}; choose from {list(FINITE_GAMES)} or a file")
    values = dict(parse_override(p) for p in params)
    if n_agents is not None:
        values["n_agents"] = n_agents
    return cast(FiniteGame, build(name, **values))


def _print(document: Any, report: Optional[str] = None):
    text = json.dumps(document, indent=2, default=str)
    print(text)
    if report:
        Path(report).write_text(text + "\n", encoding="utf-8")


def cmd_verify(args) -> int:
    """Check the homogeneity conditions of a finite game."""
    game = _game(args.game, args.param, args.n)
    report = check_homogeneous(game.mg, game.obs, args.perms, args.budget)
    document = report.to_dict()
    if report.homogeneous:
        identity = check_observation_identity(game.mg, game.obs, args.budget)
        document["observation_identity"] = {
            "passed": identity.passed,
            "witnesses": identity.witnesses,
        }
    _print(document, args.report)
    return 0 if report.homogeneous else 1


def cmd_verify_theorem1(args) -> int:
    """Optima of the three policy classes of a finite game."""
    game = _game(args.game, args.param, args.n)
    comparison = compare_policy_classes(game.mg, game.obs, args.budget)
    _print(comparison.to_dict(), args.report)
    return 0


def cmd_validate_assumptions(args) -> int:
    """Check the consensus, step-size and feature assumptions."""
    kind = ScheduleKind(args.schedule)
    schedules = (
        StepSchedule(kind, args.critic_exponent),
        StepSchedule(kind, args.actor_exponent),
    )
    features = np.load(args.features) if args.features else None
    report = validate_assumptions(
        ConsensusProcess(args.consensus, args.n), schedules, features, args.samples, args.seed
    )
    _print(report.to_dict())
    return 0 if report.passed else 1


def _experiment(args, algorithm: str, **overrides: Any) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig(
        algorithm=algorithm, env="particle-nav" if algorithm == "deep_ac" else "cosine-toy"
    )
    values = {k: v for k, v in overrides.items() if v is not None}
    values.update(parse_override(text) for text in args.set)
    if args.seeds is not None:
        values["seeds"] = list(range(args.seeds))
    if args.out is not None:
        values["out_dir"] = args.out
    return config.with_overrides(values)


def _run(config: ExperimentConfig, workers: int) -> int:
    result = run_experiment(config, workers=workers)
    _print({"run_dir": str(result.path), "failed_seeds": sorted(result.failures)})
    return 0 if result.passed else 1


def cmd_train_linear(args) -> int:
    """Train the linear consensus actor-critic."""
    config = _experiment(args, "linear_ac", env=args.env)
    if args.n is not None:
        config = config.with_overrides({"env_params": {**config.env_params, "n_agents": args.n}})
    return _run(config, args.workers)


def cmd_train_deep(args) -> int:
    """Train the communication-efficient actor-critic."""
    config = _experiment(
        args,
        "deep_ac",
        **{"nav.n_agents": args.n, "gate.rate": args.eta, "deep.scheduler": args.scheduler},
    )
    return _run(config, args.workers)


def cmd_run_preset(args) -> int:
    """Run a preset; the exit code reports its checks."""
    result = run_preset(args.name, args.out, args.quick, args.workers)
    _print(result.to_dict())
    return 0 if result.passed else 1


def cmd_summarize(args) -> int:
    """Medians and bootstrap intervals of a run directory."""
    frames = read_run(args.run_dir, args.suffix)
    if not frames:
        raise ValueError(f"No seed files in {args.run_dir}")
    _print(summarize(frames, args.column, args.points))
    return 0


def _common_training(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="TOML experiment file.")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Override a value."
    )
    parser.add_argument("--seeds", type=int, help="Run seeds 0..SEEDS-1.")
    parser.add_argument("--out", help="Parent directory of the run.")
    parser.add_argument("--workers", type=int, default=1, help="Parallel processes.")
    parser.add_argument("--n", type=int, help="Number of agents.")


def parse_arguments(argv: Optional[Sequence[str]] = None):
    """Parse the CLI arguments."""
    parser = argparse.ArgumentParser("gym-consensus")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, handler, budget in (
        ("verify", cmd_verify, DEFAULT_BUDGET),
        ("verify-theorem1", cmd_verify_theorem1, DEFAULT_POLICY_BUDGET),
    ):
        sub = commands.add_parser(name, help=handler.__doc__)
        sub.add_argument("game", help="A bundled game name or a TOML game file.")
        sub.add_argument(
            "--param", action="append", default=[], metavar="KEY=VALUE", help="Game parameter."
        )
        sub.add_argument("--budget", type=int, default=budget, help="Enumeration budget.")
        sub.add_argument("--n", type=int, help="Number of agents of a bundled game.")
        sub.add_argument("--report", metavar="PATH", help="Also write the JSON report here.")
        if name == "verify":
            sub.add_argument("--perms", choices=["transpositions", "all"], default="transpositions")
        sub.set_defaults(handler=handler)

    sub = commands.add_parser("validate-assumptions", help=cmd_validate_assumptions.__doc__)
    sub.add_argument("--consensus", choices=CONSENSUS_KINDS, default="uniform")
    sub.add_argument("--n", type=int, default=3, help="Number of agents.")
    sub.add_argument("--schedule", choices=[k.value for k in ScheduleKind], default="power")
    sub.add_argument("--critic-exponent", type=float, default=0.65)
    sub.add_argument("--actor-exponent", type=float, default=0.85)
    sub.add_argument("--features", help="A .npy feature matrix.")
    sub.add_argument("--samples", type=int, default=10_000)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(handler=cmd_validate_assumptions)

    sub = commands.add_parser("train-linear", help=cmd_train_linear.__doc__)
    _common_training(sub)
    sub.add_argument("--env", help="Environment name.")
    sub.set_defaults(handler=cmd_train_linear)

    sub = commands.add_parser("train-deep", help=cmd_train_deep.__doc__)
    _common_training(sub)
    sub.add_argument("--env", choices=["particle-nav"], default="particle-nav")
    sub.add_argument("--eta", type=float, help="Target gate open rate.")
    sub.add_argument("--scheduler", choices=SCHEDULERS, help="Consensus scheduler.")
    sub.set_defaults(handler=cmd_train_deep)

    sub = commands.add_parser("run-preset", help=cmd_run_preset.__doc__)
    sub.add_argument("name", choices=list(PRESETS))
    sub.add_argument("--out", default="runs")
    sub.add_argument("--quick", action="store_true", help="Shrink every budget.")
    sub.add_argument("--workers", type=int, default=1)
    sub.set_defaults(handler=cmd_run_preset)

    sub = commands.add_parser("summarize", help=cmd_summarize.__doc__)
    sub.add_argument("run_dir")
    sub.add_argument("--column", default="J")
    sub.add_argument("--suffix", default="", help='"_eval" for deep evaluations.')
    sub.add_argument("--points", type=int, default=5, help="Final points per seed.")
    sub.set_defaults(handler=cmd_summarize)

    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI."""
    args = parse_arguments(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        return args.handler(args)
    except (ValueError, OSError) as e:
        logging.getLogger(__name__).error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
