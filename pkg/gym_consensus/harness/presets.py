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

"""Named multi-seed experiments with pass/fail checks.

Each preset writes its runs under `<out_dir>/<preset>/` and a
`summary.json` with one entry per check. With `quick=True` the budgets
shrink so that a preset runs in seconds; its checks are still evaluated
but are not expected to pass.
"""
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Union, cast

import numpy as np

from gym_consensus.algorithms.bandit import BiLevelBandit, Exp3, shape_rewards
from gym_consensus.algorithms.exact_eval import PolicyClass, compare_policy_classes
from gym_consensus.algorithms.linear_ac import area_under_curve, train
from gym_consensus.core.configurations import (
    BanditConfiguration,
    DeepACConfiguration,
    GateConfig,
    LinearACConfiguration,
    ParticleNavConfiguration,
)
from gym_consensus.core.homogeneity import check_homogeneous
from gym_consensus.envs import FiniteGame, build
from gym_consensus.harness.config import ExperimentConfig
from gym_consensus.harness.metrics import emit_csv, final_value, summarize
from gym_consensus.harness.runners import (
    RunResult,
    linear_environment,
    prepare_run_directory,
    run_experiment,
)

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
EXACT_TOLERANCE = 1e-9
ORACLE_TOLERANCE = 1e-2
AGREEMENT_TOLERANCE = 1e-6
TARGET_RETURN = 0.9
RATE_TOLERANCE = 0.1
MESSAGE_RATIO = 0.6
PARAMETER_RATIO = 0.2
ETAS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class Check:
    """One assertion of a preset."""

    name: str
    passed: bool
    value: Any = None
    detail: str = ""


@dataclass
class PresetResult:
    """Checks, reported values and failed runs of a preset."""

    name: str
    path: Path
    checks: list[Check] = field(default_factory=list)
    reported: dict[str, Any] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True iff every run finished and every check passed."""
        return not self.failures and all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, value: Any = None, detail: str = ""):
        """Record a check."""
        self.checks.append(Check(name, bool(passed), _jsonable(value), detail))
        logger.info("%s / %s: %s", self.name, name, "pass" if passed else "FAIL")

    def absorb(self, run: RunResult):
        """Record the failed seeds of a run."""
        for seed, error in run.failures.items():
            self.failures[f"{run.config.name}/seed{seed}"] = error

    def to_dict(self) -> dict[str, Any]:
        """Encode into a JSON-friendly dictionary."""
        return {
            "preset": self.name,
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
            "reported": _jsonable(self.reported),
            "failures": self.failures,
        }

    def write(self) -> Path:
        """Write the summary file."""
        self.path.mkdir(parents=True, exist_ok=True)
        target = self.path / SUMMARY_FILE
        target.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return target


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer, np.floating, np.bool_)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def theorem1_suite(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """Exact optima per policy class and homogeneity verdicts of the finite games."""
    result = PresetResult("theorem1-suite", out)
    equal_games = [("triangle", {}), ("cosine", {"n_agents": 2}), ("cosine", {"n_agents": 3})]
    for name, params in equal_games:
        game = cast(FiniteGame, build(name, **params))
        label = game.mg.name
        comparison = compare_policy_classes(game.mg, game.obs)
        result.reported[label] = comparison.to_dict()
        result.check(f"{label}: equal optima", comparison.equal, comparison.values)
        report = check_homogeneous(game.mg, game.obs)
        result.check(f"{label}: homogeneous", report.homogeneous, report.to_dict())

    for n in (2, 4):
        game = cast(FiniteGame, build("kuba", n_agents=n))
        comparison = compare_policy_classes(game.mg, game.obs)
        values = comparison.values
        result.reported[game.mg.name] = comparison.to_dict()
        result.check(
            f"kuba{n}: unrestricted optimum is 1",
            abs(values[PolicyClass.STATE_BASED.value] - 1.0) <= EXACT_TOLERANCE,
            values,
        )
        shared = values[PolicyClass.OBS_BASED_SHARED.value]
        result.check(
            f"kuba{n}: shared optimum is 2^-N",
            abs(shared - 2.0**-n) <= EXACT_TOLERANCE,
            shared,
        )
        report = check_homogeneous(game.mg, game.obs)
        result.check(
            f"kuba{n}: fails observation condition",
            not report.condition_iii.passed and report.condition_iii.witness is not None,
            report.to_dict(),
        )
    return result


def linear_convergence(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """Consensus critic under a fixed uniform policy against the projected fixed point."""
    result = PresetResult("linear-convergence", out)
    config = ExperimentConfig(
        name="linear-convergence",
        env="cosine-toy",
        env_params={"n_agents": 3, "one_step": True},
        seeds=tuple(range(2 if quick else 10)),
        linear=LinearACConfiguration(
            steps=5_000 if quick else 100_000,
            eval_every=500 if quick else 10_000,
            train_actor=False,
            schedule="power",
            critic_exponent=0.65,
        ),
    )
    run_dir = prepare_run_directory(config, out / config.name)
    distances, agreement = {}, {}
    for seed in config.seeds:
        run = train(linear_environment(config), config.linear, seed)
        emit_csv(run.frame, run_dir / f"seed{seed}.csv")
        distances[seed] = run.tail_oracle_distance()
        agreement[seed] = float(run.frame["omega_disagreement"].iloc[-1])
    worst = max(distances.values())
    result.check("critic reaches the fixed point", worst <= ORACLE_TOLERANCE, distances)
    result.check(
        "critics agree", max(agreement.values()) <= AGREEMENT_TOLERANCE, agreement
    )
    return result


def toy_consensus_ablation(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """Actor consensus on or off in the cosine game, with adaptive moments."""
    result = PresetResult("toy-consensus-ablation", out)
    for n in (10,) if quick else (10, 50):
        aucs = {}
        for actor_consensus in ("uniform", "off"):
            config = ExperimentConfig(
                name=f"cosine{n}-actor-{actor_consensus}",
                env="cosine-toy",
                env_params={"n_agents": n},
                seeds=tuple(range(2 if quick else 10)),
                linear=LinearACConfiguration(
                    steps=300 if quick else 5_000,
                    eval_every=50 if quick else 100,
                    schedule="adam",
                    learning_rate=0.01,
                    critic_consensus="uniform",
                    actor_consensus=actor_consensus,
                ),
            )
            run = run_experiment(config, out / config.name, workers)
            result.absorb(run)
            frames = run.frames()
            summary = summarize(frames, "J")
            result.reported[config.name] = summary
            result.check(
                f"{config.name}: final J >= {TARGET_RETURN}",
                summary["median"] >= TARGET_RETURN,
                summary["median"],
            )
            aucs[actor_consensus] = float(
                np.median([area_under_curve(f) for f in frames.values()])
            )
        result.check(
            f"cosine{n}: actor consensus does not slow learning",
            aucs["uniform"] >= aucs["off"],
            aucs,
        )
    return result


def _deep_config(
    name: str, quick: bool, seeds: int = 4, rate: float = 0.5, **deep: Any
) -> ExperimentConfig:
    if quick:
        deep = {
            "episodes": 6,
            "batch_size": 16,
            "eval_every": 3,
            "eval_episodes": 1,
            "updates_per_episode": 1,
            "hidden": 8,
            **deep,
        }
    return ExperimentConfig(
        name=name,
        env="particle-nav",
        algorithm="deep_ac",
        seeds=tuple(range(1 if quick else seeds)),
        deep=DeepACConfiguration(**deep),
        gate=GateConfig(rate=rate),
        nav=ParticleNavConfiguration(n_agents=6, n_neighbors=3),
    )


def _final_return(run: RunResult) -> float:
    return float(np.median([final_value(f, "eval_mean") for f in run.frames("_eval").values()]))


def _total(run: RunResult, column: str) -> float:
    return float(np.median([f[column].sum() for f in run.frames().values()]))


def nav_baselines(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """Ours against full communication, independent learners and random consensus."""
    result = PresetResult("nav-baselines", out)
    variants = {
        "ours": dict(gate_mode="learned", scheduler="bandit"),
        "full": dict(gate_mode="all", scheduler="full"),
        "il": dict(gate_mode="none", scheduler="none"),
        "random": dict(gate_mode="learned", scheduler="random"),
    }
    runs = {}
    for name, deep in variants.items():
        run = run_experiment(_deep_config(name, quick, **deep), out / name, workers)
        result.absorb(run)
        runs[name] = run
    if result.failures:
        return result
    final = {name: _final_return(run) for name, run in runs.items()}
    messages = {name: _total(run, "obs_msgs") for name, run in runs.items()}
    parameters = {name: _total(run, "param_msgs") for name, run in runs.items()}
    result.reported.update(final_return=final, obs_msgs=messages, param_msgs=parameters)
    result.reported["ordering_full_ours_random_il"] = bool(
        final["full"] >= final["ours"] >= final["random"] >= final["il"]
    )
    result.check("full beats independent learners", final["full"] > final["il"], final)
    result.check("ours beats independent learners", final["ours"] > final["il"], final)
    result.check(
        "ours saves observation messages",
        messages["ours"] <= MESSAGE_RATIO * messages["full"],
        messages,
    )
    result.check(
        "ours saves parameter messages",
        parameters["ours"] <= PARAMETER_RATIO * parameters["full"],
        parameters,
    )
    return result


def synthetic_low_level(
    rounds: int = 2000, seed: int = 0, means: tuple[float, ...] = (0.0, 0.0, 0.0, 1.0)
) -> tuple[float, list[float]]:
    """
    Exp3 on shaped returns of a stationary bandit.

    :return: the final probability of the best arm, and every shaped reward.
    """
    rng = np.random.default_rng(seed)
    config = BanditConfiguration()
    forecaster = Exp3(len(means), config.learning_rate, config.exploration)
    window: deque = deque(maxlen=config.window)
    rewards = []
    for _ in range(rounds):
        arm = forecaster.sample(rng)
        g = means[arm] + 0.1 * rng.normal()
        window.append(g)
        r = shape_rewards(window, (), g, "low")
        forecaster.update(arm, r)
        rewards.append(r)
    return float(forecaster.probabilities()[int(np.argmax(means))]), rewards


def synthetic_high_level(
    rounds: int = 2000, seed: int = 0, penalty: float = 1.0
) -> tuple[float, list[float]]:
    """
    A bi-level bandit whose communication lowers the return by `penalty`.

    :return: the final probability of communicating, and every shaped reward.
    """
    rng = np.random.default_rng(seed)
    bandit = BiLevelBandit(0, 2)
    rewards = []
    for _ in range(rounds):
        peer = bandit.choose(rng)
        g = (-penalty if peer is not None else 0.0) + 0.1 * rng.normal()
        r1, r2 = bandit.observe(g)
        rewards.extend([r1] if r2 is None else [r1, r2])
    return bandit.p_communicate, rewards


def bandit_ablation(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """Forecaster behaviour on synthetic returns, then the schedulers on navigation."""
    result = PresetResult("bandit-ablation", out)
    rounds = 2000
    best, low_rewards = synthetic_low_level(rounds)
    result.check("low level finds the best peer", best >= 0.5, best)
    p_communicate, high_rewards = synthetic_high_level(rounds)
    result.check("high level stops communicating", p_communicate < 0.2, p_communicate)
    shaped = np.array(low_rewards + high_rewards)
    result.check(
        "shaped rewards lie in (-1, 1)",
        bool(np.all((shaped > -1.0) & (shaped < 1.0))),
        [float(shaped.min()), float(shaped.max())],
    )
    if not quick:
        for scheduler in ("bandit", "random", "rule"):
            run = run_experiment(
                _deep_config(f"scheduler-{scheduler}", quick, scheduler=scheduler),
                out / f"scheduler-{scheduler}",
                workers,
            )
            result.absorb(run)
            if run.passed:
                result.reported[scheduler] = {
                    "final_return": _final_return(run),
                    "param_msgs": _total(run, "param_msgs"),
                }
    return result


def eta_sweep(out: Path, quick: bool = False, workers: int = 1) -> PresetResult:
    """The learned gate complies with the requested communication rate."""
    result = PresetResult("eta-sweep", out)
    for eta in ETAS:
        config = _deep_config(f"eta{eta}", quick, rate=eta, scheduler="none")
        run = run_experiment(config, out / config.name, workers)
        result.absorb(run)
        if not run.passed:
            continue
        rates = {}
        for seed, frame in run.frames().items():
            ranks = [c for c in frame.columns if c.startswith("gate_open_rank")]
            tail = frame.tail(max(1, len(frame) // 10))
            rates[seed] = float(tail[ranks].to_numpy().mean())
        rate = float(np.median(list(rates.values())))
        result.check(
            f"eta={eta}: open rate within {RATE_TOLERANCE} of the target",
            abs(rate - eta) <= RATE_TOLERANCE,
            rates,
        )
    return result


PRESETS: dict[str, Callable[..., PresetResult]] = {
    "theorem1-suite": theorem1_suite,
    "linear-convergence": linear_convergence,
    "toy-consensus-ablation": toy_consensus_ablation,
    "nav-baselines": nav_baselines,
    "bandit-ablation": bandit_ablation,
    "eta-sweep": eta_sweep,
}


def run_preset(
    name: str,
    out_dir: Union[str, Path] = "runs",
    quick: bool = False,
    workers: int = 1,
) -> PresetResult:
    """
    Run a named preset and write its summary.

    :param name: one of PRESETS.
    :param out_dir: parent of the preset directory.
    :param quick: shrink every budget.
    :param workers: processes for the seeds.
    :return: the checks and reported values.
    """
    if name not in PRESETS:
        raise ValueError(f"Unknown preset {name!r}; choose from {list(PRESETS)}")
    out = Path(out_dir) / name
    logger.info("preset %s (quick=%s) in %s", name, quick, out)
    result = PRESETS[name](out, quick, workers)
    result.write()
    logger.info("preset %s: %s", name, "passed" if result.passed else "FAILED")
    return result


