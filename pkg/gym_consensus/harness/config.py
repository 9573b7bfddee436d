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

"""Experiment configuration, stored as TOML.

An experiment file looks like:

    name = "ours"
    env = "particle-nav"
    algorithm = "deep_ac"
    seeds = [0, 1, 2, 3]

    [deep]
    episodes = 2000
    scheduler = "bandit"

    [gate]
    rate = 0.5

Sections not given take their defaults. Dotted overrides such as
`deep.episodes=100` replace single values.
"""
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import tomli_w

from gym_consensus.core.configurations import (
    BanditConfiguration,
    DeepACConfiguration,
    GateConfig,
    LinearACConfiguration,
    ParticleNavConfiguration,
)
from gym_consensus.envs import ENVIRONMENTS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("linear_ac", "deep_ac")
SECTIONS = {
    "linear": LinearACConfiguration,
    "deep": DeepACConfiguration,
    "gate": GateConfig,
    "bandit": BanditConfiguration,
    "nav": ParticleNavConfiguration,
}


def _from_plain(cls: type, values: dict[str, Any]) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"Unknown keys for {cls.__name__}: {sorted(unknown)}")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return cls(**converted)


def _to_plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _to_plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (tuple, list)):
        return [_to_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a multi-seed run needs."""

    name: str = "experiment"
    env: str = "cosine-toy"
    env_params: dict[str, Any] = field(default_factory=dict)
    algorithm: str = "linear_ac"
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs"
    linear: LinearACConfiguration = field(default_factory=LinearACConfiguration)
    deep: DeepACConfiguration = field(default_factory=DeepACConfiguration)
    gate: GateConfig = field(default_factory=GateConfig)
    bandit: BanditConfiguration = field(default_factory=BanditConfiguration)
    nav: ParticleNavConfiguration = field(default_factory=ParticleNavConfiguration)

    def __post_init__(self):
        """Validate."""
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"Unknown environment {self.env!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {list(ALGORITHMS)}")
        if self.algorithm == "deep_ac" and self.env != "particle-nav":
            raise ValueError("The deep actor-critic runs on particle-nav only")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("At least one seed is needed")

    def to_dict(self) -> dict[str, Any]:
        """Encode into plain values."""
        return _to_plain(self)

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ExperimentConfig":
        """Decode from plain values."""
        document = dict(document)
        sections = {
            name: _from_plain(section_cls, document.pop(name, {}))
            for name, section_cls in SECTIONS.items()
        }
        top = _from_plain(cls, {k: v for k, v in document.items() if k != "env_params"})
        return dataclasses.replace(
            top, env_params=dict(document.get("env_params", {})), **sections
        )

    def dumps(self) -> str:
        """Encode as TOML."""
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        """Decode from TOML."""
        return cls.from_dict(tomllib.loads(text))

    def save(self, path: Union[str, Path]):
        """Write as a TOML file."""
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Read a TOML file."""
        with open(path, "rb") as f:
            return cls.from_dict(tomllib.load(f))

    def with_overrides(self, overrides: dict[str, Any]) -> "ExperimentConfig":
        """Replace values given by dotted keys, e.g. {"deep.episodes": 10}."""
        document = self.to_dict()
        for key, value in overrides.items():
            *path, last = key.split(".")
            target = document
            for part in path:
                if not isinstance(target.get(part), dict):
                    raise ValueError(f"Unknown section in override {key!r}")
                target = target[part]
            target[last] = value
        return ExperimentConfig.from_dict(document)


def parse_override(text: str) -> tuple[str, Any]:
    """
    Parse a `key=value` override; the value is read as a TOML value.

    >>> parse_override("deep.episodes=10")
    ('deep.episodes', 10)
    >>> parse_override("deep.scheduler=random")
    ('deep.scheduler', 'random')
    """
    if "=" not in text:
        raise ValueError(f"Overrides have the form key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip(), value
