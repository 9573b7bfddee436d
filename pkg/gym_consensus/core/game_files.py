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

"""Declarative game files.

A game file is a TOML document:

    name = "kuba2"
    n_agents = 2
    discount = 0.95
    local_states = ["s", "end"]      # shared, or one list per agent
    local_actions = [0, 1]
    terminal_local = "end"           # optional: joint states holding it end
    unlisted_rows = "error"          # or "stay": unlisted rows self-loop
    observations = "state"           # or "table"

    [[initial]]
    state = ["s", "s"]
    p = 1.0

    [[transitions]]
    state = ["s", "s"]
    action = "*"                     # "*" matches every joint action
    next = [{ state = ["end", "end"], p = 1.0 }]

    [[rewards]]
    state = ["s", "s"]               # "*" matches every non-terminal state
    action = [0, 1]
    values = [1.0, 1.0]              # one per agent; unlisted entries are 0

    [[observation]]                  # only with observations = "table"
    state = ["s", "s"]
    values = ["x", "x"]
"""
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Hashable, Sequence, Union

import numpy as np

import gym_consensus.assets as assets
from gym_consensus.core.games import FiniteMG, ObservationMap

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

WILDCARD = "*"


class GameFileError(ValueError):
    """A game file is malformed or inconsistent."""


def _get(document: dict[str, Any], key: str, kind: type) -> Any:
    if key not in document:
        raise GameFileError(f"Missing key '{key}'")
    value = document[key]
    if not isinstance(value, kind):
        raise GameFileError(f"Key '{key}' must be of type {kind.__name__}")
    return value


def _local_spaces(value: Any, n_agents: int, key: str) -> tuple[tuple[Hashable, ...], ...]:
    if not isinstance(value, list) or len(value) == 0:
        raise GameFileError(f"'{key}' must be a non-empty list")
    if all(isinstance(v, list) for v in value):
        if len(value) != n_agents:
            raise GameFileError(f"'{key}' must list one space per agent")
        return tuple(tuple(v) for v in value)
    return tuple(tuple(value) for _ in range(n_agents))


def _joint(mg_spaces: Sequence[Sequence[Hashable]], value: Any, what: str) -> tuple:
    if not isinstance(value, list) or len(value) != len(mg_spaces):
        raise GameFileError(f"{what} {value!r} must list one entry per agent")
    for space, v in zip(mg_spaces, value):
        if v not in space:
            raise GameFileError(f"{what} {value!r}: {v!r} not in {space}")
    return tuple(value)


def parse_game(document: dict[str, Any]) -> tuple[FiniteMG, ObservationMap]:
    """
    Build a game and its observation map from a parsed game file.

    :param document: the TOML document as a dictionary.
    :return: the game and the observation map.
    """
    n_agents = _get(document, "n_agents", int)
    if n_agents < 1:
        raise GameFileError("'n_agents' must be positive")
    state_spaces = _local_spaces(document.get("local_states"), n_agents, "local_states")
    action_spaces = _local_spaces(
        document.get("local_actions"), n_agents, "local_actions"
    )
    discount = float(document.get("discount", 0.95))
    name = str(document.get("name", "game"))
    unlisted = document.get("unlisted_rows", "error")
    if unlisted not in ("error", "stay"):
        raise GameFileError("'unlisted_rows' must be 'error' or 'stay'")

    state_sizes = [len(s) for s in state_spaces]
    action_sizes = [len(a) for a in action_spaces]
    n_states = int(np.prod(state_sizes))
    n_actions = int(np.prod(action_sizes))

    # A skeleton game provides the index arithmetic.
    identity = np.zeros((n_states, n_actions, n_states))
    identity[np.arange(n_states), :, np.arange(n_states)] = 1.0
    uniform = np.full(n_states, 1.0 / n_states)
    skeleton = FiniteMG(
        state_spaces,
        action_spaces,
        identity,
        np.zeros((n_states, n_actions, n_agents)),
        uniform,
        min(discount, 0.99),
    )

    terminal: set[int] = set()
    if "terminal_local" in document:
        marker = document["terminal_local"]
        for s in range(n_states):
            if marker in skeleton.joint_state(s):
                terminal.add(s)
    for entry in document.get("terminal", []):
        terminal.add(skeleton.state_index(_joint(state_spaces, entry, "Terminal state")))

    def actions_of(value: Any) -> list[int]:
        if value == WILDCARD:
            return list(range(n_actions))
        return [skeleton.action_index(_joint(action_spaces, value, "Action"))]

    transition = np.zeros((n_states, n_actions, n_states))
    listed = np.zeros((n_states, n_actions), dtype=bool)
    for entry in document.get("transitions", []):
        s = skeleton.state_index(_joint(state_spaces, entry.get("state"), "State"))
        for a in actions_of(entry.get("action", WILDCARD)):
            if listed[s, a]:
                raise GameFileError(
                    f"Duplicate transition row for state {entry['state']!r}"
                )
            listed[s, a] = True
            for target in entry.get("next", []):
                s_next = skeleton.state_index(
                    _joint(state_spaces, target.get("state"), "Next state")
                )
                transition[s, a, s_next] += float(target.get("p", 0.0))

    for s in range(n_states):
        if s in terminal:
            continue
        for a in np.nonzero(~listed[s])[0]:
            if unlisted == "stay":
                transition[s, a, s] = 1.0
            else:
                raise GameFileError(
                    f"No transition for state {skeleton.joint_state(s)!r}, "
                    f"action {skeleton.joint_action(int(a))!r}"
                )

    def states_of(value: Any) -> list[int]:
        if value == WILDCARD:
            return [s for s in range(n_states) if s not in terminal]
        return [skeleton.state_index(_joint(state_spaces, value, "State"))]

    rewards = np.zeros((n_states, n_actions, n_agents))
    for entry in document.get("rewards", []):
        values = entry.get("values")
        if not isinstance(values, list) or len(values) != n_agents:
            raise GameFileError("Reward 'values' must list one reward per agent")
        for s in states_of(entry.get("state")):
            for a in actions_of(entry.get("action", WILDCARD)):
                rewards[s, a] = [float(v) for v in values]

    initial = np.zeros(n_states)
    for entry in document.get("initial", []):
        s = skeleton.state_index(_joint(state_spaces, entry.get("state"), "State"))
        initial[s] += float(entry.get("p", 0.0))

    try:
        mg = FiniteMG(
            state_spaces,
            action_spaces,
            transition,
            rewards,
            initial,
            discount,
            frozenset(terminal),
            name,
        )
    except ValueError as e:
        raise GameFileError(str(e)) from e

    mode = document.get("observations", "state")
    if mode == "state":
        obs = ObservationMap.identity(mg)
    elif mode == "table":
        values_per_state: dict[int, list] = {}
        for entry in document.get("observation", []):
            s = mg.state_index(_joint(state_spaces, entry.get("state"), "State"))
            values = entry.get("values")
            if not isinstance(values, list) or len(values) != n_agents:
                raise GameFileError("Observation 'values' must list one per agent")
            values_per_state[s] = [_hashable(v) for v in values]
        missing = [s for s in range(n_states) if s not in values_per_state]
        if missing:
            raise GameFileError(
                f"No observation for state {mg.joint_state(missing[0])!r}"
            )
        space = sorted({v for row in values_per_state.values() for v in row}, key=repr)
        lookup = {v: k for k, v in enumerate(space)}
        table = np.array(
            [[lookup[values_per_state[s][i]] for s in range(n_states)] for i in range(n_agents)]
        )
        obs = ObservationMap(table, tuple(space), bool(document.get("full_observability", False)))
    else:
        raise GameFileError("'observations' must be 'state' or 'table'")
    return mg, obs


def _hashable(value: Any) -> Hashable:
    if isinstance(value, list):
        return tuple(_hashable(v) for v in value)
    return value


def load_game(path: Union[str, Path]) -> tuple[FiniteMG, ObservationMap]:
    """Load a game file from disk."""
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise GameFileError(f"{path}: {e}") from e
    return parse_game(document)


def load_bundled_game(name: str) -> tuple[FiniteMG, ObservationMap]:
    """Load one of the game files shipped in 'gym_consensus.assets'."""
    text = resources.files(assets).joinpath(f"{name}.toml").read_text(encoding="utf-8")
    return parse_game(tomllib.loads(text))
