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

"""Verifier of the homogeneity conditions of a finite Markov game.

A game is homogeneous when:

(i)   all agents share the same local state space and local action space;
(ii)  P(Ms'|Ms, Ma) = P(s'|s, a) and R(Ms, Ma) = M R(s, a) for every
      permutation M of the agents;
(iii) (o^1(Ms), ..., o^N(Ms)) = M (o^1(s), ..., o^N(s)).

Each permutation is compared against the identity. Since the checked
permutations generate the symmetric group, this also settles the
comparison between any pair (M, M').
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from gym_consensus.core.games import FiniteMG, ObservationMap
from gym_consensus.core.types import Permutation, PermutationPolicy

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
DEFAULT_BUDGET = 5_000_000


class BudgetExceededError(ValueError):
    """The requested enumeration is larger than the allowed budget."""


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one condition, with the first counterexample found."""

    passed: bool
    witness: Optional[dict[str, Any]] = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        """Encode into a JSON-friendly dictionary."""
        result: dict[str, Any] = {"passed": self.passed}
        if self.witness is not None:
            result["witness"] = {k: _jsonable(v) for k, v in self.witness.items()}
        if self.detail:
            result["detail"] = self.detail
        return result


@dataclass(frozen=True)
class HomogeneityReport:
    """Verdict on the three homogeneity conditions."""

    condition_i: ConditionResult
    condition_ii: ConditionResult
    condition_iii: ConditionResult
    permutations_checked: int = 0
    policy: PermutationPolicy = PermutationPolicy.TRANSPOSITIONS

    @property
    def homogeneous(self) -> bool:
        """True iff all three conditions hold."""
        return (
            self.condition_i.passed
            and self.condition_ii.passed
            and self.condition_iii.passed
        )

    def to_dict(self) -> dict[str, Any]:
        """Encode into a JSON-friendly dictionary."""
        return {
            "homogeneous": self.homogeneous,
            "policy": self.policy.value,
            "permutations_checked": self.permutations_checked,
            "condition_i": self.condition_i.to_dict(),
            "condition_ii": self.condition_ii.to_dict(),
            "condition_iii": self.condition_iii.to_dict(),
        }


@dataclass(frozen=True)
class ObservationIdentityReport:
    """Outcome of the o^i(s) = o^j(Ms) check over transpositions."""

    passed: bool
    witnesses: list[dict[str, Any]] = field(default_factory=list)
    checked: int = 0


def _jsonable(value: Any) -> Any:
    if isinstance(value, Permutation):
        return list(value.mapping)
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def _check_budget(mg: FiniteMG, n_permutations: int, budget: int):
    size = mg.n_states * mg.n_actions * max(n_permutations, 1)
    if size > budget:
        raise BudgetExceededError(
            f"Enumerating {mg.n_states} states x {mg.n_actions} actions x "
            f"{n_permutations} permutations = {size} exceeds the budget of {budget}"
        )


def _check_local_spaces(mg: FiniteMG) -> ConditionResult:
    states0 = set(mg.local_state_spaces[0])
    actions0 = set(mg.local_action_spaces[0])
    for i in range(1, mg.n_agents):
        if set(mg.local_state_spaces[i]) != states0:
            return ConditionResult(
                False, {"agent": i}, "local state space differs from agent 0"
            )
        if set(mg.local_action_spaces[i]) != actions0:
            return ConditionResult(
                False, {"agent": i}, "local action space differs from agent 0"
            )
    if any(mg.local_state_spaces[i] != mg.local_state_spaces[0] for i in range(mg.n_agents)):
        return ConditionResult(False, None, "local state spaces must share one ordering")
    if any(mg.local_action_spaces[i] != mg.local_action_spaces[0] for i in range(mg.n_agents)):
        return ConditionResult(False, None, "local action spaces must share one ordering")
    return ConditionResult(True)


def _check_dynamics(mg: FiniteMG, m: Permutation) -> Optional[dict[str, Any]]:
    ps = mg.permuted_states(m)
    pa = mg.permuted_actions(m)
    permuted = mg.transition[ps][:, pa][:, :, ps]
    bad = np.argwhere(~np.isclose(permuted, mg.transition, rtol=0.0, atol=TOLERANCE))
    if len(bad) > 0:
        s, a, s_next = bad[0]
        return {
            "kind": "transition",
            "state": mg.joint_state(int(s)),
            "action": mg.joint_action(int(a)),
            "next_state": mg.joint_state(int(s_next)),
            "permutation": m,
        }
    lhs = mg.rewards[ps][:, pa]
    rhs = mg.rewards[:, :, list(m.inverse().mapping)]
    bad = np.argwhere(~np.isclose(lhs, rhs, rtol=0.0, atol=TOLERANCE))
    if len(bad) > 0:
        s, a, _ = bad[0]
        return {
            "kind": "reward",
            "state": mg.joint_state(int(s)),
            "action": mg.joint_action(int(a)),
            "permutation": m,
        }
    return None


def _check_observations(
    mg: FiniteMG, obs: ObservationMap, m: Permutation
) -> Optional[dict[str, Any]]:
    ps = mg.permuted_states(m)
    lhs = obs.table[:, ps]
    rhs = obs.table[list(m.inverse().mapping), :]
    bad = np.nonzero(np.any(lhs != rhs, axis=0))[0]
    if len(bad) > 0:
        s = int(bad[0])
        return {"state": mg.joint_state(s), "permutation": m}
    return None


def check_homogeneous(
    mg: FiniteMG,
    obs: ObservationMap,
    perms: Union[PermutationPolicy, str] = PermutationPolicy.TRANSPOSITIONS,
    budget: int = DEFAULT_BUDGET,
) -> HomogeneityReport:
    """
    Check the three homogeneity conditions by enumeration.

    :param mg: the game.
    :param obs: the observation map of the game.
    :param perms: enumerate transpositions (default) or all permutations.
    :param budget: maximum |S| * |A| * (number of permutations).
    :return: the report, with the first counterexample of each failed condition.
    """
    obs.check_compatible(mg)
    policy = PermutationPolicy(perms)
    permutations = policy.permutations(mg.n_agents)
    _check_budget(mg, len(permutations), budget)

    condition_i = _check_local_spaces(mg)
    if not condition_i.passed:
        undefined = ConditionResult(False, None, "undefined without condition (i)")
        return HomogeneityReport(condition_i, undefined, undefined, 0, policy)

    condition_ii = ConditionResult(True)
    condition_iii = ConditionResult(True)
    for m in permutations:
        if condition_ii.passed:
            witness = _check_dynamics(mg, m)
            if witness is not None:
                condition_ii = ConditionResult(False, witness)
        if condition_iii.passed:
            witness = _check_observations(mg, obs, m)
            if witness is not None:
                condition_iii = ConditionResult(False, witness)
        if not condition_ii.passed and not condition_iii.passed:
            break

    report = HomogeneityReport(
        condition_i, condition_ii, condition_iii, len(permutations), policy
    )
    logger.info(
        "%s: homogeneous=%s (i=%s, ii=%s, iii=%s)",
        mg.name,
        report.homogeneous,
        condition_i.passed,
        condition_ii.passed,
        condition_iii.passed,
    )
    return report


def check_observation_identity(
    mg: FiniteMG, obs: ObservationMap, budget: int = DEFAULT_BUDGET, max_witnesses: int = 5
) -> ObservationIdentityReport:
    """
    Check o^i(s) = o^j(Ms) for every state and every transposition M = (i j).

    Meaningful for games that pass 'check_homogeneous'; games that do not
    typically fail here too, and the failing states are returned as witnesses.

    :param mg: the game.
    :param obs: the observation map.
    :param budget: maximum |S| * (number of transpositions).
    :param max_witnesses: how many failing (state, i, j) triples to keep. The
        verdict does not depend on it.
    :return: the report.
    """
    obs.check_compatible(mg)
    permutations = PermutationPolicy.TRANSPOSITIONS.permutations(mg.n_agents)
    size = mg.n_states * len(permutations)
    if size > budget:
        raise BudgetExceededError(f"{size} checks exceed the budget of {budget}")
    witnesses: list[dict[str, Any]] = []
    checked = 0
    violated = False
    for m in permutations:
        i, j = [k for k in range(mg.n_agents) if m(k) != k]
        ps = mg.permuted_states(m)
        checked += mg.n_states
        for a, b in ((i, j), (j, i)):
            bad = np.nonzero(obs.table[a] != obs.table[b, ps])[0]
            violated = violated or len(bad) > 0
            for s in bad[: max_witnesses - len(witnesses)]:
                witnesses.append({"state": mg.joint_state(int(s)), "i": a, "j": b})
    return ObservationIdentityReport(not violated, witnesses, checked)
