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

"""Tests for exact policy evaluation and the policy-class optima."""
import numpy as np
import pytest

from gym_consensus.algorithms.consensus import AssumptionViolation
from gym_consensus.algorithms.exact_eval import (
    FactoredPolicy,
    PolicyClass,
    SingularSystemError,
    brute_force_optimum,
    compare_policy_classes,
    evaluate,
    solve_linear,
    solve_mspbe,
)
from gym_consensus.algorithms.features import FeatureMap
from gym_consensus.core.homogeneity import BudgetExceededError
from gym_consensus.envs import build


def test_uniform_policy_value():
    """Uniform play pays 1 with probability 1/4 on two agents."""
    game = build("kuba", n_agents=2)
    result = evaluate(game.mg, FactoredPolicy.uniform(game.mg))
    assert result.J == pytest.approx(0.25)
    assert result.d_pi.sum() == pytest.approx(1.0)
    start = game.mg.state_index(("s", "s"))
    assert result.d_pi[start].sum() == pytest.approx(1.0)


def test_repeated_game_value():
    """Staying on a different-states profile earns 1.25 per step."""
    game = build("swap2")
    choices = [[0] * game.obs.n_observations for _ in range(2)]
    # Each agent keeps its local state.
    for o, value in enumerate(game.obs.observation_space):
        own = str(value).split("/")[0]
        choices[0][o] = choices[1][o] = 0 if own == "lo" else 1
    policy = FactoredPolicy.deterministic(game.mg, choices, game.obs, shared=True)
    assert evaluate(game.mg, policy).J == pytest.approx(12.5)


def test_factored_policy_validation():
    """Policy tables must be stochastic, and identical when shared."""
    with pytest.raises(ValueError):
        FactoredPolicy((np.array([[0.5, 0.6]]),))
    with pytest.raises(ValueError):
        FactoredPolicy((np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])), shared=True)
    game = build("kuba", n_agents=2)
    with pytest.raises(ValueError):
        FactoredPolicy.uniform(build("kuba", n_agents=4).mg).joint_matrix(game.mg)


@pytest.mark.parametrize(
    "name,params",
    [("triangle", {}), ("cosine", {"n_agents": 2}), ("cosine", {"n_agents": 3}), ("swap2", {})],
)
def test_homogeneous_games_lose_nothing(name, params):
    """On homogeneous games a shared observation-based policy is optimal."""
    game = build(name, **params)
    comparison = compare_policy_classes(game.mg, game.obs)
    assert comparison.equal
    values = comparison.values
    assert set(values) == {c.value for c in PolicyClass}
    assert comparison.to_dict()["equal"]


@pytest.mark.parametrize("n_agents", [2, 4])
def test_kuba_shared_gap(n_agents):
    """The best shared policy mixes evenly and earns 2^-N."""
    game = build("kuba", n_agents=n_agents)
    comparison = compare_policy_classes(game.mg, game.obs)
    values = comparison.values
    assert values["state_based"] == pytest.approx(1.0)
    assert values["obs_based"] == pytest.approx(1.0)
    assert values["obs_based_shared"] == pytest.approx(2.0**-n_agents, abs=1e-8)
    assert not comparison.equal
    shared = comparison.results[PolicyClass.OBS_BASED_SHARED]
    assert shared.deterministic_value == pytest.approx(0.0)
    assert shared.stochastic_value == pytest.approx(2.0**-n_agents, abs=1e-8)


def test_swap_optimum():
    """Every class reaches 1.25 / (1 - 0.9)."""
    game = build("swap2")
    for policy_class in PolicyClass:
        result = brute_force_optimum(game.mg, game.obs, policy_class)
        assert result.value == pytest.approx(12.5)
        assert evaluate(game.mg, result.policy).J == pytest.approx(result.value)


def test_policy_budget():
    """Searches beyond the budget are refused."""
    game = build("swap2")
    with pytest.raises(BudgetExceededError):
        brute_force_optimum(game.mg, game.obs, "obs_based", budget=2)


def test_tabular_critic_recovers_q():
    """With one indicator per pair, the projected fixed point is Q."""
    game = build("swap2")
    policy = FactoredPolicy.uniform(game.mg, game.obs)
    result = evaluate(game.mg, policy)
    solution = solve_mspbe(game.mg, policy, FeatureMap.tabular(game.mg), result)
    assert len(solution.rows) == game.mg.n_states * game.mg.n_actions
    assert np.allclose(solution.omega, result.Q.reshape(-1))
    assert solution.residual == pytest.approx(0.0, abs=1e-8)


def test_tabular_critic_on_visited_pairs():
    """Columns of unvisited pairs are dropped before solving."""
    game = build("kuba", n_agents=2)
    policy = FactoredPolicy.uniform(game.mg)
    result = evaluate(game.mg, policy)
    rows = np.nonzero(result.d_pi.reshape(-1) > 0.0)[0]
    tabular = FeatureMap.tabular(game.mg)
    with pytest.raises(AssumptionViolation):
        solve_mspbe(game.mg, policy, tabular, result)
    solution = solve_mspbe(game.mg, policy, tabular.select(rows), result)
    assert np.allclose(solution.omega, result.Q.reshape(-1)[rows])
    reduced = tabular.reduced(rows)
    assert reduced.dim == len(rows)
    reduced.check_full_rank(rows)
    with pytest.raises(AssumptionViolation):
        tabular.check_full_rank(rows)


def test_singular_system():
    """Singular systems are reported, not solved."""
    with pytest.raises(SingularSystemError):
        solve_linear(np.zeros((2, 2)), np.ones(2))
    assert np.allclose(solve_linear(np.eye(2) * 2.0, np.ones(2)), [0.5, 0.5])
