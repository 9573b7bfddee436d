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

"""Tests for finite games, permutations, homogeneity and game files."""
import numpy as np
import pytest

from gym_consensus import utils
from gym_consensus.core.game_files import GameFileError, load_bundled_game, parse_game
from gym_consensus.core.games import FiniteMG, ObservationMap, build_finite_mg
from gym_consensus.core.homogeneity import (
    BudgetExceededError,
    check_homogeneous,
    check_observation_identity,
)
from gym_consensus.core.types import (
    TERMINAL,
    Permutation,
    PermutationPolicy,
    all_permutations,
    apply_permutation,
    transpositions,
)
from gym_consensus.envs import build


def test_encoding_agent_zero_fastest():
    """Agent 0 is the least significant digit."""
    sizes = [2, 3, 2]
    table = utils.index_table(sizes)
    assert table[1].tolist() == [1, 0, 0]
    assert table[2].tolist() == [0, 1, 0]
    for k in range(len(table)):
        assert utils.encode(table[k], sizes) == k
        assert utils.decode(k, sizes) == table[k].tolist()
    assert utils.encode_rows(table, sizes).tolist() == list(range(12))


def test_encoding_rejects_wrong_length():
    """Encoding needs one index per component."""
    with pytest.raises(ValueError):
        utils.encode([0, 1], [2, 2, 2])


def test_permutation_convention():
    """(Mx)[m(i)] = x[i]."""
    m = Permutation((2, 0, 1))
    x = ("a", "b", "c")
    y = m.apply(x)
    for i in range(3):
        assert y[m(i)] == x[i]
    assert apply_permutation(x, Permutation.transposition(3, 0, 1)) == ("b", "a", "c")
    assert m.inverse().apply(y) == x
    assert m.compose(m.inverse()).is_identity


def test_permutation_array_matches_tuple():
    """Permuting arrays agrees with permuting tuples."""
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = Permutation.random(5, rng)
        x = rng.normal(size=5)
        assert np.array_equal(m.apply_array(x), np.array(m.apply(tuple(x))))


def test_permutation_rejects_non_bijection():
    """A mapping with repeated images is refused."""
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_permutation_counts():
    """N! - 1 non-identity permutations and N(N-1)/2 transpositions."""
    assert len(list(all_permutations(4))) == 23
    assert len(list(transpositions(4))) == 6
    assert len(PermutationPolicy.ALL.permutations(3)) == 5


def _coin_game(discount=0.9):
    """Two agents, two local states, continuing, symmetric dynamics."""

    def transition(state, action):
        return {tuple(action): 1.0}

    def reward(state, action):
        return [1.0 if action[0] != action[1] else 0.0] * 2

    return build_finite_mg(
        [(0, 1), (0, 1)],
        [(0, 1), (0, 1)],
        transition,
        reward,
        {(0, 1): 0.5, (1, 0): 0.5},
        discount,
        name="coin",
    )


def test_build_finite_mg_tables():
    """Tables are filled from the transition and reward functions."""
    mg = _coin_game()
    assert mg.n_states == 4 and mg.n_actions == 4
    s = mg.state_index((0, 1))
    a = mg.action_index((1, 0))
    assert mg.transition[s, a, mg.state_index((1, 0))] == 1.0
    assert mg.rewards[s, a].tolist() == [1.0, 1.0]
    assert not mg.is_episodic
    with pytest.raises(ValueError):
        mg.transition[0, 0, 0] = 0.5


def test_finite_mg_validation():
    """Malformed tables are refused."""
    mg = _coin_game()
    bad = np.array(mg.transition)
    bad[0, 0] = 0.0
    with pytest.raises(ValueError, match="sums to"):
        FiniteMG(
            mg.local_state_spaces, mg.local_action_spaces, bad, mg.rewards, mg.initial_dist, 0.9
        )
    with pytest.raises(ValueError):
        FiniteMG(
            mg.local_state_spaces,
            mg.local_action_spaces,
            mg.transition,
            mg.rewards,
            mg.initial_dist,
            1.0,
        )
    with pytest.raises(ValueError):
        FiniteMG(((0, 0),), ((0,),), np.ones((1, 1, 1)), np.zeros((1, 1, 1)), [1.0], 0.5)


def test_terminal_states_absorb():
    """Terminal states self-loop with zero reward."""
    mg, _ = build("kuba", n_agents=2)
    end = mg.state_index((TERMINAL, TERMINAL))
    assert end in mg.terminal_states
    assert np.all(mg.transition[end, :, end] == 1.0)
    assert np.all(mg.rewards[end] == 0.0)
    assert mg.is_one_step


def test_sampling(rng):
    """Sampled transitions follow the tables."""
    mg = _coin_game()
    s = mg.sample_initial(rng)
    assert mg.joint_state(s) in ((0, 1), (1, 0))
    rewards, s_next, done = mg.step(s, mg.action_index((1, 1)), rng)
    assert mg.joint_state(s_next) == (1, 1)
    assert rewards.tolist() == [0.0, 0.0]
    assert not done


def test_observation_map_validation():
    """Observations must lie in the space; declared bijections must be injective."""
    mg = _coin_game()
    with pytest.raises(ValueError):
        ObservationMap(np.zeros((2, 4), dtype=int), ("x",), full_observability=True)
    with pytest.raises(ValueError):
        ObservationMap(np.full((2, 4), 3), ("x", "y"))
    obs = ObservationMap.identity(mg)
    assert obs.observe(1, 2) == mg.joint_state(2)


HOMOGENEOUS_GAMES = [("triangle", {}), ("cosine", {"n_agents": 2}), ("cosine", {"n_agents": 3})]


@pytest.mark.parametrize("name,params", HOMOGENEOUS_GAMES)
def test_homogeneous_games(name, params):
    """The triangle and cosine games pass the three conditions."""
    game = build(name, **params)
    report = check_homogeneous(game.mg, game.obs)
    assert report.homogeneous, report.to_dict()
    assert check_observation_identity(game.mg, game.obs).passed


def test_kuba_fails_observation_condition():
    """Identity observations do not commute with the permutations."""
    game = build("kuba", n_agents=2)
    report = check_homogeneous(game.mg, game.obs)
    assert report.condition_i.passed
    assert not report.condition_iii.passed
    witness = report.condition_iii.witness
    assert witness is not None
    state = witness["state"]
    assert state[0] != state[1]
    assert not report.homogeneous
    assert "witness" in report.to_dict()["condition_iii"]


def test_verdict_without_witnesses():
    """Keeping no witnesses does not turn a failing game into a passing one."""
    game = build("kuba", n_agents=2)
    report = check_observation_identity(game.mg, game.obs, max_witnesses=0)
    assert not report.passed
    assert report.witnesses == []
    assert len(check_observation_identity(game.mg, game.obs, max_witnesses=1).witnesses) == 1


def test_all_permutations_agree_with_transpositions():
    """Transpositions generate the group: both policies give the same verdict."""
    game = build("triangle")
    a = check_homogeneous(game.mg, game.obs, "transpositions")
    b = check_homogeneous(game.mg, game.obs, "all")
    assert a.homogeneous == b.homogeneous
    assert b.permutations_checked == 5


def test_condition_i_failure():
    """Different local action spaces fail condition (i)."""
    mg = build_finite_mg(
        [(0,), (0,)],
        [(0, 1), (0,)],
        lambda s, a: {s: 1.0},
        lambda s, a: [0.0, 0.0],
        {(0, 0): 1.0},
        0.5,
    )
    report = check_homogeneous(mg, ObservationMap.identity(mg))
    assert not report.condition_i.passed
    assert not report.homogeneous


def test_budget():
    """Enumerations above the budget are refused."""
    game = build("triangle")
    with pytest.raises(BudgetExceededError):
        check_homogeneous(game.mg, game.obs, budget=10)


def test_bundled_game_files():
    """The bundled game files parse into consistent games."""
    mg, obs = load_bundled_game("kuba2")
    assert mg.n_agents == 2 and mg.is_one_step
    assert mg.rewards[mg.state_index(("s", "s")), mg.action_index((0, 1))].tolist() == [1.0, 1.0]
    mg, obs = load_bundled_game("swap2")
    assert obs.n_observations == 4
    assert check_homogeneous(mg, obs).homogeneous


def _document(**changes):
    document = {
        "n_agents": 2,
        "local_states": ["a", "b"],
        "local_actions": [0, 1],
        "unlisted_rows": "stay",
        "initial": [{"state": ["a", "a"], "p": 1.0}],
    }
    document.update(changes)
    return document


def test_game_file_unlisted_rows():
    """Unlisted rows self-loop with `stay` and are refused with `error`."""
    mg, _ = parse_game(_document())
    assert np.all(mg.transition[:, :, :].diagonal(axis1=0, axis2=2) == 1.0)
    with pytest.raises(GameFileError, match="No transition"):
        parse_game(_document(unlisted_rows="error"))


def test_game_file_errors():
    """Malformed files raise GameFileError."""
    with pytest.raises(GameFileError):
        parse_game(_document(n_agents="two"))
    with pytest.raises(GameFileError):
        parse_game(_document(initial=[{"state": ["a", "c"], "p": 1.0}]))
    with pytest.raises(GameFileError):
        parse_game(_document(rewards=[{"state": "*", "action": [0, 0], "values": [1.0]}]))
    duplicate = {"state": ["a", "a"], "action": "*", "next": [{"state": ["a", "a"], "p": 1.0}]}
    with pytest.raises(GameFileError, match="Duplicate"):
        parse_game(_document(transitions=[duplicate, duplicate]))
    with pytest.raises(GameFileError):
        parse_game(_document(initial=[{"state": ["a", "a"], "p": 0.5}]))
