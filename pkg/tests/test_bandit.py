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

"""Tests for the shaped rewards, the forecasters and the consensus schedulers."""
import numpy as np
import pytest

from gym_consensus.algorithms.bandit import (
    COMMUNICATE,
    SKIP,
    BanditScheduler,
    BiLevelBandit,
    Exp3,
    FullConsensus,
    NoConsensus,
    RandomScheduler,
    RuleBasedScheduler,
    exchange_counts,
    gossip_exchange,
    make_scheduler,
    shape_rewards,
)
from gym_consensus.core.configurations import BanditConfiguration
from gym_consensus.harness.presets import synthetic_high_level, synthetic_low_level


class Participant:
    """A parameter vector taking part in the consensus."""

    def __init__(self, params):
        """Initialize."""
        self.params = np.asarray(params, dtype=float)

    def consensus_parameters(self) -> np.ndarray:
        """Get the parameters."""
        return self.params

    def critic_parameters(self) -> np.ndarray:
        """The first entry plays the critic."""
        return self.params[:1]

    def set_consensus_parameters(self, params: np.ndarray):
        """Set the parameters."""
        self.params = np.asarray(params, dtype=float)


def _participants(n: int) -> list[Participant]:
    return [Participant([float(i), 2.0 * i]) for i in range(n)]


def test_shaped_low_level_reward():
    """2 * sigmoid(z) - 1 of the standardized return."""
    assert shape_rewards([1.0, 2.0, 3.0], [], 3.0, "low") == pytest.approx(0.545794, abs=1e-6)
    assert shape_rewards([1.0, 2.0, 3.0], [], 1.0, "low") == pytest.approx(-0.545794, abs=1e-6)
    assert shape_rewards([1.0, 2.0, 3.0], [], 2.0, "low") == 0.0


def test_shaped_high_level_reward():
    """The score is shared among the selections of the matching arm."""
    arms = [COMMUNICATE] * 5 + [SKIP] * 5
    high = shape_rewards([1.0, 2.0, 3.0], arms, 3.0, "high")
    assert high == pytest.approx(0.121859, abs=1e-6)
    assert shape_rewards([1.0, 2.0, 3.0], arms, 1.0, "high") == pytest.approx(-high)
    only_skips = shape_rewards([1.0, 2.0, 3.0], [SKIP] * 2, 3.0, "high")
    assert only_skips == 0.0


@pytest.mark.parametrize(
    "returns,g",
    [([], 1.0), ([1.0], 2.0), ([2.0, 2.0, 2.0], 5.0)],
)
def test_neutral_rewards(returns, g):
    """Short or flat windows give a neutral reward."""
    assert shape_rewards(returns, [COMMUNICATE] * 3, g, "low") == 0.0
    assert shape_rewards(returns, [COMMUNICATE] * 3, g, "high") == 0.0


def test_shaped_rewards_stay_open():
    """Extreme returns stay strictly inside (-1, 1)."""
    assert shape_rewards([0.0, 1.0], [], 1e12, "low") < 1.0
    assert shape_rewards([0.0, 1.0], [], -1e12, "low") > -1.0
    with pytest.raises(ValueError):
        shape_rewards([0.0, 1.0], [], 0.0, "middle")


def test_exp3(rng):
    """Probabilities keep the exploration floor and follow the rewards."""
    forecaster = Exp3(4, learning_rate=0.1, exploration=0.2)
    assert np.allclose(forecaster.probabilities(), 0.25)
    for _ in range(50):
        forecaster.update(2, 1.0)
    probs = forecaster.probabilities()
    assert probs.sum() == pytest.approx(1.0)
    assert probs.argmax() == 2
    assert probs.min() >= 0.2 / 4
    assert forecaster.log_weights.max() == 0.0
    assert 0 <= forecaster.sample(rng) < 4
    with pytest.raises(ValueError):
        Exp3(0)


def test_bilevel_bandit(rng):
    """Decisions name a peer or skip; windows keep the latest returns."""
    bandit = BiLevelBandit(1, 3, BanditConfiguration(window=2))
    with pytest.raises(RuntimeError):
        bandit.observe(0.0)
    for t in range(20):
        peer = bandit.choose(rng)
        if peer is not None:
            assert peer in (0, 2)
        r1, r2 = bandit.observe(float(t % 3))
        if t == 0:
            assert r1 == 0.0
        assert (r2 is None) == (peer is None)
    assert len(bandit.high_returns) == 2
    assert len(bandit.high_arms) == 2
    with pytest.raises(ValueError):
        BiLevelBandit(0, 1)
    with pytest.raises(ValueError):
        BanditConfiguration(window=1)
    with pytest.raises(ValueError):
        bandit.sample_arm("middle", rng)


def _observe(bandit: BiLevelBandit, g: float, peer_arm=None) -> tuple:
    bandit.last_x1 = SKIP if peer_arm is None else COMMUNICATE
    bandit.last_x2 = peer_arm
    return bandit.observe(g)


def test_windows_include_the_current_return():
    """The current return is standardized against a window holding it."""
    bandit = BiLevelBandit(0, 2, BanditConfiguration(window=3))
    for g in (1.0, 2.0):
        _observe(bandit, g, 0)
    r1, r2 = _observe(bandit, 3.0, 0)
    assert r2 == pytest.approx(0.545794, abs=1e-6)
    assert r1 == pytest.approx(0.201336, abs=1e-5)
    _, r2 = _observe(bandit, 4.0, 0)
    assert list(bandit.low_returns) == [2.0, 3.0, 4.0]
    assert r2 == pytest.approx(0.545794, abs=1e-6)
    r1, r2 = _observe(bandit, 5.0)
    assert r2 is None
    assert list(bandit.low_returns) == [2.0, 3.0, 4.0]
    assert list(bandit.high_arms) == [COMMUNICATE, COMMUNICATE, SKIP]
    assert r1 == pytest.approx(0.29696, abs=1e-4)


def test_positive_reward_shrinks_with_communication(rng):
    """With z >= 0, more past communication never raises the high-level reward."""
    for _ in range(100):
        returns = rng.normal(size=10)
        g = float(returns.max())
        returns[-1] = g
        rewards = [
            shape_rewards(returns, [COMMUNICATE] * k + [SKIP] * (10 - k), g, "high")
            for k in range(1, 11)
        ]
        assert all(a >= b for a, b in zip(rewards, rewards[1:]))


def test_low_level_finds_the_best_arm():
    """On a stationary bandit the best arm ends up most likely."""
    best, rewards = synthetic_low_level(2000, seed=0)
    assert best >= 0.5
    assert all(-1.0 < r < 1.0 for r in rewards)


def test_high_level_stops_costly_communication():
    """Communication that lowers the return is given up."""
    p_communicate, _ = synthetic_high_level(2000, seed=0)
    assert p_communicate < 0.2


def test_gossip_exchange():
    """Both participants take the average."""
    a, b = Participant([0.0, 4.0]), Participant([2.0, 0.0])
    gossip_exchange(a, b)
    assert a.params.tolist() == [1.0, 2.0]
    assert b.params.tolist() == [1.0, 2.0]


def test_no_and_full_consensus(rng):
    """Independent learners never exchange; full consensus averages everybody."""
    agents = _participants(3)
    assert NoConsensus(3).schedule_episode(agents, rng) == []
    scheduler = FullConsensus(3)
    exchanges = scheduler.schedule_episode(agents, rng)
    assert scheduler.message_count(exchanges) == 6
    for agent in agents:
        assert agent.params.tolist() == [1.0, 2.0]


@pytest.mark.parametrize("frequency,expected", [(0.0, 0), (1.0, 4)])
def test_random_scheduler(rng, frequency, expected):
    """Every agent flips a coin with the given frequency."""
    scheduler = RandomScheduler(4, frequency)
    exchanges = scheduler.schedule_episode(_participants(4), rng)
    assert len(exchanges) == expected
    assert all(i != j for i, j in exchanges)
    assert len(scheduler.records) == 4


def test_rule_based_selection(rng):
    """The peer that moved most is chosen; ties go to the lowest index."""
    scheduler = RuleBasedScheduler(4, 1.0)
    first = scheduler.rule_based_select(0, np.zeros(2), rng)
    assert first in (1, 2, 3)
    scheduler.caches[0] = {1: np.zeros(2), 2: np.full(2, 3.0), 3: np.full(2, 3.0)}
    assert scheduler.rule_based_select(0, np.zeros(2), rng) == 2
    scheduler.caches[0] = {1: np.zeros(2)}
    assert scheduler.rule_based_select(0, np.ones(2), rng) == 2


def test_rule_based_scheduler_caches(rng):
    """Exchanges refresh the caches of both sides."""
    scheduler = RuleBasedScheduler(3, 1.0)
    agents = _participants(3)
    exchanges = scheduler.schedule_episode(agents, rng)
    assert len(exchanges) == 3
    for i, j in exchanges:
        assert j in scheduler.caches[i]
        assert i in scheduler.caches[j]


def test_rule_based_scheduler_ranks_critic_movement(rng):
    """Peers are ranked by how far their critic moved, whatever the actor did."""
    scheduler = RuleBasedScheduler(3, 1.0)
    agents = [Participant([0.0, 0.0]), Participant([0.0, 50.0]), Participant([0.0, 0.0])]
    scheduler.caches[0] = {1: np.array([0.0]), 2: np.array([3.0])}
    exchanges = scheduler.schedule_episode(agents, rng)
    assert exchanges[0] == (0, 2)
    assert all(v.shape == (1,) for cache in scheduler.caches for v in cache.values())


def test_bandit_scheduler(rng):
    """Each agent's bandit is updated with its own return."""
    scheduler = BanditScheduler(3)
    agents = _participants(3)
    for episode in range(5):
        scheduler.schedule_episode(agents, rng)
        scheduler.observe_returns(np.array([0.0, 1.0, float(episode)]))
    assert scheduler.episode == 5
    assert len(scheduler.records) == 15
    assert {r["agent"] for r in scheduler.records} == {0, 1, 2}
    assert 0.0 < scheduler.communication_rate < 1.0


def test_make_scheduler():
    """Schedulers are built by name."""
    assert isinstance(make_scheduler("bandit", 3), BanditScheduler)
    assert make_scheduler("random", 3, frequency=0.3).frequency == 0.3
    assert isinstance(make_scheduler("rule", 3), RuleBasedScheduler)
    assert isinstance(make_scheduler("full", 3), FullConsensus)
    assert isinstance(make_scheduler("none", 3), NoConsensus)
    with pytest.raises(ValueError):
        make_scheduler("oracle", 3)


def test_exchange_counts():
    """Both sides of an exchange are counted."""
    assert exchange_counts([(0, 1), (2, 1)], 3).tolist() == [1, 2, 1]
