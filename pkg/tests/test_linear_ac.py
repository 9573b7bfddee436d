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

"""Tests for the decentralized linear actor-critic."""
import numpy as np
import pandas as pd
import pytest

from gym_consensus.algorithms.consensus import ConsensusMatrix, StepSchedule
from gym_consensus.algorithms.linear_ac import (
    METRIC_COLUMNS,
    FiniteGameEnvironment,
    LinearACState,
    Transition,
    actor_step,
    area_under_curve,
    critic_step,
    sample_actions,
    td_error,
    train,
)
from gym_consensus.algorithms.nets import DivergenceError
from gym_consensus.core.configurations import LinearACConfiguration
from gym_consensus.envs import CosineToyMG, build
from gym_consensus.harness.metrics import MetricsRecorder


def test_td_error_dimensions():
    """Critic weights and features must agree."""
    with pytest.raises(ValueError):
        td_error(np.ones(2), np.ones(3), np.ones(2), 0.0, 0.9)
    assert td_error(np.zeros(2), np.ones(2), np.ones(2), 1.5, 0.9) == pytest.approx(1.5)


def test_sample_actions(rng):
    """Sampling follows the probability table."""
    assert sample_actions(np.array([[0.0, 1.0], [1.0, 0.0]]), rng).tolist() == [1, 0]
    probs = np.tile([[0.25, 0.75]], (10_000, 1))
    assert sample_actions(probs, rng).mean() == pytest.approx(0.75, abs=0.02)


def test_state_validation():
    """Iterates must have consistent shapes."""
    with pytest.raises(ValueError):
        LinearACState(np.zeros(3), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        LinearACState(np.zeros((2, 3)), np.zeros((3, 2, 2)))
    state = LinearACState.zeros(3, 4, 2, 2)
    tables = state.policy_tables(np.ones((3, 1, 2)))
    assert np.allclose(tables, 0.5)


def test_critic_step_dimension():
    """A sample with the wrong feature size is refused."""
    state = LinearACState.zeros(2, 3, 2, 1)
    sample = Transition(np.zeros(2, dtype=int), np.zeros(2, dtype=int), np.zeros(2),
                        np.ones(4), np.zeros(4), 0.9)
    with pytest.raises(ValueError):
        critic_step(state, sample, StepSchedule(), ConsensusMatrix.uniform(2))


def test_critic_step_mixes():
    """After a uniform consensus step all critics agree."""
    state = LinearACState.zeros(2, 2, 2, 1)
    sample = Transition(np.zeros(2, dtype=int), np.zeros(2, dtype=int), np.array([1.0, 0.0]),
                        np.array([1.0, 0.0]), np.zeros(2), 0.9)
    state = critic_step(state, sample, StepSchedule(), ConsensusMatrix.uniform(2))
    assert np.allclose(state.omegas, [[0.5, 0.0], [0.5, 0.0]])


def test_actor_step_follows_the_critic():
    """Each actor moves towards the action its own critic values; consensus averages them."""
    state = LinearACState.zeros(2, 2, 2, 1)
    state.omegas = np.array([[1.0, 0.0], [0.0, 0.0]])
    sample = Transition(np.zeros(2, dtype=int), np.ones(2, dtype=int), np.zeros(2),
                        np.array([1.0, 0.0]), np.zeros(2), 0.9)
    inputs = np.ones((2, 1, 1))
    alone = actor_step(state, sample, StepSchedule(), ConsensusMatrix.identity(2), inputs)
    assert alone.thetas[0, 1, 0] > 0.0 > alone.thetas[0, 0, 0]
    assert np.allclose(alone.thetas[1], 0.0)
    mixed = actor_step(state, sample, StepSchedule(), ConsensusMatrix.uniform(2), inputs)
    assert np.allclose(mixed.thetas[0], mixed.thetas[1])
    assert np.allclose(mixed.thetas[0], alone.thetas[0] / 2.0)

def test_critic_tracks_fixed_policy():
    """With a frozen uniform actor the critics reach the projected fixed point."""
    env = CosineToyMG(3, one_step=True)
    config = LinearACConfiguration(
        steps=2000,
        eval_every=500,
        mode="expected",
        schedule="constant",
        learning_rate=0.5,
        train_actor=False,
    )
    result = train(env, config)
    assert list(result.frame.columns) == METRIC_COLUMNS
    assert result.frame["step"].tolist() == [0, 500, 1000, 1500, 2000]
    assert result.frame["omega_oracle_dist"].iloc[-1] < 1e-6
    assert result.tail_oracle_distance() < 1e-6
    assert result.frame["J"].iloc[-1] == pytest.approx(0.0)


def test_expected_updates_improve_policy():
    """Expected actor-critic updates solve the cosine game."""
    env = CosineToyMG(3, one_step=True)
    config = LinearACConfiguration(
        steps=2000, eval_every=200, mode="expected", schedule="adam", learning_rate=0.05
    )
    result = train(env, config)
    assert result.frame["J"].iloc[0] == pytest.approx(0.0)
    assert result.frame["J"].iloc[-1] > 0.9
    assert result.frame["omega_disagreement"].max() == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("actor_consensus,agree", [("uniform", True), ("off", False)])
def test_actor_consensus(actor_consensus, agree):
    """Actor consensus keeps the policy parameters identical."""
    env = CosineToyMG(3, one_step=True)
    config = LinearACConfiguration(
        steps=50,
        eval_every=10,
        mode="expected",
        schedule="adam",
        learning_rate=0.05,
        actor_consensus=actor_consensus,
    )
    disagreement = train(env, config).frame["theta_disagreement"].iloc[-1]
    assert (disagreement < 1e-9) == agree


def test_seeded_runs_are_identical():
    """Sampled training is a function of the seed."""
    game = build("kuba", n_agents=2)
    env = FiniteGameEnvironment(game.mg, game.obs)
    config = LinearACConfiguration(steps=200, eval_every=50)
    first = train(env, config, seed=3).frame
    second = train(env, config, seed=3).frame
    pd.testing.assert_frame_equal(first, second)
    third = train(env, config, seed=4).state
    assert not np.array_equal(third.omegas, train(env, config, seed=3).state.omegas)


def test_rank_deficient_oracle():
    """Tabular features on a one-step game have no unique fixed point."""
    game = build("kuba", n_agents=2)
    env = FiniteGameEnvironment(game.mg, game.obs)
    result = train(env, LinearACConfiguration(steps=20, eval_every=10))
    assert result.oracle is None
    assert np.isnan(result.tail_oracle_distance())
    assert result.frame["omega_oracle_dist"].isna().all()


def test_resumed_runs_extend_the_curve():
    """A resumed run continues the step count; a restart cannot rewrite it."""
    game = build("kuba", n_agents=2)
    env = FiniteGameEnvironment(game.mg, game.obs)
    config = LinearACConfiguration(steps=20, eval_every=10)
    recorder = MetricsRecorder(METRIC_COLUMNS)
    first = train(env, config, recorder=recorder)
    assert first.state.t == 20
    resumed = train(env, config, seed=1, initial=first.state, recorder=recorder)
    assert resumed.state.t == 40
    assert resumed.frame["step"].tolist() == [0, 10, 20, 30, 40]
    with pytest.raises(ValueError):
        train(env, config, recorder=recorder)
    assert len(recorder) == 5


def test_expected_terms_are_a_distribution():
    """Expected updates weight the visited pairs by d_pi."""
    game = build("swap2")
    env = FiniteGameEnvironment(game.mg, game.obs)
    tables = LinearACState.zeros(2, env.feature_dim, 2, game.obs.n_observations).policy_tables(
        env.policy_inputs()
    )
    terms = env.expected_terms(tables)
    assert terms.weights.sum() == pytest.approx(1.0)
    assert terms.phi.shape == (16, 16)
    # Mean reward 0.75 per step whatever the state.
    assert env.exact_return(tables) == pytest.approx(7.5)


def test_divergence_is_reported():
    """A huge constant step blows up the critics."""
    env = CosineToyMG(3, one_step=True)
    config = LinearACConfiguration(steps=1000, schedule="constant", learning_rate=100.0)
    with pytest.raises(DivergenceError):
        train(env, config)


def test_area_under_curve():
    """The area is the mean of J over the evaluations."""
    assert area_under_curve(pd.DataFrame({"J": [0.0, 1.0]})) == pytest.approx(0.5)


def test_configuration_validation():
    """Unknown choices are refused."""
    with pytest.raises(ValueError):
        LinearACConfiguration(mode="batch")
    with pytest.raises(ValueError):
        LinearACConfiguration(critic_consensus="broadcast")
    with pytest.raises(ValueError):
        LinearACConfiguration(tail_fraction=0.0)
