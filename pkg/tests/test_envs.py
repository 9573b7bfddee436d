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

"""Tests for the bundled environments and the observation wrappers."""
import logging
from typing import cast

import gymnasium as gym
import numpy as np
import pandas as pd
import pytest
from gymnasium import spaces

from gym_consensus import __version__
from gym_consensus.core.configurations import ParticleNavConfiguration
from gym_consensus.core.states import NavigationState
from gym_consensus.core.types import Permutation
from gym_consensus.envs import ENVIRONMENTS, CosineToyMG, ParticleNav, build
from gym_consensus.envs.cosine import local_states
from gym_consensus.envs.kuba import rewarding_action
from gym_consensus.envs.particle_nav import TRAJECTORY_COLUMNS
from gym_consensus.envs.triangle import clockwise_shapes, observe
from gym_consensus.utils import index_table
from gym_consensus.wrappers import observations

NB_ROLLOUT_STEPS = 20


def test_version():
    """Test version."""
    assert __version__ == "0.1.0"


def test_triangle_observations():
    """Agents read the shapes clockwise from their own corner."""
    state = (("L", "△"), ("M", "▽"), ("R", "▽"))
    assert clockwise_shapes(state, "M") == "▽▽△"
    assert observe(state, 2) == ("R", "▽△▽")
    game = build("triangle")
    assert game.mg.n_agents == 3
    assert game.mg.is_one_step


def test_kuba_rewarding_action():
    """Only one joint action pays."""
    assert rewarding_action(4) == (0, 0, 1, 1)
    game = build("kuba", n_agents=4)
    start = game.mg.state_index(("s",) * 4)
    paying = np.nonzero(game.mg.mean_reward[start])[0]
    assert [game.mg.joint_action(int(a)) for a in paying] == [(0, 0, 1, 1)]


def test_build_errors():
    """Unknown names and invalid parameters raise ValueError."""
    with pytest.raises(ValueError):
        build("nope")
    with pytest.raises(ValueError):
        build("kuba", n_agents=3)
    with pytest.raises(ValueError):
        build("kuba2", n_agents=2)
    with pytest.raises(ValueError):
        build("cosine-toy", colour="red")
    assert "particle-nav" in ENVIRONMENTS


def _tables(p_one: np.ndarray) -> np.ndarray:
    return np.stack([1.0 - p_one, p_one], axis=-1)[:, None, :]


def test_cosine_optimum():
    """Playing 1 exactly where s^i >= 0 earns +1."""
    env = CosineToyMG(5)
    assert env.optimal_action().tolist() == [1, 1, 1, 0, 0]
    assert env.reward(env.optimal_action()) == pytest.approx(1.0)
    assert env.exact_return(_tables(env.optimal_action().astype(float))) == pytest.approx(1.0)
    assert env.exact_return(_tables(np.full(5, 0.5))) == pytest.approx(0.0)
    assert local_states(3)[1] == pytest.approx(0.0)


def test_cosine_features_rank():
    """N + 1 independent columns survive out of 3N."""
    for n in (2, 3, 6):
        env = CosineToyMG(n)
        assert env.feature_dim == n + 1
        assert len(env.feature_names) == n + 1


@pytest.mark.parametrize("one_step", [True, False])
def test_cosine_oracle_weights_exact(one_step):
    """Q is affine in the action indicators, so the oracle weights are exact everywhere."""
    env = CosineToyMG(3, one_step=one_step)
    rng = np.random.default_rng(1)
    tables = _tables(rng.uniform(size=3))
    omega = env.oracle_weights(tables)
    actions = index_table([2, 2, 2])
    phi = np.array([env.features(0, a) for a in actions])
    assert np.allclose(phi @ omega, env.action_values(tables, actions))


def test_cosine_expected_terms():
    """The expected update enumerates the joint actions with their probabilities."""
    env = CosineToyMG(3, one_step=True)
    terms = env.expected_terms(_tables(np.array([0.2, 0.5, 0.9])))
    assert terms.weights.sum() == pytest.approx(1.0)
    assert terms.phi.shape == (8, env.feature_dim)
    assert np.all(terms.next_phi == 0.0)
    with pytest.raises(ValueError):
        CosineToyMG(13).expected_terms(_tables(np.full(13, 0.5)))


def test_cosine_tabulated():
    """The tabulated game has one start state and shared local spaces."""
    mg, obs = CosineToyMG(2, one_step=True).to_finite_mg()
    assert mg.n_agents == 2
    assert mg.local_state_spaces[0] == mg.local_state_spaces[1]
    assert np.count_nonzero(mg.initial_dist) == 1
    obs.check_compatible(mg)
    with pytest.raises(ValueError):
        CosineToyMG(5).to_finite_mg()


def rollout(env: gym.Env):
    """Perform rollout."""
    observation_space = cast(gym.Space, env.observation_space)
    logging.debug(observation_space)
    env.reset(seed=0)
    for _ in range(NB_ROLLOUT_STEPS):
        action = cast(gym.Space, env.action_space).sample()
        ret = env.step(action)
        logging.debug(ret)
        assert observation_space.contains(ret[0])


def test_particle_nav_rollout():
    """Observations stay in the declared space."""
    env = ParticleNav(n_agents=4, n_neighbors=2)
    rollout(env)


def test_particle_nav_episode():
    """Episodes are truncated after the configured length."""
    env = ParticleNav(ParticleNavConfiguration(n_agents=3, episode_length=5))
    obs, _ = env.reset(seed=1)
    assert len(obs) == 3
    truncated = False
    steps = 0
    while not truncated:
        obs, rewards, terminated, truncated, info = env.step(np.zeros((3, 2)))
        assert not terminated
        assert rewards.shape == (3,)
        assert info["collisions"].shape == (3,)
        steps += 1
    assert steps == 5
    frame = env.trajectory_frame()
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert len(frame) == 6 * 3


def test_particle_nav_seeded():
    """The same seed gives the same episode."""
    a, b = ParticleNav(n_agents=3), ParticleNav(n_agents=3)
    obs_a, _ = a.reset(seed=7)
    obs_b, _ = b.reset(seed=7)
    assert np.array_equal(obs_a[0]["position"], obs_b[0]["position"])


def test_export_trajectory(tmp_path):
    """Trajectories are exported as CSV."""
    env = ParticleNav(n_agents=2)
    env.reset(seed=0)
    env.step(np.ones((2, 2)))
    path = tmp_path / "trajectory.csv"
    env.export_trajectory(path)
    frame = pd.read_csv(path)
    assert len(frame) == 4
    assert set(frame["agent"]) == {0, 1}


def test_neighbors_nearest_first():
    """Neighbours exclude the agent and are sorted by distance."""
    config = ParticleNavConfiguration(n_agents=5, n_neighbors=3)
    state = NavigationState.random(config, np.random.default_rng(2))
    ids = state.neighbor_ids()
    assert ids.shape == (5, 3)
    for i in range(5):
        assert i not in ids[i]
        distances = np.linalg.norm(state.positions[ids[i]] - state.positions[i], axis=1)
        assert np.all(np.diff(distances) >= 0.0)
    assert ParticleNavConfiguration(n_agents=3, n_neighbors=5).visible_neighbors == 2


def _permuted_step(config: ParticleNavConfiguration, seed: int):
    rng = np.random.default_rng(seed)
    state = NavigationState.random(config, rng)
    actions = rng.uniform(-1.0, 1.0, size=(config.n_agents, 2))
    m = Permutation.transposition(config.n_agents, 0, 1)
    original = state.copy()
    rewards = original.step(actions)
    permuted = state.permuted(m)
    permuted_rewards = permuted.step(m.apply_array(actions))
    return m, original, rewards, permuted, permuted_rewards


def test_homogeneous_navigation_commutes_with_permutations():
    """Relabelling the agents relabels the next state and the rewards."""
    config = ParticleNavConfiguration(n_agents=4)
    for seed in range(5):
        m, original, rewards, permuted, permuted_rewards = _permuted_step(config, seed)
        assert np.allclose(permuted.positions, m.apply_array(original.positions))
        assert np.allclose(permuted_rewards, m.apply_array(rewards))


def test_heterogeneous_navigation_is_not_homogeneous():
    """Agent-specific speed scales break the permutation property."""
    config = ParticleNavConfiguration(n_agents=4, speed_scales=(1.0, 3.0, 1.0, 1.0))
    assert not config.is_homogeneous
    m, original, _, permuted, _ = _permuted_step(config, 0)
    assert not np.allclose(permuted.positions, m.apply_array(original.positions))


def test_configuration_validation():
    """Invalid configurations are refused."""
    with pytest.raises(ValueError):
        ParticleNavConfiguration(n_agents=1)
    with pytest.raises(ValueError):
        ParticleNavConfiguration(n_agents=3, speed_scales=(1.0, 2.0))


def test_navigation_features():
    """Flat features: position, velocity, neighbours, landmarks."""
    env = ParticleNav(n_agents=6, n_neighbors=3)
    env = observations.UseFeatures(env, [observations.NavigationFeatures] * 6)
    assert isinstance(env.observation_space, spaces.Tuple)
    assert env.observation_space[0].shape == (4 + 6 + 8,)
    rollout(env)
    assert len(env.last_dict_observation) == 6


def test_relative_features():
    """Relative features drop the absolute position."""
    env = ParticleNav(n_agents=3, n_neighbors=1)
    env = observations.UseFeatures(env, [observations.RelativeFeatures] * 3)
    assert env.observation_space[0].shape == (2 + 2 + 4,)
    rollout(env)


def test_wrong_number_of_features():
    """One feature class per agent is required."""
    with pytest.raises(ValueError):
        observations.UseFeatures(ParticleNav(n_agents=3), [observations.NavigationFeatures])
