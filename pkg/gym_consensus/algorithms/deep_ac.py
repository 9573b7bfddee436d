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

"""Communication-efficient actor-critic on the navigation game.

Each agent owns:
- a gate, scoring every visible neighbour j from (o^i, e^i_j), where e^i_j
  is the relative position of j, and sampling "communicate" or "silent"
  with the straight-through Gumbel estimator;
- a critic pooling the observation-action pairs of itself and of the
  neighbours whose gate is open;
- a deterministic actor.

The gate sample weights the neighbour in the critic's pooling, so the TD
loss reaches the gate through the relaxed softmax. Parameter consensus
between agents is decided once per episode by a scheduler (see bandit).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union, cast

import numpy as np
import pandas as pd
from gymnasium.spaces import Box
from scipy.special import softmax

from gym_consensus.algorithms.bandit import BanditScheduler, Scheduler, make_scheduler
from gym_consensus.algorithms.nets import (
    AdamState,
    DenseNet,
    GumbelSampler,
    SetPoolNet,
    StraightThrough,
    adam_step,
    check_finite,
    gumbel_st_sample,
    save_parameters,
    soft_update,
)
from gym_consensus.core.configurations import (
    BanditConfiguration,
    DeepACConfiguration,
    GateConfig,
    ParticleNavConfiguration,
)
from gym_consensus.core.states import NavigationState
from gym_consensus.envs.particle_nav import ParticleNav
from gym_consensus.harness.metrics import MetricsRecorder
from gym_consensus.wrappers.observations import NavigationFeatures, UseFeatures

logger = logging.getLogger(__name__)

ACTION_SIZE = 2
OPEN = 0
FLOAT_BYTES = 8
# Position and velocity come before the neighbour block.
NEIGHBOR_OFFSET = 4
EPISODE_COLUMNS = ["episode", "return", "obs_msgs", "param_msgs"]
EVALUATION_COLUMNS = ["episode", "eval_mean", "eval_std"]


def neighbor_embeddings(obs: np.ndarray, k: int) -> np.ndarray:
    """
    Relative positions of the k visible neighbours, read from observations.

    >>> neighbor_embeddings(np.arange(10.0), 2).tolist()
    [[4.0, 5.0], [6.0, 7.0]]

    :param obs: flat observations of shape (..., d).
    :param k: the number of visible neighbours.
    :return: an array of shape (..., k, 2).
    """
    obs = np.asarray(obs, dtype=float)
    block = obs[..., NEIGHBOR_OFFSET : NEIGHBOR_OFFSET + 2 * k]
    return block.reshape(obs.shape[:-1] + (k, 2))


class DeepAgent:
    """Gate, critic, actor and their targets and optimizers."""

    def __init__(
        self,
        index: int,
        obs_size: int,
        k: int,
        config: Optional[DeepACConfiguration] = None,
        gate_config: Optional[GateConfig] = None,
        action_scale: float = 1.0,
        rng: Optional[np.random.Generator] = None,
    ):
        """Initialize."""
        config = config if config is not None else DeepACConfiguration()
        rng = rng if rng is not None else np.random.default_rng()
        self.index = index
        self.obs_size = obs_size
        self.k = k
        self.config = config
        self.gate_config = gate_config if gate_config is not None else GateConfig()
        self.action_scale = action_scale
        h = config.hidden

        self.gate = DenseNet([obs_size + 2, h, 2], "relu", "identity", rng)
        # Equal logits: every gate starts open with probability 1/2.
        self.gate.weights[-1][:] = 0.0
        self.gate.biases[-1][:] = 0.0
        self.critic = SetPoolNet(obs_size + ACTION_SIZE + 1, h, 1, config.pooling, rng)
        self.actor = DenseNet([obs_size, h, h, ACTION_SIZE], "relu", "tanh", rng)
        self.target_critic = self.critic.copy()
        self.target_actor = self.actor.copy()

        self.gate_optimizer = AdamState.zeros(self.gate.n_params, config.gate_learning_rate)
        self.critic_optimizer = AdamState.zeros(
            self.critic.n_params, config.critic_learning_rate
        )
        self.actor_optimizer = AdamState.zeros(self.actor.n_params, config.actor_learning_rate)

    def act(
        self, obs: np.ndarray, noise: float = 0.0, rng: Optional[np.random.Generator] = None
    ) -> np.ndarray:
        """Deterministic action, plus Gaussian exploration noise if noise > 0."""
        action = self.action_scale * self.actor.forward(obs)
        if noise > 0.0:
            rng = rng if rng is not None else np.random.default_rng()
            action = action + noise * rng.normal(size=action.shape)
        return np.clip(action, -self.action_scale, self.action_scale)

    def consensus_parameters(self) -> np.ndarray:
        """Critic parameters, followed by the actor's if the actors take part."""
        if self.config.actor_consensus:
            return np.concatenate([self.critic.get_flat(), self.actor.get_flat()])
        return self.critic.get_flat()

    def critic_parameters(self) -> np.ndarray:
        """The critic slice of the consensus parameters."""
        return self.critic.get_flat()

    def set_consensus_parameters(self, params: np.ndarray):
        """Overwrite what 'consensus_parameters' returns."""
        n = self.critic.n_params
        self.critic.set_flat(params[:n])
        if self.config.actor_consensus:
            self.actor.set_flat(params[n:])

    def networks(self) -> dict[str, Union[DenseNet, SetPoolNet]]:
        """The trained networks by name."""
        return {
            f"agent{self.index}.gate": self.gate,
            f"agent{self.index}.critic": self.critic,
            f"agent{self.index}.actor": self.actor,
        }


@dataclass
class GateSelection:
    """Gate decisions on a batch of observations of one agent.

    `open` holds the values entering the critic's pooling weights: the
    one-hot sample with the straight-through estimator, or the relaxed
    softmax otherwise. `hook` maps gradients wrt the two categories to
    gradients wrt the logits.
    """

    open: np.ndarray
    hard: np.ndarray
    logits: np.ndarray
    hook: Optional[StraightThrough] = None
    cache: object = None

    @property
    def selected(self) -> np.ndarray:
        """Boolean mask of the neighbours actually communicating."""
        return self.hard > 0.5

    @property
    def open_probabilities(self) -> np.ndarray:
        """Noise-free probability of the open category."""
        if self.logits.shape[-2] == 0:
            return np.zeros(self.logits.shape[:-1])
        return softmax(self.logits, axis=-1)[..., OPEN]


def select_neighbors(
    agent: DeepAgent,
    obs: np.ndarray,
    sampler: GumbelSampler,
    noise: Optional[np.ndarray] = None,
    straight_through: bool = True,
) -> GateSelection:
    """
    Sample which of the visible neighbours send their observation and action.

    :param agent: the agent owning the gate.
    :param obs: observations of the agent, of shape (B, d).
    :param sampler: Gumbel noise and temperature.
    :param noise: fixed Gumbel noise of shape (B, k, 2); drawn if None.
    :param straight_through: one-hot values in the forward pass if True,
        relaxed softmax values if False. Gradients always follow the softmax.
    :return: the selection, with what the backward pass needs.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    b = obs.shape[0]
    if agent.k == 0:
        empty = np.zeros((b, 0))
        return GateSelection(empty, empty, np.zeros((b, 0, 2)))
    embeddings = neighbor_embeddings(obs, agent.k)
    inputs = np.concatenate(
        [np.broadcast_to(obs[:, None, :], (b, agent.k, obs.shape[1])), embeddings], axis=-1
    )
    logits, cache = agent.gate.forward_cache(inputs)
    hard, hook = gumbel_st_sample(sampler, logits, noise)
    values = hard if straight_through else hook.soft
    return GateSelection(values[..., OPEN], hard[..., OPEN], logits, hook, cache)


def critic_elements(
    obs: np.ndarray, actions: np.ndarray, neighbor_ids: np.ndarray, agent: int
) -> np.ndarray:
    """
    The set seen by the critic of one agent: itself first, then its neighbours.

    Each element is (o^j, a^j, 1 if j is the agent else 0).

    :param obs: joint observations of shape (B, N, d).
    :param actions: joint actions of shape (B, N, 2).
    :param neighbor_ids: neighbours of every agent, shape (B, N, k).
    :param agent: the agent index.
    :return: an array of shape (B, 1 + k, d + 3).
    """
    obs = np.asarray(obs, dtype=float)
    actions = np.asarray(actions, dtype=float)
    if obs.shape[:2] != actions.shape[:2]:
        raise ValueError("Observations and actions disagree on batch or agents")
    b = obs.shape[0]
    members = np.concatenate(
        [np.full((b, 1), agent), np.asarray(neighbor_ids)[:, agent, :]], axis=1
    ).astype(int)
    rows = np.arange(b)[:, None]
    flags = np.zeros(members.shape + (1,))
    flags[:, 0] = 1.0
    return np.concatenate([obs[rows, members], actions[rows, members], flags], axis=-1)


def pooling_weights(selection: Optional[GateSelection], batch: int, k: int, mode: str):
    """Weight 1 for the agent itself, then one weight per neighbour."""
    if mode == "all":
        neighbors = np.ones((batch, k))
    elif mode == "none" or selection is None:
        neighbors = np.zeros((batch, k))
    else:
        neighbors = selection.open
    return np.concatenate([np.ones((batch, 1)), neighbors], axis=1)


def critic_value(
    agent: DeepAgent,
    elements: np.ndarray,
    weights: Optional[np.ndarray] = None,
    target: bool = False,
) -> np.ndarray:
    """Q^i of a batch of sets; permutation invariant over the elements."""
    net = agent.target_critic if target else agent.critic
    return net.forward(elements, weights)[..., 0]


@dataclass(frozen=True)
class Batch:
    """Joint transitions sampled from the replay memory."""

    obs: np.ndarray
    neighbor_ids: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    next_neighbor_ids: np.ndarray

    def __len__(self) -> int:
        """Get the batch size."""
        return self.obs.shape[0]


class ReplayMemory:
    """Ring buffer of joint transitions, sampled uniformly."""

    def __init__(self, capacity: int):
        """Initialize."""
        if capacity < 1:
            raise ValueError("The capacity must be positive")
        self.capacity = capacity
        self._arrays: Optional[list[np.ndarray]] = None
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        """Get the number of stored transitions."""
        return self._size

    def add(
        self,
        obs: np.ndarray,
        neighbor_ids: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        next_obs: np.ndarray,
        next_neighbor_ids: np.ndarray,
    ):
        """Store one complete transition."""
        items = [obs, neighbor_ids, actions, rewards, next_obs, next_neighbor_ids]
        if self._arrays is None:
            self._arrays = [
                np.zeros((self.capacity,) + np.shape(x), dtype=np.asarray(x).dtype)
                for x in items
            ]
        for array, x in zip(self._arrays, items):
            array[self._next] = x
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Draw a batch uniformly, with replacement."""
        if self._arrays is None:
            raise ValueError("Cannot sample from an empty memory")
        rows = rng.integers(0, self._size, size=batch_size)
        return Batch(*(array[rows] for array in self._arrays))


class Topology:
    """k-nearest-neighbour communication graph and message counters."""

    def __init__(self, n_agents: int, k: int):
        """Initialize."""
        self.n_agents = n_agents
        self.k = min(k, n_agents - 1)
        self.observation_messages = 0
        self.parameter_messages = 0
        self.bytes_sent = 0

    def neighbors(self, state: NavigationState) -> np.ndarray:
        """The neighbours of every agent, nearest first."""
        ids = state.neighbor_ids(self.k)
        if np.any(ids == np.arange(self.n_agents)[:, None]):
            raise RuntimeError("An agent cannot be its own neighbour")
        return ids

    def count_observation_messages(self, count: int, size: int):
        """Record observation-action messages of `size` floats each."""
        self._count(count, size)
        self.observation_messages += count

    def count_parameter_messages(self, count: int, size: int):
        """Record parameter messages of `size` floats each."""
        self._count(count, size)
        self.parameter_messages += count

    def _count(self, count: int, size: int):
        if count < 0 or size < 0:
            raise ValueError("Message counts cannot decrease")
        self.bytes_sent += count * size * FLOAT_BYTES


def target_actions(agents: Sequence[DeepAgent], obs: np.ndarray) -> np.ndarray:
    """Actions of the target actors on joint observations (B, N, d)."""
    return np.stack(
        [
            agent.action_scale * agent.target_actor.forward(obs[:, i])
            for i, agent in enumerate(agents)
        ],
        axis=1,
    )


def td_targets(
    agent: DeepAgent,
    batch: Batch,
    next_actions: np.ndarray,
    sampler: GumbelSampler,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """y = r + γ Q_target on the next set, selected by the current gate."""
    i = agent.index
    selection = None
    if agent.config.gate_mode == "learned":
        selection = select_neighbors(agent, batch.next_obs[:, i], sampler, noise)
    elements = critic_elements(batch.next_obs, next_actions, batch.next_neighbor_ids, i)
    weights = pooling_weights(selection, len(batch), agent.k, agent.config.gate_mode)
    q_next = critic_value(agent, elements, weights, target=True)
    return batch.rewards[:, i] + agent.config.discount * q_next


def gate_regularizer(
    selection: GateSelection, gate_config: GateConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    Penalty α |mean open probability - η| per sample, and its gradient.

    The mean runs over all visible neighbours, or over the selected ones
    with `literal_regularizer`; an empty selection then costs α η.

    :return: per-sample penalties (B,) and gradients wrt the logits (B, k, 2).
    """
    alpha, eta = gate_config.alpha, gate_config.rate
    p = selection.open_probabilities
    b, k = p.shape
    if k == 0:
        return np.full(b, alpha * eta), np.zeros((b, 0, 2))
    if gate_config.literal_regularizer:
        mask = selection.selected.astype(float)
        counts = mask.sum(axis=1)
        safe = np.maximum(counts, 1.0)
        mean = np.where(counts > 0, (mask * p).sum(axis=1) / safe, 0.0)
        grad_p = alpha * np.sign(mean - eta)[:, None] * mask / safe[:, None]
    else:
        mean = p.mean(axis=1)
        grad_p = alpha * np.sign(mean - eta)[:, None] * np.ones_like(p) / k
    penalty = alpha * np.abs(mean - eta)
    slope = grad_p * p * (1.0 - p)
    return penalty, np.stack([slope, -slope], axis=-1)


@dataclass(frozen=True)
class TDLoss:
    """TD loss of one agent and its gradients."""

    loss: float
    td_loss: float
    regularizer: float
    critic_grads: np.ndarray
    gate_grads: np.ndarray


def td_loss_and_grads(
    agent: DeepAgent,
    batch: Batch,
    targets: np.ndarray,
    sampler: GumbelSampler,
    noise: Optional[np.ndarray] = None,
    straight_through: bool = True,
) -> TDLoss:
    """
    Mean squared TD error plus the gate regularizer, with gradients.

    :param agent: the learning agent.
    :param batch: the transitions.
    :param targets: the values y of 'td_targets', held constant.
    :param sampler: Gumbel noise and temperature of the gate.
    :param noise: fixed gate noise of shape (B, k, 2).
    :param straight_through: see 'select_neighbors'.
    :return: the loss and the gradients wrt the critic and gate parameters.
    """
    i = agent.index
    b = len(batch)
    mode = agent.config.gate_mode
    selection = None
    if mode == "learned":
        selection = select_neighbors(agent, batch.obs[:, i], sampler, noise, straight_through)
    elements = critic_elements(batch.obs, batch.actions, batch.neighbor_ids, i)
    weights = pooling_weights(selection, b, agent.k, mode)
    q, cache = agent.critic.forward_cache(elements, weights)
    error = q[:, 0] - targets
    td_loss = float(np.mean(error**2))
    _, grad_weights, critic_grads = agent.critic.backward(cache, (2.0 * error / b)[:, None])

    regularizer = 0.0
    gate_grads = np.zeros(agent.gate.n_params)
    if selection is not None and selection.hook is not None:
        penalty, grad_logits = gate_regularizer(selection, agent.gate_config)
        regularizer = float(penalty.mean())
        grad_open = grad_weights[:, 1:]
        grad_sample = np.stack([grad_open, np.zeros_like(grad_open)], axis=-1)
        grad_logits = selection.hook(grad_sample) + grad_logits / b
        _, gate_grads = agent.gate.backward(selection.cache, grad_logits)

    loss = td_loss + regularizer
    check_finite(np.array(loss), f"TD loss of agent {i}")
    return TDLoss(loss, td_loss, regularizer, critic_grads, gate_grads)


@dataclass(frozen=True)
class ActorLoss:
    """Actor loss -mean Q of one agent and its gradient."""

    loss: float
    grads: np.ndarray


def actor_loss_and_grads(
    agent: DeepAgent,
    batch: Batch,
    sampler: GumbelSampler,
    noise: Optional[np.ndarray] = None,
) -> ActorLoss:
    """
    Deterministic policy gradient: ascend Q through the agent's own action.

    Neighbours keep their stored actions and the gate decisions are not
    differentiated.
    """
    i = agent.index
    b = len(batch)
    own_obs = batch.obs[:, i]
    raw, actor_cache = agent.actor.forward_cache(own_obs)
    actions = np.array(batch.actions, dtype=float)
    actions[:, i] = agent.action_scale * raw

    selection = None
    if agent.config.gate_mode == "learned":
        selection = select_neighbors(agent, own_obs, sampler, noise)
    elements = critic_elements(batch.obs, actions, batch.neighbor_ids, i)
    weights = pooling_weights(selection, b, agent.k, agent.config.gate_mode)
    q, cache = agent.critic.forward_cache(elements, weights)
    loss = -float(q.mean())
    check_finite(np.array(loss), f"actor loss of agent {i}")

    grad_elements, _, _ = agent.critic.backward(cache, np.full((b, 1), -1.0 / b))
    d = agent.obs_size
    grad_raw = agent.action_scale * grad_elements[:, 0, d : d + ACTION_SIZE]
    _, grads = agent.actor.backward(actor_cache, grad_raw)
    return ActorLoss(loss, grads)


@dataclass
class EpisodeRecord:
    """What one episode produced."""

    returns: np.ndarray
    total_reward: float
    observation_messages: int
    parameter_messages: int
    open_by_rank: np.ndarray
    exchanges: list[tuple[int, int]] = field(default_factory=list)


def make_env(nav_config: ParticleNavConfiguration) -> UseFeatures:
    """The navigation game with flat observations."""
    env = ParticleNav(nav_config)
    return UseFeatures(env, [NavigationFeatures] * nav_config.n_agents)


def make_agents(
    env: UseFeatures,
    config: DeepACConfiguration,
    gate_config: GateConfig,
    rng: np.random.Generator,
) -> list[DeepAgent]:
    """One agent per player of the game."""
    nav = cast(ParticleNav, env.unwrapped).configuration
    obs_size = int(cast(Box, env.observation_space[0]).shape[0])
    return [
        DeepAgent(
            i, obs_size, nav.visible_neighbors, config, gate_config, nav.max_acceleration, rng
        )
        for i in range(nav.n_agents)
    ]


def run_episode(
    env: UseFeatures,
    agents: Sequence[DeepAgent],
    topology: Topology,
    scheduler: Optional[Scheduler],
    sampler: GumbelSampler,
    rng: np.random.Generator,
    memory: Optional[ReplayMemory] = None,
    noise: float = 0.0,
) -> EpisodeRecord:
    """
    Run the scheduled consensus, then one episode.

    :param env: the game, with flat observations.
    :param agents: the agents.
    :param topology: neighbour function and message counters.
    :param scheduler: decides the parameter exchanges; none if None.
    :param sampler: gate noise.
    :param rng: source of the exploration noise and of the scheduler draws.
    :param memory: transitions are stored here if given.
    :param noise: scale of the exploration noise.
    :return: the per-agent discounted returns and the message counts.
    """
    n = len(agents)
    config = agents[0].config
    start_obs, start_params = topology.observation_messages, topology.parameter_messages
    exchanges: list[tuple[int, int]] = []
    if scheduler is not None:
        exchanges = scheduler.schedule_episode(agents, rng)
        topology.count_parameter_messages(
            scheduler.message_count(exchanges), agents[0].consensus_parameters().size
        )

    nav = cast(ParticleNav, env.unwrapped)
    obs, _ = env.reset()
    obs = np.asarray(obs, dtype=float)
    ids = topology.neighbors(nav.state)
    rewards_per_step = []
    open_by_rank = np.zeros(topology.k)
    message_size = agents[0].obs_size + ACTION_SIZE
    done = False
    while not done:
        actions = np.stack([agent.act(obs[i], noise, rng) for i, agent in enumerate(agents)])
        if config.gate_mode == "learned":
            opens = np.stack(
                [
                    select_neighbors(agent, obs[i], sampler).selected[0]
                    for i, agent in enumerate(agents)
                ]
            )
        else:
            opens = np.full((n, topology.k), config.gate_mode == "all")
        topology.count_observation_messages(int(opens.sum()), message_size)
        open_by_rank += opens.mean(axis=0)

        next_obs, rewards, terminated, truncated, _ = env.step(actions)
        next_obs = np.asarray(next_obs, dtype=float)
        next_ids = topology.neighbors(nav.state)
        if memory is not None:
            memory.add(obs, ids, actions, rewards, next_obs, next_ids)
        rewards_per_step.append(np.asarray(rewards, dtype=float))
        obs, ids = next_obs, next_ids
        done = terminated or truncated

    returns = np.zeros(n)
    for r in reversed(rewards_per_step):
        returns = r + config.discount * returns
    if scheduler is not None:
        scheduler.observe_returns(returns)
    return EpisodeRecord(
        returns,
        float(np.sum(rewards_per_step, axis=0).mean()),
        topology.observation_messages - start_obs,
        topology.parameter_messages - start_params,
        open_by_rank / len(rewards_per_step),
        exchanges,
    )


def update_agents(
    agents: Sequence[DeepAgent],
    memory: ReplayMemory,
    sampler: GumbelSampler,
    rng: np.random.Generator,
) -> list[TDLoss]:
    """One gradient step of every agent on a shared batch."""
    config = agents[0].config
    batch = memory.sample(config.batch_size, rng)
    next_actions = target_actions(agents, batch.next_obs)
    td = [
        td_loss_and_grads(agent, batch, td_targets(agent, batch, next_actions, sampler), sampler)
        for agent in agents
    ]
    actor = [actor_loss_and_grads(agent, batch, sampler) for agent in agents]
    # All gradients are computed before any parameter moves.
    for agent, td_loss, actor_loss in zip(agents, td, actor):
        agent.critic.set_flat(
            adam_step(agent.critic_optimizer, agent.critic.get_flat(), td_loss.critic_grads)
        )
        if config.gate_mode == "learned":
            agent.gate.set_flat(
                adam_step(agent.gate_optimizer, agent.gate.get_flat(), td_loss.gate_grads)
            )
        agent.actor.set_flat(
            adam_step(agent.actor_optimizer, agent.actor.get_flat(), actor_loss.grads)
        )
        soft_update(agent.target_critic, agent.critic, config.soft_update)
        soft_update(agent.target_actor, agent.actor, config.soft_update)
    return td


def evaluate_agents(
    env: UseFeatures,
    agents: Sequence[DeepAgent],
    sampler: GumbelSampler,
    rng: np.random.Generator,
    episodes: int,
) -> tuple[float, float]:
    """Mean and std of the episode reward of the noise-free actors."""
    topology = Topology(len(agents), agents[0].k)
    totals = [
        run_episode(env, agents, topology, None, sampler, rng).total_reward
        for _ in range(episodes)
    ]
    return float(np.mean(totals)), float(np.std(totals))


@dataclass
class DeepTrainingResult:
    """Output of 'train_deep'."""

    frame: pd.DataFrame
    evaluations: pd.DataFrame
    agents: list[DeepAgent]
    topology: Topology
    scheduler: Scheduler

    @property
    def open_rate(self) -> float:
        """Mean gate open frequency over the last tenth of the episodes."""
        ranks = [c for c in self.frame.columns if c.startswith("gate_open_rank")]
        tail = self.frame.tail(max(1, len(self.frame) // 10))
        return float(tail[ranks].to_numpy().mean())


def train_deep(
    config: Optional[DeepACConfiguration] = None,
    nav_config: Optional[ParticleNavConfiguration] = None,
    gate_config: Optional[GateConfig] = None,
    bandit_config: Optional[BanditConfiguration] = None,
    seed: int = 0,
    out_dir: Optional[Union[str, Path]] = None,
) -> DeepTrainingResult:
    """
    Train the communication-efficient actor-critic.

    Each episode runs the scheduled parameter consensus, a rollout that
    fills the replay memory, and a few gradient steps. Everything random
    derives from `seed`.

    :return: per-episode rows, evaluation rows, and the trained agents.
    """
    config = config if config is not None else DeepACConfiguration()
    nav_config = nav_config if nav_config is not None else ParticleNavConfiguration()
    gate_config = gate_config if gate_config is not None else GateConfig()
    streams = np.random.SeedSequence(seed).spawn(6)
    init_rng, rollout_rng, memory_rng, gate_rng, env_rng, eval_rng = (
        np.random.default_rng(s) for s in streams
    )

    env = make_env(nav_config)
    env.reset(seed=int(env_rng.integers(2**31)))
    eval_env = make_env(nav_config)
    eval_env.reset(seed=int(env_rng.integers(2**31)))
    agents = make_agents(env, config, gate_config, init_rng)
    sampler = GumbelSampler(gate_config.temperature, gate_rng)
    topology = Topology(nav_config.n_agents, nav_config.n_neighbors)
    scheduler = make_scheduler(
        config.scheduler, nav_config.n_agents, bandit_config, config.scheduler_frequency
    )
    memory = ReplayMemory(config.memory_capacity)
    logger.info(
        "deep actor-critic: N=%d k=%d gate=%s scheduler=%s seed=%d",
        nav_config.n_agents,
        topology.k,
        config.gate_mode,
        config.scheduler,
        seed,
    )

    recorder = MetricsRecorder(
        [
            *EPISODE_COLUMNS,
            *(f"gate_open_rank{r}" for r in range(topology.k)),
            "p_communicate",
        ],
        key="episode",
    )
    evaluations = MetricsRecorder(EVALUATION_COLUMNS, key="episode")
    noise = config.exploration_noise
    for episode in range(config.episodes):
        record = run_episode(
            env, agents, topology, scheduler, sampler, rollout_rng, memory, noise
        )
        if len(memory) >= config.batch_size:
            for _ in range(config.updates_per_episode):
                update_agents(agents, memory, sampler, memory_rng)
        noise = max(config.min_noise, noise * config.noise_decay)

        row = {
            "episode": episode,
            "return": record.total_reward,
            "obs_msgs": record.observation_messages,
            "param_msgs": record.parameter_messages,
        }
        row.update({f"gate_open_rank{r}": v for r, v in enumerate(record.open_by_rank)})
        row["p_communicate"] = (
            scheduler.communication_rate if isinstance(scheduler, BanditScheduler) else np.nan
        )
        recorder.append(row)

        if (episode + 1) % config.eval_every == 0 or episode + 1 == config.episodes:
            mean, std = evaluate_agents(
                eval_env, agents, sampler, eval_rng, config.eval_episodes
            )
            evaluations.append({"episode": episode, "eval_mean": mean, "eval_std": std})
            logger.debug("episode %d: eval %.4f ± %.4f", episode, mean, std)

    frame = recorder.to_frame()
    result = DeepTrainingResult(
        frame, evaluations.to_frame(), agents, topology, scheduler
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        nets: dict = {}
        for agent in agents:
            nets.update(agent.networks())
        save_parameters(out / "parameters", nets)
    logger.info(
        "deep actor-critic done: %d observation messages, %d parameter messages",
        topology.observation_messages,
        topology.parameter_messages,
    )
    return result
