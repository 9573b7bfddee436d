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

"""Decentralized linear actor-critic with critic and actor consensus.

At every step each agent i

1. moves its actor along Q(s, a; w^i) * grad log pi^i(a^i | o^i), using its
   current critic w^i;
2. moves its critic along the local TD error, delta^i * phi(s, a);
3. replaces both parameters with the mixture sum_j c(i, j) x^j given by the
   consensus matrices of the step.

Policies are softmax-linear: pi^i(. | x) = softmax(theta^i x), where x is the
feature vector of the agent's observation.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Protocol, Union

import numpy as np
import pandas as pd
from scipy.special import softmax

from gym_consensus import utils
from gym_consensus.algorithms.consensus import (
    Assumption,
    AssumptionViolation,
    ConsensusMatrix,
    ConsensusProcess,
    ScheduleKind,
    StepSchedule,
    apply_consensus,
    disagreement,
)
from gym_consensus.algorithms.exact_eval import FactoredPolicy, evaluate, solve_mspbe
from gym_consensus.algorithms.features import FeatureMap
from gym_consensus.algorithms.nets import AdamState, DivergenceError, adam_step
from gym_consensus.core.configurations import LinearACConfiguration
from gym_consensus.core.games import FiniteMG, ObservationMap
from gym_consensus.harness.metrics import MetricsRecorder

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12
METRIC_COLUMNS = ["step", "J", "omega_disagreement", "theta_disagreement", "omega_oracle_dist"]


@dataclass(frozen=True)
class Transition:
    """One on-policy sample (s_t, a_t, r_t, s_t+1, a_t+1)."""

    inputs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    phi: np.ndarray
    phi_next: np.ndarray
    discount: float


@dataclass(frozen=True)
class ExpectedTerms:
    """The quantities an update averages over, one row per (state, joint action).

    `next_phi` is E[phi(s', a')] under the policy, zero after termination.
    """

    weights: np.ndarray
    phi: np.ndarray
    next_phi: np.ndarray
    rewards: np.ndarray
    inputs: np.ndarray
    actions: np.ndarray
    discount: float


Sample = Union[Transition, ExpectedTerms]


class LinearEnvironment(Protocol):
    """What the trainer needs from an environment."""

    n_agents: int
    n_local_actions: int
    discount: float

    @property
    def feature_dim(self) -> int:
        """Critic feature dimension K."""

    def policy_inputs(self) -> np.ndarray:
        """Observation features, shape (N, X, d): row x of agent i is input x."""

    def reset(self, rng: np.random.Generator) -> int:
        """Sample an initial state."""

    def observe(self, state: int) -> np.ndarray:
        """Index of the policy input of each agent."""

    def step(
        self, state: int, actions: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, int, bool]:
        """Per-agent rewards, next state and termination."""

    def features(self, state: int, actions: np.ndarray) -> np.ndarray:
        """Critic features phi(s, a)."""

    def exact_return(self, tables: np.ndarray) -> float:
        """Exact value of the policy with per-agent tables of shape (N, X, |A|)."""

    def oracle_weights(self, tables: np.ndarray) -> Optional[np.ndarray]:
        """Fixed point of the projected Bellman equation of the policy."""

    def expected_terms(self, tables: np.ndarray) -> ExpectedTerms:
        """Rows of the expected update."""


@dataclass
class LinearACState:
    """Critic weights (N, K), actor logits (N, |A|, d) and the step counter."""

    omegas: np.ndarray
    thetas: np.ndarray
    t: int = 0
    critic_optimizer: Optional[AdamState] = None
    actor_optimizer: Optional[AdamState] = None

    def __post_init__(self):
        """Check dimensions."""
        if self.omegas.ndim != 2 or self.thetas.ndim != 3:
            raise ValueError("omegas must be (N, K) and thetas (N, |A|, d)")
        if self.omegas.shape[0] != self.thetas.shape[0]:
            raise ValueError("omegas and thetas disagree on the number of agents")

    @property
    def n_agents(self) -> int:
        """Get the number of agents."""
        return self.omegas.shape[0]

    @classmethod
    def zeros(
        cls,
        n_agents: int,
        feature_dim: int,
        n_actions: int,
        input_dim: int,
        learning_rate: Optional[float] = None,
    ) -> "LinearACState":
        """Zero critics and uniform policies; Adam states when a learning rate is given."""
        omegas = np.zeros((n_agents, feature_dim))
        thetas = np.zeros((n_agents, n_actions, input_dim))
        critic_opt = actor_opt = None
        if learning_rate is not None:
            critic_opt = AdamState.zeros(omegas.shape, learning_rate)
            actor_opt = AdamState.zeros(thetas.shape, learning_rate)
        return cls(omegas, thetas, 0, critic_opt, actor_opt)

    def policy_tables(self, inputs: np.ndarray) -> np.ndarray:
        """pi^i(. | x) for every agent and input: shape (N, X, |A|)."""
        return softmax(np.einsum("nad,nxd->nxa", self.thetas, inputs), axis=2)


def td_error(
    omega: np.ndarray, phi_t: np.ndarray, phi_next: np.ndarray, reward: float, discount: float
) -> float:
    """
    Local TD error r + gamma phi_next . w - phi_t . w.

    >>> td_error(np.array([1.0]), np.array([2.0]), np.array([1.0]), 1.0, 0.5)
    -0.5

    :raises ValueError: if the dimensions differ.
    """
    if not np.shape(omega) == np.shape(phi_t) == np.shape(phi_next):
        raise ValueError("omega, phi_t and phi_next must have the same dimension")
    return float(reward + discount * phi_next @ omega - phi_t @ omega)


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One action index per row of a (N, |A|) probability table."""
    u = rng.random(probs.shape[0])
    actions = (np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1)
    return np.minimum(actions, probs.shape[1] - 1)


def _local_update(
    params: np.ndarray,
    direction: np.ndarray,
    schedule: StepSchedule,
    t: int,
    optimizer: Optional[AdamState],
) -> np.ndarray:
    """Ascend along `direction`."""
    if schedule.kind == ScheduleKind.ADAPTIVE_MOMENT:
        if optimizer is None:
            raise ValueError("The adaptive-moment schedule needs an optimizer state")
        return adam_step(optimizer, params, -direction)
    return params + schedule(t) * direction


def critic_direction(omegas: np.ndarray, sample: Sample) -> np.ndarray:
    """delta^i * phi for every agent, or its expectation: shape (N, K)."""
    if isinstance(sample, ExpectedTerms):
        deltas = (
            sample.rewards
            + sample.discount * sample.next_phi @ omegas.T
            - sample.phi @ omegas.T
        )
        return np.einsum("m,mn,mk->nk", sample.weights, deltas, sample.phi)
    deltas = (
        sample.rewards + sample.discount * omegas @ sample.phi_next - omegas @ sample.phi
    )
    return deltas[:, None] * sample.phi[None, :]


def _scores(thetas: np.ndarray, x: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """grad log pi(a | x) of softmax-linear policies, one per agent."""
    probs = softmax(np.einsum("nad,nd->na", thetas, x), axis=1)
    chosen = probs[np.arange(len(actions)), actions]
    if np.any(chosen < PROBABILITY_FLOOR):
        logger.warning("sampled actions with probability below %g", PROBABILITY_FLOOR)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(actions)), actions] = 1.0
    return (onehot - probs)[:, :, None] * x[:, None, :]


def actor_direction(
    state: LinearACState, sample: Sample, inputs: np.ndarray
) -> np.ndarray:
    """Q(s, a; w^i) * grad log pi^i(a^i | o^i), or its expectation: shape (N, |A|, d)."""
    n = state.n_agents
    if isinstance(sample, ExpectedTerms):
        q = sample.phi @ state.omegas.T
        result = np.zeros_like(state.thetas)
        for i in range(n):
            x = inputs[i, sample.inputs[:, i]]
            logits = x @ state.thetas[i].T
            probs = softmax(logits, axis=1)
            onehot = np.zeros_like(probs)
            onehot[np.arange(len(probs)), sample.actions[:, i]] = 1.0
            result[i] = np.einsum(
                "m,m,ma,md->ad", sample.weights, q[:, i], onehot - probs, x
            )
        return result
    x = inputs[np.arange(n), sample.inputs]
    q = state.omegas @ sample.phi
    return q[:, None, None] * _scores(state.thetas, x, sample.actions)


def critic_step(
    state: LinearACState,
    sample: Sample,
    schedule: StepSchedule,
    c: ConsensusMatrix,
) -> LinearACState:
    """Local TD step of every critic, then consensus."""
    if sample.phi.shape[-1] != state.omegas.shape[1]:
        raise ValueError("Features and critic weights have different dimensions")
    local = _local_update(
        state.omegas,
        critic_direction(state.omegas, sample),
        schedule,
        state.t,
        state.critic_optimizer,
    )
    return replace(state, omegas=apply_consensus(local, c))


def actor_step(
    state: LinearACState,
    sample: Sample,
    schedule: StepSchedule,
    c: ConsensusMatrix,
    inputs: np.ndarray,
) -> LinearACState:
    """Local policy-gradient step of every actor, then consensus.

    The identity matrix gives the baseline without actor consensus.
    """
    local = _local_update(
        state.thetas,
        actor_direction(state, sample, inputs),
        schedule,
        state.t,
        state.actor_optimizer,
    )
    return replace(state, thetas=apply_consensus(local, c))


class FiniteGameEnvironment:
    """A finite game seen by the linear trainer.

    Policy inputs are one-hot encodings of the observations.
    """

    def __init__(
        self, mg: FiniteMG, obs: ObservationMap, features: Optional[FeatureMap] = None
    ):
        """Initialize."""
        obs.check_compatible(mg)
        if len(set(mg.action_sizes)) != 1:
            raise ValueError("All agents need the same number of local actions")
        self.mg = mg
        self.obs = obs
        self.feature_map = features if features is not None else FeatureMap.tabular(mg)
        if self.feature_map.n_actions != mg.n_actions:
            raise ValueError("The feature map does not fit the game")
        self.n_agents = mg.n_agents
        self.n_local_actions = mg.action_sizes[0]
        self.discount = mg.discount
        self._inputs = np.tile(np.eye(obs.n_observations), (mg.n_agents, 1, 1))
        self._oracle_failed = False

    @property
    def feature_dim(self) -> int:
        """Critic feature dimension K."""
        return self.feature_map.dim

    def policy_inputs(self) -> np.ndarray:
        """One-hot observation features, shape (N, X, X)."""
        return self._inputs

    def reset(self, rng: np.random.Generator) -> int:
        """Sample an initial state."""
        return self.mg.sample_initial(rng)

    def observe(self, state: int) -> np.ndarray:
        """Observation index of each agent."""
        return self.obs.table[:, state]

    def step(
        self, state: int, actions: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, int, bool]:
        """Sample a transition of the game."""
        joint = utils.encode(actions, self.mg.action_sizes)
        return self.mg.step(state, joint, rng)

    def features(self, state: int, actions: np.ndarray) -> np.ndarray:
        """phi(s, a)."""
        return self.feature_map.phi(state, utils.encode(actions, self.mg.action_sizes))

    def policy(self, tables: np.ndarray) -> FactoredPolicy:
        """The factored policy of per-agent tables."""
        return FactoredPolicy(tuple(tables), self.obs)

    def exact_return(self, tables: np.ndarray) -> float:
        """J of the policy."""
        return evaluate(self.mg, self.policy(tables)).J

    def oracle_weights(self, tables: np.ndarray) -> Optional[np.ndarray]:
        """w_pi, or None when the features are rank deficient on the visited pairs."""
        try:
            return solve_mspbe(self.mg, self.policy(tables), self.feature_map).omega
        except AssumptionViolation as e:
            if not self._oracle_failed:
                logger.warning("no critic oracle: %s", e)
                self._oracle_failed = True
            return None

    def expected_terms(self, tables: np.ndarray) -> ExpectedTerms:
        """Rows of the expected update over the visited (state, action) pairs."""
        mg = self.mg
        result = evaluate(mg, self.policy(tables))
        cube = np.array(self.feature_map.cube())
        cube[~mg.nonterminal_mask] = 0.0
        next_phi = mg.transition.reshape(-1, mg.n_states) @ np.einsum(
            "tb,tbk->tk", result.policy, cube
        )
        weights = result.d_pi.reshape(-1)
        rows = np.nonzero(weights > 0.0)[0]
        states, actions = np.divmod(rows, mg.n_actions)
        return ExpectedTerms(
            weights[rows],
            self.feature_map.matrix[rows],
            next_phi[rows],
            mg.rewards.reshape(-1, mg.n_agents)[rows],
            self.obs.table[:, states].T,
            mg.action_table[actions],
            mg.discount,
        )


@dataclass
class TrainingResult:
    """Learning curve and final iterates of one run."""

    frame: pd.DataFrame
    state: LinearACState
    tail_omegas: np.ndarray
    oracle: Optional[np.ndarray]

    def tail_oracle_distance(self) -> float:
        """max_i ||tail-averaged w^i - w_pi|| for the final policy."""
        if self.oracle is None:
            return float("nan")
        return float(np.linalg.norm(self.tail_omegas - self.oracle, axis=1).max())


def make_schedules(config: LinearACConfiguration) -> tuple[StepSchedule, StepSchedule]:
    """The (critic, actor) step sizes of a configuration."""
    kind = ScheduleKind(config.schedule)
    if kind == ScheduleKind.POWER_DECAY:
        return (
            StepSchedule(kind, config.critic_exponent, config.critic_scale),
            StepSchedule(kind, config.actor_exponent, config.actor_scale),
        )
    return StepSchedule(kind, scale=config.learning_rate), StepSchedule(
        kind, scale=config.learning_rate
    )


def _metrics(
    env: LinearEnvironment, state: LinearACState, inputs: np.ndarray
) -> tuple[dict[str, float], Optional[np.ndarray]]:
    tables = state.policy_tables(inputs)
    oracle = env.oracle_weights(tables)
    distance = (
        float(np.linalg.norm(state.omegas - oracle, axis=1).max())
        if oracle is not None
        else float("nan")
    )
    row = {
        "step": state.t,
        "J": env.exact_return(tables),
        "omega_disagreement": disagreement(state.omegas)[1],
        "theta_disagreement": disagreement(state.thetas.reshape(state.n_agents, -1))[1],
        "omega_oracle_dist": distance,
    }
    return row, oracle


def train(
    env: LinearEnvironment,
    config: Optional[LinearACConfiguration] = None,
    seed: int = 0,
    initial: Optional[LinearACState] = None,
    recorder: Optional[MetricsRecorder] = None,
) -> TrainingResult:
    """
    Run the decentralized actor-critic.

    Each step uses one on-policy transition (sampled mode) or the exact
    expectation of the update (expected mode). The actor moves first, using
    the critic weights of the same step. J is computed exactly.

    :param env: the environment.
    :param config: the trainer configuration.
    :param seed: seed of the only random generator of the run.
    :param initial: the initial iterates; zeros by default. A resumed run
        counts its steps on from those of `initial`.
    :param recorder: where the metric rows go; a fresh recorder if None.
        A recorder that already ends at the starting step keeps its row.
    :return: the learning curve and the final iterates.
    :raises DivergenceError: if some critic norm exceeds the threshold.
    :raises ValueError: if the recorder already holds later steps.
    """
    config = config if config is not None else LinearACConfiguration()
    rng = np.random.default_rng(seed)
    inputs = env.policy_inputs()
    critic_schedule, actor_schedule = make_schedules(config)
    adaptive = critic_schedule.kind == ScheduleKind.ADAPTIVE_MOMENT
    state = (
        initial
        if initial is not None
        else LinearACState.zeros(
            env.n_agents,
            env.feature_dim,
            env.n_local_actions,
            inputs.shape[2],
            config.learning_rate if adaptive else None,
        )
    )
    critic_consensus = ConsensusProcess(config.critic_consensus, env.n_agents)
    actor_consensus = ConsensusProcess(config.actor_consensus, env.n_agents)
    tail_start = int(config.steps * (1.0 - config.tail_fraction))
    tail_sum = np.zeros_like(state.omegas)

    logger.info(
        "training %d agents for %d steps (%s, critic=%s, actor=%s)",
        env.n_agents,
        config.steps,
        config.mode,
        config.critic_consensus,
        config.actor_consensus,
    )
    row, oracle = _metrics(env, state, inputs)
    recorder = recorder if recorder is not None else MetricsRecorder(METRIC_COLUMNS)
    if recorder.last_key != row["step"]:
        recorder.append(row)
    start = state.t

    current: Optional[int] = None
    obs_idx = actions = np.zeros(env.n_agents, dtype=int)
    for t in range(config.steps):
        sample: Sample
        if config.mode == "expected":
            sample = env.expected_terms(state.policy_tables(inputs))
        else:
            tables = state.policy_tables(inputs)
            if current is None:
                current = env.reset(rng)
                obs_idx = env.observe(current)
                actions = sample_actions(tables[np.arange(env.n_agents), obs_idx], rng)
            rewards, next_state, done = env.step(current, actions, rng)
            phi = env.features(current, actions)
            if done:
                phi_next = np.zeros_like(phi)
                next_obs = next_actions = obs_idx
            else:
                next_obs = env.observe(next_state)
                next_actions = sample_actions(
                    tables[np.arange(env.n_agents), next_obs], rng
                )
                phi_next = env.features(next_state, next_actions)
            sample = Transition(obs_idx, actions, rewards, phi, phi_next, env.discount)
            current = None if done else next_state
            obs_idx, actions = next_obs, next_actions

        c_actor = actor_consensus(rng)
        c_critic = critic_consensus(rng)
        if config.train_actor:
            state = actor_step(state, sample, actor_schedule, c_actor, inputs)
        state = critic_step(state, sample, critic_schedule, c_critic)
        state.t = start + t + 1

        norm = float(np.linalg.norm(state.omegas, axis=1).max())
        if not np.isfinite(norm) or norm > config.divergence_threshold:
            raise DivergenceError(
                f"critic norm {norm:.3g} above {config.divergence_threshold:g} at step "
                f"{state.t}: {Assumption.STABILITY.label} does not hold"
            )
        if t + 1 > tail_start:
            tail_sum += state.omegas
        if (t + 1) % config.eval_every == 0 or t + 1 == config.steps:
            row, oracle = _metrics(env, state, inputs)
            recorder.append(row)
            logger.debug("step %d: %s", state.t, row)

    tail_omegas = tail_sum / max(config.steps - tail_start, 1)
    frame = recorder.to_frame()
    logger.info("final J = %.6f", frame["J"].iloc[-1])
    return TrainingResult(frame, state, tail_omegas, oracle)


def area_under_curve(frame: pd.DataFrame) -> float:
    """Mean of J over the evaluation points."""
    return float(frame["J"].mean())


__all__ = [
    "ExpectedTerms",
    "FeatureMap",
    "FiniteGameEnvironment",
    "LinearACState",
    "Transition",
    "actor_step",
    "critic_step",
    "sample_actions",
    "td_error",
    "train",
]
