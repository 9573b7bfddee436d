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

"""Schedulers of the pairwise parameter consensus.

Before each episode a scheduler decides which pairs of agents average their
parameters. The bi-level bandit lets each agent decide whether to
communicate (high level) and with whom (low level); both levels are
exponentially weighted forecasters trained on shaped episodic returns.
"""
import logging
from abc import ABC, abstractmethod
from collections import deque
from typing import Any, Iterable, Optional, Protocol, Sequence

import numpy as np
from scipy.special import expit, softmax

from gym_consensus.algorithms.consensus import ConsensusMatrix, apply_consensus
from gym_consensus.core.configurations import BanditConfiguration
from gym_consensus.core.constants import SHAPING_STD_FLOOR

logger = logging.getLogger(__name__)

COMMUNICATE = 0
SKIP = 1
LEVELS = ("high", "low")
_OPEN_BOUND = float(np.nextafter(1.0, 0.0))


class ConsensusParticipant(Protocol):
    """An agent whose parameters can be averaged."""

    def consensus_parameters(self) -> np.ndarray:
        """The parameters taking part in the consensus, as one vector."""

    def critic_parameters(self) -> np.ndarray:
        """The critic part of the consensus parameters."""

    def set_consensus_parameters(self, params: np.ndarray) -> None:
        """Overwrite the parameters taking part in the consensus."""


def shape_rewards(
    window_returns: Sequence[float],
    window_arms: Sequence[int],
    g: float,
    level: str,
) -> float:
    """
    Turn an episodic return into a bandit reward in (-1, 1).

    z = (g - mean) / std over the window (population std). At the high
    level z is divided by the number of communicate selections in
    `window_arms` when z >= 0, and by the number of skip selections
    otherwise. The reward is 2 * sigmoid(z) - 1.

    >>> round(shape_rewards([1.0, 2.0, 3.0], [], 3.0, "low"), 4)
    0.5458
    >>> round(shape_rewards([1.0, 2.0, 3.0], [0] * 5 + [1] * 5, 3.0, "high"), 4)
    0.1219

    :param window_returns: the returns of the last episodes, the current one included.
    :param window_arms: the high-level arms of the same episodes.
    :param g: the return of the current episode.
    :param level: "high" or "low".
    :return: the shaped reward; 0 when the window is too short or flat.
    """
    if level not in LEVELS:
        raise ValueError(f"Unknown level {level!r}")
    returns = np.asarray(window_returns, dtype=float)
    if len(returns) < 2:
        logger.warning("neutral %s-level reward: window of %d returns", level, len(returns))
        return 0.0
    std = returns.std()
    if std < SHAPING_STD_FLOOR:
        logger.warning("neutral %s-level reward: zero spread of the returns", level)
        return 0.0
    z = (g - returns.mean()) / std
    if level == "high":
        arms = np.asarray(window_arms, dtype=int)
        count = int(np.sum(arms == (COMMUNICATE if z >= 0.0 else SKIP)))
        if count == 0:
            logger.warning("neutral high-level reward: no matching arm in the window")
            return 0.0
        z = z / count
    return float(np.clip(2.0 * expit(z) - 1.0, -_OPEN_BOUND, _OPEN_BOUND))


class Exp3:
    """Exponentially weighted forecaster under bandit feedback.

    Only the pulled arm's reward is seen, so it enters the cumulative
    estimate divided by the probability of the pull. Weights are kept in
    log domain and the sampling distribution is mixed with a uniform floor.
    """

    def __init__(self, n_arms: int, learning_rate: float = 0.1, exploration: float = 0.1):
        """Initialize."""
        if n_arms < 1:
            raise ValueError("At least one arm is needed")
        self.n_arms = n_arms
        self.learning_rate = learning_rate
        self.exploration = exploration
        self.log_weights = np.zeros(n_arms)

    def probabilities(self) -> np.ndarray:
        """Sampling distribution over the arms."""
        mixed = (1.0 - self.exploration) * softmax(self.log_weights)
        return mixed + self.exploration / self.n_arms

    def sample(self, rng: np.random.Generator) -> int:
        """Draw an arm."""
        return int(rng.choice(self.n_arms, p=self.probabilities()))

    def update(self, arm: int, reward: float):
        """Credit the pulled arm with an importance-weighted reward."""
        p = self.probabilities()[arm]
        self.log_weights[arm] += self.learning_rate * reward / p
        self.log_weights -= self.log_weights.max()


class BiLevelBandit:
    """Whether to communicate, and with which peer, for one agent."""

    def __init__(
        self, agent: int, n_agents: int, config: Optional[BanditConfiguration] = None
    ):
        """Initialize."""
        if n_agents < 2:
            raise ValueError("A bandit needs at least one peer")
        config = config if config is not None else BanditConfiguration()
        self.agent = agent
        self.peers = [j for j in range(n_agents) if j != agent]
        self.high = Exp3(2, config.learning_rate, config.exploration)
        self.low = Exp3(len(self.peers), config.learning_rate, config.exploration)
        self.high_returns: deque = deque(maxlen=config.window)
        self.high_arms: deque = deque(maxlen=config.window)
        self.low_returns: deque = deque(maxlen=config.window)
        self.last_x1: Optional[int] = None
        self.last_x2: Optional[int] = None

    @property
    def p_communicate(self) -> float:
        """Current probability of the communicate arm."""
        return float(self.high.probabilities()[COMMUNICATE])

    def sample_arm(self, level: str, rng: np.random.Generator) -> int:
        """Draw an arm of one level."""
        if level not in LEVELS:
            raise ValueError(f"Unknown level {level!r}")
        return (self.high if level == "high" else self.low).sample(rng)

    def choose(self, rng: np.random.Generator) -> Optional[int]:
        """Draw the decision of an episode: a peer index, or None to skip."""
        self.last_x1 = self.sample_arm("high", rng)
        self.last_x2 = None
        if self.last_x1 == COMMUNICATE:
            self.last_x2 = self.sample_arm("low", rng)
            return self.peers[self.last_x2]
        return None

    def observe(self, g: float) -> tuple[float, Optional[float]]:
        """
        Update both levels with the return of the episode.

        The return enters the windows before it is shaped. Every episode
        enters the high-level window; only episodes with communication
        enter the low-level window.

        :return: the high-level and (if any) low-level shaped rewards.
        """
        if self.last_x1 is None:
            raise RuntimeError("observe called before choose")
        self.high_returns.append(g)
        self.high_arms.append(self.last_x1)
        r1 = shape_rewards(self.high_returns, self.high_arms, g, "high")
        self.high.update(self.last_x1, r1)
        r2 = None
        if self.last_x1 == COMMUNICATE and self.last_x2 is not None:
            self.low_returns.append(g)
            r2 = shape_rewards(self.low_returns, (), g, "low")
            self.low.update(self.last_x2, r2)
        return r1, r2


def gossip_exchange(a: ConsensusParticipant, b: ConsensusParticipant):
    """Both agents take the average of their parameters."""
    mixed = apply_consensus(
        [a.consensus_parameters(), b.consensus_parameters()], ConsensusMatrix.uniform(2)
    )
    a.set_consensus_parameters(mixed[0])
    b.set_consensus_parameters(mixed[1])


class Scheduler(ABC):
    """Decides the consensus exchanges of each episode."""

    name = "scheduler"

    def __init__(self, n_agents: int):
        """Initialize."""
        self.n_agents = n_agents
        self.records: list[dict[str, Any]] = []
        self.episode = 0

    @abstractmethod
    def schedule_episode(
        self, agents: Sequence[ConsensusParticipant], rng: np.random.Generator
    ) -> list[tuple[int, int]]:
        """Perform the exchanges of the next episode and return them."""

    def observe_returns(self, returns: np.ndarray):
        """Receive the per-agent returns of the episode."""
        self.episode += 1

    def message_count(self, exchanges: list[tuple[int, int]]) -> int:
        """Parameter messages of a list of exchanges."""
        return len(exchanges)

    def _log(self, agent: int, x1: int, x2: Optional[int], r1=np.nan, r2=np.nan, p=np.nan):
        self.records.append(
            {
                "episode": self.episode,
                "agent": agent,
                "x1": x1,
                "x2": -1 if x2 is None else x2,
                "r1": r1,
                "r2": np.nan if r2 is None else r2,
                "p_communicate": p,
            }
        )


class NoConsensus(Scheduler):
    """Independent learners: no exchange."""

    name = "none"

    def schedule_episode(self, agents, rng):
        """No exchange."""
        return []


class FullConsensus(Scheduler):
    """Every agent averages with every other agent before every episode."""

    name = "full"

    def schedule_episode(self, agents, rng):
        """Uniform average of all parameters."""
        mixed = apply_consensus(
            [a.consensus_parameters() for a in agents], ConsensusMatrix.uniform(len(agents))
        )
        for agent, params in zip(agents, mixed):
            agent.set_consensus_parameters(params)
        return [(i, j) for i in range(len(agents)) for j in range(len(agents)) if i != j]


class RandomScheduler(Scheduler):
    """Each agent communicates with probability f, with a uniformly random peer."""

    name = "random"

    def __init__(self, n_agents: int, frequency: float):
        """Initialize."""
        super().__init__(n_agents)
        self.frequency = frequency

    def schedule_episode(self, agents, rng):
        """Independent coin flips."""
        exchanges = []
        for i in range(len(agents)):
            communicate = rng.random() < self.frequency
            if communicate:
                j = int(rng.choice([k for k in range(len(agents)) if k != i]))
                gossip_exchange(agents[i], agents[j])
                exchanges.append((i, j))
            self._log(i, COMMUNICATE if communicate else SKIP, None, p=self.frequency)
        return exchanges


class RuleBasedScheduler(Scheduler):
    """Communicate with probability f, with the peer whose critic moved most.

    Each agent caches the critic parameters of its peers at their last
    exchange and picks the peer j maximizing the l1 distance between its own
    critic and the cached copy of j. Actor parameters play no part.
    """

    name = "rule"

    def __init__(self, n_agents: int, frequency: float):
        """Initialize."""
        super().__init__(n_agents)
        self.frequency = frequency
        self.caches: list[dict[int, np.ndarray]] = [{} for _ in range(n_agents)]

    def rule_based_select(
        self, agent: int, params: np.ndarray, rng: np.random.Generator
    ) -> int:
        """The peer with the highest score; a random peer before any exchange."""
        peers = [j for j in range(self.n_agents) if j != agent]
        cache = self.caches[agent]
        if not cache:
            return int(rng.choice(peers))
        scores = [
            float(np.abs(params - cache[j]).sum()) if j in cache else np.inf for j in peers
        ]
        return peers[int(np.argmax(scores))]

    def schedule_episode(self, agents, rng):
        """Coin flip, then the rule."""
        exchanges = []
        for i in range(len(agents)):
            communicate = rng.random() < self.frequency
            j = None
            if communicate:
                j = self.rule_based_select(i, agents[i].critic_parameters(), rng)
                gossip_exchange(agents[i], agents[j])
                self.caches[i][j] = agents[j].critic_parameters().copy()
                self.caches[j][i] = agents[i].critic_parameters().copy()
                exchanges.append((i, j))
            self._log(i, COMMUNICATE if communicate else SKIP, j, p=self.frequency)
        return exchanges


class BanditScheduler(Scheduler):
    """One bi-level bandit per agent."""

    name = "bandit"

    def __init__(self, n_agents: int, config: Optional[BanditConfiguration] = None):
        """Initialize."""
        super().__init__(n_agents)
        self.bandits = [BiLevelBandit(i, n_agents, config) for i in range(n_agents)]

    def schedule_episode(self, agents, rng):
        """Each agent draws its decision; exchanges run in agent order."""
        exchanges = []
        for i, bandit in enumerate(self.bandits):
            j = bandit.choose(rng)
            if j is not None:
                gossip_exchange(agents[i], agents[j])
                exchanges.append((i, j))
        return exchanges

    def observe_returns(self, returns: np.ndarray):
        """Update the bandits with each agent's own return."""
        for i, bandit in enumerate(self.bandits):
            x1, x2 = bandit.last_x1, bandit.last_x2
            r1, r2 = bandit.observe(float(returns[i]))
            logger.debug("agent %d: x1=%s x2=%s r1=%.4f r2=%s", i, x1, x2, r1, r2)
            self._log(i, int(x1) if x1 is not None else SKIP, x2, r1, r2, bandit.p_communicate)
        super().observe_returns(returns)

    @property
    def communication_rate(self) -> float:
        """Mean probability of communicating over the agents."""
        return float(np.mean([b.p_communicate for b in self.bandits]))


SCHEDULER_CLASSES = {
    cls.name: cls
    for cls in (NoConsensus, FullConsensus, RandomScheduler, RuleBasedScheduler, BanditScheduler)
}


def make_scheduler(
    name: str,
    n_agents: int,
    config: Optional[BanditConfiguration] = None,
    frequency: float = 0.1,
) -> Scheduler:
    """Build a scheduler by name: bandit, random, rule, full or none."""
    if name == "bandit":
        return BanditScheduler(n_agents, config)
    if name in ("random", "rule"):
        return SCHEDULER_CLASSES[name](n_agents, frequency)  # type: ignore
    if name in ("full", "none"):
        return SCHEDULER_CLASSES[name](n_agents)
    raise ValueError(f"Unknown scheduler {name!r}; choose from {list(SCHEDULER_CLASSES)}")


def exchange_counts(exchanges: Iterable[tuple[int, int]], n_agents: int) -> np.ndarray:
    """Number of exchanges each agent took part in."""
    counts = np.zeros(n_agents, dtype=int)
    for i, j in exchanges:
        counts[i] += 1
        counts[j] += 1
    return counts
