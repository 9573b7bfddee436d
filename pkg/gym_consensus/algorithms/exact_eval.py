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

"""Exact policy evaluation and optimality oracles for finite Markov games."""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Hashable, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from gym_consensus.algorithms.features import FeatureMap
from gym_consensus.core.games import FiniteMG, ObservationMap
from gym_consensus.core.homogeneity import BudgetExceededError

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12
ROW_SUM_TOLERANCE = 1e-12
DEFAULT_POLICY_BUDGET = 200_000
GRID_STEP = 0.01
REFINE_TOLERANCE = 1e-10


class SingularSystemError(ValueError):
    """The evaluation equations have no unique solution."""


class PolicyClass(Enum):
    """Classes of decentralized policies."""

    STATE_BASED = "state_based"
    OBS_BASED = "obs_based"
    OBS_BASED_SHARED = "obs_based_shared"


@dataclass(frozen=True)
class FactoredPolicy:
    """Independent per-agent policies.

    Row x of `tables[i]` is pi^i(. | x), where x is a joint state index when
    `observations` is None and an observation index otherwise.
    """

    tables: tuple[np.ndarray, ...]
    observations: Optional[ObservationMap] = None
    shared: bool = False

    def __post_init__(self):
        """Validate."""
        tables = tuple(np.array(t, dtype=float) for t in self.tables)
        for i, table in enumerate(tables):
            if table.ndim != 2 or np.any(table < 0.0):
                raise ValueError(f"Policy table of agent {i} is not a probability table")
            if np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
                raise ValueError(f"Rows of the policy of agent {i} must sum to 1")
            table.setflags(write=False)
        if self.shared and any(not np.array_equal(tables[0], t) for t in tables[1:]):
            raise ValueError("A shared policy needs identical tables")
        object.__setattr__(self, "tables", tables)

    @property
    def n_agents(self) -> int:
        """Get the number of agents."""
        return len(self.tables)

    def joint_matrix(self, mg: FiniteMG) -> np.ndarray:
        """The joint policy pi(a | s) as an array of shape (|S|, |A|)."""
        if self.n_agents != mg.n_agents:
            raise ValueError("The policy and the game have a different number of agents")
        if self.observations is not None:
            self.observations.check_compatible(mg)
        result = np.ones((mg.n_states, mg.n_actions))
        for i, table in enumerate(self.tables):
            rows = (
                np.arange(mg.n_states)
                if self.observations is None
                else self.observations.table[i]
            )
            if table.shape[1] != mg.action_sizes[i]:
                raise ValueError(f"Policy of agent {i} has the wrong number of actions")
            result *= table[rows][:, mg.action_table[:, i]]
        return result

    @classmethod
    def uniform(
        cls, mg: FiniteMG, observations: Optional[ObservationMap] = None, shared: bool = False
    ) -> "FactoredPolicy":
        """Every agent picks actions uniformly at random."""
        rows = mg.n_states if observations is None else observations.n_observations
        tables = tuple(np.full((rows, k), 1.0 / k) for k in mg.action_sizes)
        return cls(tables, observations, shared)

    @classmethod
    def deterministic(
        cls,
        mg: FiniteMG,
        choices: Sequence[Sequence[int]],
        observations: Optional[ObservationMap] = None,
        shared: bool = False,
    ) -> "FactoredPolicy":
        """Agent i plays local action index choices[i][x] on input x."""
        tables = []
        for i, row in enumerate(choices):
            table = np.zeros((len(row), mg.action_sizes[i]))
            table[np.arange(len(row)), np.asarray(row, dtype=int)] = 1.0
            tables.append(table)
        return cls(tuple(tables), observations, shared)


@dataclass(frozen=True)
class EvalResult:
    """Values of a joint policy."""

    J: float
    V: np.ndarray
    Q: np.ndarray
    d_pi: np.ndarray
    policy: np.ndarray


@dataclass(frozen=True)
class MspbeSolution:
    """Fixed point of the projected Bellman equation."""

    omega: np.ndarray
    residual: float
    rows: np.ndarray


@dataclass(frozen=True)
class BruteForceResult:
    """Best policy of a class."""

    policy_class: PolicyClass
    value: float
    policy: FactoredPolicy
    deterministic_value: float
    stochastic_value: Optional[float] = None
    evaluated: int = 0


@dataclass(frozen=True)
class PolicyClassComparison:
    """Optima of the three policy classes on one game."""

    game: str
    results: dict[PolicyClass, BruteForceResult] = field(default_factory=dict)

    @property
    def values(self) -> dict[str, float]:
        """Optimal value per class."""
        return {k.value: r.value for k, r in self.results.items()}

    @property
    def equal(self) -> bool:
        """Whether sharing one observation-based policy loses nothing."""
        values = list(self.values.values())
        return bool(np.allclose(values, values[0], rtol=0.0, atol=1e-9))

    def to_dict(self) -> dict[str, Any]:
        """Encode into a JSON-friendly dictionary."""
        return {
            "game": self.game,
            "values": self.values,
            "equal": self.equal,
            "stochastic_shared": self.results[PolicyClass.OBS_BASED_SHARED].stochastic_value,
        }


def solve_linear(matrix: np.ndarray, rhs: np.ndarray, what: str = "system") -> np.ndarray:
    """Solve a square system by LU with partial pivoting.

    :raises SingularSystemError: if the matrix is numerically singular.
    """
    cond = np.linalg.cond(matrix) if matrix.size else 1.0
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularSystemError(f"The {what} is singular (condition number {cond:.3g})")
    if cond > CONDITION_WARNING:
        logger.warning("ill-conditioned %s: condition number %.3g", what, cond)
    lu_and_piv = scipy.linalg.lu_factor(matrix)
    return scipy.linalg.lu_solve(lu_and_piv, rhs)


def _reachable(mg: FiniteMG, start: np.ndarray, step: np.ndarray) -> np.ndarray:
    reached = start.copy()
    frontier = start.copy()
    while frontier.any():
        nxt = (step[frontier].sum(axis=0) > 0.0) & ~reached
        reached |= nxt
        frontier = nxt
    return reached


def _occupancy(mg: FiniteMG, p_pi: np.ndarray) -> np.ndarray:
    nonterminal = mg.nonterminal_mask
    mu = mg.initial_dist
    eta = np.zeros(mg.n_states)
    if mg.is_episodic:
        inner = np.eye(int(nonterminal.sum())) - p_pi[np.ix_(nonterminal, nonterminal)]
        try:
            eta[nonterminal] = solve_linear(inner.T, mu[nonterminal], "visit equations")
        except SingularSystemError:
            logger.warning("episodes may not end; using the discounted occupancy")
            inner = np.eye(int(nonterminal.sum())) - mg.discount * p_pi[
                np.ix_(nonterminal, nonterminal)
            ]
            eta[nonterminal] = solve_linear(inner.T, mu[nonterminal], "occupancy equations")
        return eta

    reach = _reachable(mg, mu > 0.0, p_pi)
    idx = np.nonzero(reach)[0]
    sub = p_pi[np.ix_(idx, idx)]
    balance = sub.T - np.eye(len(idx))
    if np.linalg.matrix_rank(balance) == len(idx) - 1:
        system = np.vstack([balance, np.ones((1, len(idx)))])
        rhs = np.zeros(len(idx) + 1)
        rhs[-1] = 1.0
        solution = np.linalg.lstsq(system, rhs, rcond=None)[0]
        eta[idx] = np.clip(solution, 0.0, None)
    else:
        logger.warning("several recurrent classes; using the discounted occupancy")
        inner = np.eye(mg.n_states) - mg.discount * p_pi
        eta = solve_linear(inner.T, (1.0 - mg.discount) * mu, "occupancy equations")
    return eta


def evaluate_matrix(mg: FiniteMG, policy: np.ndarray) -> EvalResult:
    """
    Evaluate a joint policy given as a matrix pi(a | s).

    :param mg: the game.
    :param policy: array of shape (|S|, |A|) with rows summing to 1.
    :return: the exact values.
    """
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mg.n_states, mg.n_actions):
        raise ValueError("The policy matrix has the wrong shape")
    rbar = mg.mean_reward
    p_pi = np.einsum("sa,sat->st", policy, mg.transition)
    r_pi = (policy * rbar).sum(axis=1)

    nonterminal = mg.nonterminal_mask
    values = np.zeros(mg.n_states)
    inner = np.eye(int(nonterminal.sum())) - mg.discount * p_pi[
        np.ix_(nonterminal, nonterminal)
    ]
    values[nonterminal] = solve_linear(inner, r_pi[nonterminal], "evaluation system")
    q = rbar + mg.discount * mg.transition @ values
    eta = _occupancy(mg, p_pi)
    d_pi = eta[:, None] * policy
    d_pi[~nonterminal] = 0.0
    total = d_pi.sum()
    if total <= 0.0:
        raise ValueError("The initial distribution has no mass on non-terminal states")
    return EvalResult(float(mg.initial_dist @ values), values, q, d_pi / total, policy)


def evaluate(mg: FiniteMG, policy: Union[FactoredPolicy, np.ndarray]) -> EvalResult:
    """
    Evaluate a policy exactly.

    V solves (I - gamma P_pi) V = r_pi on the non-terminal states and is 0 on
    terminal states; J = sum_s mu(s) V(s). For episodic games d_pi is the
    normalized expected number of visits per episode, otherwise the
    stationary distribution of the chain started from mu.

    :param mg: the game.
    :param policy: a factored policy or a joint policy matrix.
    :return: the values.
    """
    matrix = policy.joint_matrix(mg) if isinstance(policy, FactoredPolicy) else policy
    return evaluate_matrix(mg, matrix)


def solve_mspbe(
    mg: FiniteMG,
    policy: Union[FactoredPolicy, np.ndarray],
    features: FeatureMap,
    result: Optional[EvalResult] = None,
) -> MspbeSolution:
    """
    Solve Phi^T D (T(Phi w) - Phi w) = 0 for the critic weights w.

    The system is A w = b with A = Phi^T D (I - gamma P_pi) Phi and
    b = Phi^T D r, restricted to the (state, action) pairs with d_pi > 0.
    Features of terminal states count as zero.

    :param mg: the game.
    :param policy: the evaluated policy.
    :param features: the feature map.
    :param result: a precomputed evaluation of the policy.
    :return: the weights and the residual of the fixed-point equation.
    """
    if features.n_actions != mg.n_actions or features.n_states != mg.n_states:
        raise ValueError("The feature map does not fit the game")
    result = result if result is not None else evaluate(mg, policy)
    pi = result.policy
    cube = np.array(features.cube())
    cube[~mg.nonterminal_mask] = 0.0
    next_expected = mg.transition.reshape(-1, mg.n_states) @ np.einsum("tb,tbk->tk", pi, cube)

    d = result.d_pi.reshape(-1)
    rows = np.nonzero(d > 0.0)[0]
    phi = cube.reshape(-1, features.dim)[rows]
    features.check_full_rank(rows)
    weighted = phi.T * d[rows]
    a = weighted @ (phi - mg.discount * next_expected[rows])
    b = weighted @ mg.mean_reward.reshape(-1)[rows]
    omega = solve_linear(a, b, "projected Bellman system")
    residual = float(np.linalg.norm(b - a @ omega))
    return MspbeSolution(omega, residual, rows)


def _support_states(mg: FiniteMG) -> np.ndarray:
    """Non-terminal states that matter for the return, heaviest first."""
    if mg.is_one_step:
        mask = (mg.initial_dist > 0.0) & mg.nonterminal_mask
    else:
        step = (mg.transition.sum(axis=1) > 0.0).astype(float)
        step[~mg.nonterminal_mask] = 0.0
        mask = _reachable(mg, mg.initial_dist > 0.0, step) & mg.nonterminal_mask
    states = np.nonzero(mask)[0]
    return states[np.argsort(-mg.initial_dist[states], kind="stable")]


def _keys(mg: FiniteMG, obs: ObservationMap, s: int, shared: bool) -> list[Hashable]:
    if shared:
        return [int(obs.table[i, s]) for i in range(mg.n_agents)]
    return [(i, int(obs.table[i, s])) for i in range(mg.n_agents)]


def _policy_from_assignment(
    mg: FiniteMG, obs: ObservationMap, assignment: dict, shared: bool
) -> FactoredPolicy:
    choices = []
    for i in range(mg.n_agents):
        row = []
        for o in range(obs.n_observations):
            key = o if shared else (i, o)
            row.append(assignment.get(key, 0))
        choices.append(row)
    return FactoredPolicy.deterministic(mg, choices, obs, shared)


def _state_based_optimum(mg: FiniteMG) -> tuple[float, np.ndarray]:
    rbar = mg.mean_reward
    best = np.argmax(rbar, axis=1)
    if mg.is_one_step:
        value = float(mg.initial_dist @ rbar[np.arange(mg.n_states), best])
        return value, best
    # Policy iteration on the joint actions.
    for _ in range(10 * mg.n_states * mg.n_actions + 10):
        matrix = np.zeros((mg.n_states, mg.n_actions))
        matrix[np.arange(mg.n_states), best] = 1.0
        result = evaluate_matrix(mg, matrix)
        current = result.Q[np.arange(mg.n_states), best]
        improved = np.where(
            result.Q.max(axis=1) > current + 1e-12, np.argmax(result.Q, axis=1), best
        )
        if np.array_equal(improved, best):
            return result.J, best
        best = improved
    raise RuntimeError("Policy iteration did not converge")


def _one_step_search(
    mg: FiniteMG, obs: ObservationMap, shared: bool, budget: int
) -> tuple[float, dict, int]:
    """Branch and bound over observation -> action assignments."""
    rbar = mg.mean_reward
    mu = mg.initial_dist
    states = _support_states(mg)
    keys = [_keys(mg, obs, int(s), shared) for s in states]
    orders = [np.argsort(-rbar[s], kind="stable") for s in states]
    best_per_state = np.array([mu[s] * rbar[s].max() for s in states])
    suffix = np.concatenate([np.cumsum(best_per_state[::-1])[::-1], [0.0]])
    upper = float(suffix[0]) if len(states) else 0.0

    best_value = -np.inf
    best_assignment: dict = {}
    visited = 0

    def search(k: int, value: float, assignment: dict):
        nonlocal best_value, best_assignment, visited
        visited += 1
        if visited > budget:
            raise BudgetExceededError(f"Search visited more than {budget} nodes")
        if value + suffix[k] <= best_value + 1e-12:
            return
        if k == len(states):
            best_value, best_assignment = value, dict(assignment)
            return
        s = states[k]
        for a in orders[k]:
            local = mg.action_table[a]
            new: dict = {}
            consistent = True
            for key, action in zip(keys[k], local):
                current = assignment.get(key, new.get(key))
                if current is None:
                    new[key] = int(action)
                elif current != action:
                    consistent = False
                    break
            if not consistent:
                continue
            assignment.update(new)
            search(k + 1, value + mu[s] * rbar[s, a], assignment)
            for key in new:
                del assignment[key]
            if best_value >= upper - 1e-12:
                return

    search(0, 0.0, {})
    return float(best_value), best_assignment, visited


def _enumerate_assignments(
    mg: FiniteMG, obs: ObservationMap, shared: bool, budget: int
) -> tuple[float, dict, int]:
    states = _support_states(mg)
    keys = sorted({k for s in states for k in _keys(mg, obs, int(s), shared)}, key=repr)
    sizes = [mg.action_sizes[0] if shared else mg.action_sizes[k[0]] for k in keys]
    count = int(np.prod(sizes, dtype=float)) if keys else 1
    if count > budget:
        raise BudgetExceededError(f"{count} deterministic policies exceed the budget of {budget}")
    best_value = -np.inf
    best_assignment: dict = {}
    for values in itertools.product(*[range(k) for k in sizes]):
        assignment = dict(zip(keys, values))
        policy = _policy_from_assignment(mg, obs, assignment, shared)
        value = evaluate(mg, policy).J
        if value > best_value + 1e-12:
            best_value, best_assignment = value, assignment
    return float(best_value), best_assignment, count


def _shared_stochastic_search(
    mg: FiniteMG, obs: ObservationMap
) -> Optional[tuple[float, FactoredPolicy]]:
    """Grid and golden-section search over one shared Bernoulli parameter."""
    states = _support_states(mg)
    keys = {k for s in states for k in _keys(mg, obs, int(s), True)}
    if len(keys) != 1 or mg.action_sizes[0] != 2:
        return None
    (o,) = keys

    def policy_of(p: float) -> FactoredPolicy:
        table = np.full((obs.n_observations, 2), 0.5)
        table[o] = (1.0 - p, p)
        return FactoredPolicy(tuple(table for _ in range(mg.n_agents)), obs, shared=True)

    def value(p: float) -> float:
        return evaluate(mg, policy_of(float(np.clip(p, 0.0, 1.0)))).J

    grid = np.round(np.arange(0.0, 1.0 + GRID_STEP / 2, GRID_STEP), 10)
    values = np.array([value(p) for p in grid])
    k = int(np.argmax(values))
    best_p, best_value = float(grid[k]), float(values[k])
    if 0 < k < len(grid) - 1 and values[k] > values[k - 1] and values[k] > values[k + 1]:
        refined = minimize_scalar(
            lambda p: -value(p),
            bracket=(grid[k - 1], grid[k], grid[k + 1]),
            method="golden",
            tol=REFINE_TOLERANCE,
        )
        if -refined.fun > best_value:
            best_p, best_value = float(np.clip(refined.x, 0.0, 1.0)), float(-refined.fun)
    logger.debug("shared stochastic optimum %.12f at p=%.10f", best_value, best_p)
    return best_value, policy_of(best_p)


def brute_force_optimum(
    mg: FiniteMG,
    obs: ObservationMap,
    policy_class: Union[PolicyClass, str],
    budget: int = DEFAULT_POLICY_BUDGET,
) -> BruteForceResult:
    """
    Maximize J over the deterministic policies of a class.

    One-step games are solved by branch and bound over the per-observation
    action choices; other games by exhaustive enumeration within the budget.
    State-based optima use policy iteration. For shared policies on games
    where all agents see a single observation with two actions, the best
    stochastic shared policy is found by a grid over p followed by a
    golden-section refinement.

    :param mg: the game.
    :param obs: the observation map.
    :param policy_class: which class to optimize over.
    :param budget: maximum number of search nodes or enumerated policies.
    :return: the optimum and a maximizing policy.
    """
    policy_class = PolicyClass(policy_class)
    obs.check_compatible(mg)
    if policy_class == PolicyClass.STATE_BASED:
        value, best = _state_based_optimum(mg)
        choices = [mg.action_table[best, i] for i in range(mg.n_agents)]
        policy = FactoredPolicy.deterministic(mg, choices)
        return BruteForceResult(policy_class, value, policy, value, None, 1)

    shared = policy_class == PolicyClass.OBS_BASED_SHARED
    if shared and len(set(mg.action_sizes)) != 1:
        raise ValueError("Shared policies need equal local action spaces")
    if mg.is_one_step:
        value, assignment, evaluated = _one_step_search(mg, obs, shared, budget)
    else:
        value, assignment, evaluated = _enumerate_assignments(mg, obs, shared, budget)
    policy = _policy_from_assignment(mg, obs, assignment, shared)
    result = BruteForceResult(policy_class, value, policy, value, None, evaluated)
    if shared:
        stochastic = _shared_stochastic_search(mg, obs)
        if stochastic is not None:
            s_value, s_policy = stochastic
            best_value, best_policy = (
                (s_value, s_policy) if s_value > value else (value, policy)
            )
            result = BruteForceResult(
                policy_class, best_value, best_policy, value, s_value, evaluated
            )
    return result


def compare_policy_classes(
    mg: FiniteMG, obs: ObservationMap, budget: int = DEFAULT_POLICY_BUDGET
) -> PolicyClassComparison:
    """Optima over state-based, observation-based and shared observation-based policies."""
    comparison = PolicyClassComparison(mg.name)
    for policy_class in PolicyClass:
        comparison.results[policy_class] = brute_force_optimum(mg, obs, policy_class, budget)
    logger.info("%s: optima %s (equal=%s)", mg.name, comparison.values, comparison.equal)
    return comparison
