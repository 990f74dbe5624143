"""Tabular advisor-guided learners.

``train_dm`` learns to act: each agent follows the advisor with a
probability that decays linearly to zero, explores at random with a
second decaying probability, and is otherwise greedy against the actions
it predicts for the other agents. Every agent keeps exact copies of the
other agents' tables to make those predictions.

``train_ae`` evaluates an advisor: the bootstrap target is the value of
the next state under the advisor's joint strategy, so the learned table
converges to the advisor's own Q-function. The cumulative reward it
collects feeds :func:`normalize_epsilon0`.

The action mixture uses cumulative thresholds on a single uniform draw:
``[0, p_advisor)`` advisor, ``[p_advisor, p_advisor + p_random)`` random,
greedy otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .advisors import Advisor
from .game import (AdvisorSolution, ConfigurationError, JointQTable, advisor_q,
                   argmax_random, n_joint, own_action_indices)


@dataclass(frozen=True)
class Schedule:
    """Linear decay from ``start`` to ``end`` over ``horizon`` episodes, then flat."""

    start: float
    end: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.end <= self.start <= 1.0:
            raise ConfigurationError(
                f"schedule needs 0 <= end <= start <= 1, got start={self.start}, end={self.end}")
        if self.horizon <= 0:
            raise ConfigurationError("schedule horizon must be positive")

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls(value, value, 1.0)

    def value(self, episode: float) -> float:
        if episode >= self.horizon:
            return self.end
        return self.start - (self.start - self.end) * (max(episode, 0) / self.horizon)


@dataclass
class LearnerConfig:
    alpha: float = 0.5
    beta: float = 0.9
    # decision-making: random and advisor probabilities, decayed per episode
    epsilon: Schedule = field(default_factory=lambda: Schedule(0.05, 0.0, 1000))
    epsilon_prime: Schedule = field(default_factory=lambda: Schedule(0.0, 0.0, 1000))
    # advisor evaluation: fixed random and advisor probabilities
    eta: float = 0.05
    eta_prime: float = 0.5
    obs_mode: str = "joint"
    q_init: float = 0.0
    # stop once no entry moved more than this during a whole episode
    early_stop_tol: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1), got {self.beta}")
        if self.eta < 0 or self.eta_prime < 0 or self.eta + self.eta_prime > 1.0 + 1e-12:
            raise ConfigurationError(
                f"need eta, eta_prime >= 0 and eta + eta_prime <= 1 (got {self.eta}, {self.eta_prime})")
        if self.obs_mode not in ("joint", "local"):
            raise ConfigurationError(f"obs_mode must be 'joint' or 'local', got {self.obs_mode!r}")


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise ConfigurationError(f"non-finite input {v!r}")


def _check_rates(alpha, beta):
    # alpha == 0 is allowed here as the no-learning degenerate case
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 <= beta < 1.0:
        raise ConfigurationError(f"beta must lie in [0, 1), got {beta}")


def dm_update(q: JointQTable, s: int, a: Sequence[int], r: float, s_next: int,
              a_next: Sequence[int] | None, alpha: float, beta: float,
              terminal: bool = False) -> float:
    """Sarsa-style joint-action update; returns the new ``Q(s, a)``."""
    _check_rates(alpha, beta)
    _check_finite(r)
    old = q[s, a]
    bootstrap = 0.0 if terminal else q[s_next, a_next]
    new = (1.0 - alpha) * old + alpha * (r + beta * bootstrap)
    _check_finite(new)
    q[s, a] = new
    return new


def ae_update(q: JointQTable, s: int, a: Sequence[int], r: float,
              advisor_solution_next: AdvisorSolution | None, s_next: int,
              alpha: float, beta: float, terminal: bool = False) -> float:
    """Bootstrap on the next state's value under the advisor's joint strategy."""
    _check_rates(alpha, beta)
    _check_finite(r)
    old = q[s, a]
    bootstrap = 0.0 if terminal else advisor_q(advisor_solution_next, q.values[s_next])
    new = (1.0 - alpha) * old + alpha * (r + beta * bootstrap)
    _check_finite(new)
    q[s, a] = new
    return new


def _mixture_check(p_advisor, p_random):
    if p_advisor < 0 or p_random < 0 or p_advisor + p_random > 1.0 + 1e-12:
        raise ConfigurationError(
            f"advisor ({p_advisor}) and random ({p_random}) probabilities must be >= 0 "
            "and sum to at most 1")


def mixed_action(p_advisor: float, p_random: float, n_actions: int,
                 advisor_action: Callable[[], int], greedy_action: Callable[[], int],
                 rng: np.random.Generator) -> tuple[int, str]:
    """Draw one action from the advisor / random / greedy mixture.

    Returns the action and which branch produced it.
    """
    _mixture_check(p_advisor, p_random)
    u = rng.random()
    if u < p_advisor:
        return advisor_action(), "advisor"
    if u < p_advisor + p_random:
        return int(rng.integers(n_actions)), "random"
    return greedy_action(), "greedy"


class DmLearner:
    """One decision-making agent: its own table plus copies of everyone else's."""

    def __init__(self, agent_index: int, n_obs: int, sizes: Sequence[int],
                 config: LearnerConfig):
        self.agent_index = agent_index
        self.sizes = tuple(sizes)
        self.config = config
        self.q = JointQTable.zeros(agent_index, n_obs, sizes, config.q_init)
        self.copies = {k: JointQTable.zeros(k, n_obs, sizes, config.q_init)
                       for k in range(len(sizes)) if k != agent_index}

    def table_for(self, k: int) -> JointQTable:
        return self.q if k == self.agent_index else self.copies[k]

    def predict_greedy(self, k: int, obs: int, current_actions: Sequence[int],
                       rng: np.random.Generator) -> int:
        """Agent ``k``'s greedy action at ``obs`` given everyone else's current actions."""
        others = [a for i, a in enumerate(current_actions) if i != k]
        idx = own_action_indices(self.sizes, k, others)
        return argmax_random(self.table_for(k).values[obs, idx], rng)


def select_action_dm(learner: DmLearner, state: int, others_next_greedy: Sequence[int],
                     advisor: Advisor | None, episode: int, rng: np.random.Generator,
                     obs: int | None = None) -> int:
    """Advisor with probability epsilon', random with probability epsilon, else greedy.

    ``others_next_greedy`` holds the predicted actions of every other
    agent, in agent order. ``obs`` is the learner's table row for
    ``state`` (defaults to ``state``).
    """
    cfg = learner.config
    p_adv = cfg.epsilon_prime.value(episode) if advisor is not None else 0.0
    p_rand = cfg.epsilon.value(episode)
    j = learner.agent_index
    obs = state if obs is None else obs
    action, _ = mixed_action(
        p_adv, p_rand, learner.sizes[j],
        lambda: advisor.recommend(state, j, rng),
        lambda: argmax_random(
            learner.q.values[obs, own_action_indices(learner.sizes, j, others_next_greedy)], rng),
        rng)
    return action


class AeLearner:
    def __init__(self, agent_index: int, n_obs: int, sizes: Sequence[int],
                 config: LearnerConfig):
        self.agent_index = agent_index
        self.sizes = tuple(sizes)
        self.config = config
        self.q = JointQTable.zeros(agent_index, n_obs, sizes, config.q_init)


def select_action_ae(learner: AeLearner, state: int, others_prev_actions: Sequence[int],
                     advisor: Advisor, rng: np.random.Generator,
                     obs: int | None = None) -> int:
    """Advisor with probability eta', random with probability eta, else greedy."""
    cfg = learner.config
    j = learner.agent_index
    obs = state if obs is None else obs
    action, _ = mixed_action(
        cfg.eta_prime, cfg.eta, learner.sizes[j],
        lambda: advisor.recommend(state, j, rng),
        lambda: argmax_random(
            learner.q.values[obs, own_action_indices(learner.sizes, j, others_prev_actions)], rng),
        rng)
    return action


def normalize_epsilon0(cr: float, rcr: float, mcr: float) -> float:
    """Map an advisor's cumulative reward onto an initial advisor probability.

    ``(cr - rcr) / (mcr - rcr)`` clamped to [0, 1], rounded to the nearest
    percent and then up to the next tenth. Rounding to the percent first
    keeps ratios like 0.7018 at 0.7 while 0.035 still rounds up to 0.1.
    """
    _check_finite(cr, rcr, mcr)
    if not mcr > rcr:
        raise ConfigurationError(
            f"maximum cumulative reward ({mcr}) must exceed the random-advisor baseline ({rcr})")
    raw = min(max((cr - rcr) / (mcr - rcr), 0.0), 1.0)
    percent = math.floor(raw * 100.0 + 0.5)
    return math.ceil(percent / 10) / 10


@dataclass
class TrainResult:
    """Per-episode logs and final tables of one training run."""

    rewards: np.ndarray              # (episodes, n_agents)
    tables: list[JointQTable]
    steps: np.ndarray                # (episodes,)
    epsilon: np.ndarray              # (episodes,)
    epsilon_prime: np.ndarray        # (episodes,)
    visits: np.ndarray               # (n_agents, n_obs, n_joint) update counts
    copies: list[dict[int, JointQTable]] | None = None

    @property
    def episodes(self) -> int:
        return self.rewards.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.rewards, axis=0)


def _as_advisor_list(advisors, n_agents) -> list[Advisor | None]:
    if advisors is None or isinstance(advisors, Advisor):
        return [advisors] * n_agents
    advisors = list(advisors)
    if len(advisors) != n_agents:
        raise ConfigurationError(f"need one advisor per agent ({n_agents}), got {len(advisors)}")
    return advisors


def _end_episode(advisors):
    seen = set()
    for adv in advisors:
        if adv is not None and id(adv) not in seen:
            seen.add(id(adv))
            adv.end_episode()


def train_dm(env, advisors, config: LearnerConfig, episodes: int, rng: np.random.Generator,
             on_step: Callable | None = None, on_episode: Callable | None = None,
             advisor_rng: np.random.Generator | None = None) -> TrainResult:
    """Run decision-making training with every agent using the same rule.

    ``advisors`` is one advisor shared by all agents, a list with one
    entry per agent, or ``None``. ``on_step(learners, step)`` runs after
    every update; ``on_episode(episode, learners)`` after every episode.
    Stochastic advisors draw from ``advisor_rng`` (default ``rng``).
    """
    arng = rng if advisor_rng is None else advisor_rng
    n = env.n_agents
    sizes = tuple(env.action_sizes)
    mode = config.obs_mode
    n_obs = env.n_observations(mode)
    advisors = _as_advisor_list(advisors, n)
    learners = [DmLearner(j, n_obs, sizes, config) for j in range(n)]
    strides = [n_joint(sizes[j + 1:]) for j in range(n)]
    alpha, beta = config.alpha, config.beta
    # per-agent handle on the table of agent k as seen by learner j
    views = [[learners[j].table_for(k).values for k in range(n)] for j in range(n)]

    rewards = np.zeros((episodes, n))
    steps = np.zeros(episodes, dtype=np.int64)
    eps_log = np.zeros(episodes)
    epsp_log = np.zeros(episodes)
    visits = np.zeros((n, n_obs, n_joint(sizes)), dtype=np.int64)

    def flat(actions):
        idx = 0
        for a, m in zip(actions, sizes):
            idx = idx * m + a
        return idx

    def greedy_of(values, obs, k, actions):
        # best action of agent k with everyone else at ``actions``
        base = flat(actions) - actions[k] * strides[k]
        row = values[obs, base:base + strides[k] * sizes[k]:strides[k]]
        return argmax_random(row, rng)

    def choose(j, state, current, p_adv, p_rand):
        u = rng.random()
        if u < p_adv:
            return advisors[j].recommend(state, j, arng)
        if u < p_adv + p_rand:
            return int(rng.integers(sizes[j]))
        predicted = list(current)
        for k in range(n):
            if k != j:
                predicted[k] = greedy_of(views[j][k], env.observation(state, k, mode), k, current)
        return greedy_of(views[j][j], env.observation(state, j, mode), j, predicted)

    stop = False
    for ep in range(episodes):
        p_adv_base = config.epsilon_prime.value(ep)
        p_rand_base = config.epsilon.value(ep)
        max_delta = 0.0
        state = env.reset()
        current = [0] * n
        p = [(p_adv_base if advisors[j] is not None else 0.0) for j in range(n)]
        # a random share that would overflow the advisor share is cut back
        q_rand = [min(p_rand_base, 1.0 - p[j]) for j in range(n)]
        actions = [choose(j, state, current, p[j], q_rand[j]) for j in range(n)]
        ep_reward = np.zeros(n)
        t = 0
        while True:
            out = env.step(actions)
            t += 1
            nxt = out.next_state
            ep_reward += out.rewards
            if out.terminal:
                nxt_actions = None
            else:
                nxt_actions = [choose(j, nxt, actions, p[j], q_rand[j]) for j in range(n)]
            a_idx = flat(actions)
            na_idx = None if nxt_actions is None else flat(nxt_actions)
            for k in range(n):
                obs = env.observation(state, k, mode)
                obs_n = env.observation(nxt, k, mode)
                r = float(out.rewards[k])
                visits[k, obs, a_idx] += 1
                # the owner and every copy of agent k's table get the identical update
                for j in range(n):
                    values = views[j][k]
                    old = values[obs, a_idx]
                    boot = 0.0 if na_idx is None else values[obs_n, na_idx]
                    new = (1.0 - alpha) * old + alpha * (r + beta * boot)
                    values[obs, a_idx] = new
                    if j == k:
                        d = abs(new - old)
                        if d > max_delta:
                            max_delta = d
            if on_step is not None:
                on_step(learners, out)
            if out.done:
                break
            state, actions = nxt, nxt_actions
        rewards[ep] = ep_reward
        steps[ep] = t
        eps_log[ep] = p_rand_base
        epsp_log[ep] = p_adv_base
        _end_episode(advisors)
        if on_episode is not None:
            on_episode(ep, learners)
        if config.early_stop_tol is not None and max_delta < config.early_stop_tol:
            stop = True
        if stop:
            last = ep + 1
            rewards, steps, eps_log, epsp_log = (rewards[:last], steps[:last],
                                                 eps_log[:last], epsp_log[:last])
            break

    return TrainResult(rewards, [lr.q for lr in learners], steps, eps_log, epsp_log, visits,
                       copies=[lr.copies for lr in learners])


def train_ae(env, advisor: Advisor, config: LearnerConfig, episodes: int,
             rng: np.random.Generator, on_step: Callable | None = None,
             on_episode: Callable | None = None,
             advisor_rng: np.random.Generator | None = None) -> TrainResult:
    """Run advisor-evaluation training; every agent evaluates the same advisor."""
    arng = rng if advisor_rng is None else advisor_rng
    if advisor is None:
        raise ConfigurationError("advisor evaluation needs an advisor")
    n = env.n_agents
    sizes = tuple(env.action_sizes)
    mode = config.obs_mode
    n_obs = env.n_observations(mode)
    learners = [AeLearner(j, n_obs, sizes, config) for j in range(n)]
    strides = [n_joint(sizes[j + 1:]) for j in range(n)]
    alpha, beta = config.alpha, config.beta
    p_adv, p_rand = config.eta_prime, config.eta
    _mixture_check(p_adv, p_rand)

    rewards = np.zeros((episodes, n))
    steps = np.zeros(episodes, dtype=np.int64)
    visits = np.zeros((n, n_obs, n_joint(sizes)), dtype=np.int64)

    def flat(actions):
        idx = 0
        for a, m in zip(actions, sizes):
            idx = idx * m + a
        return idx

    def choose(j, state, prev):
        u = rng.random()
        if u < p_adv:
            return advisor.recommend(state, j, arng)
        if u < p_adv + p_rand:
            return int(rng.integers(sizes[j]))
        base = flat(prev) - prev[j] * strides[j]
        row = learners[j].q.values[env.observation(state, j, mode),
                                   base:base + strides[j] * sizes[j]:strides[j]]
        return argmax_random(row, rng)

    for ep in range(episodes):
        state = env.reset()
        prev = [0] * n
        max_delta = 0.0
        ep_reward = np.zeros(n)
        t = 0
        while True:
            actions = [choose(j, state, prev) for j in range(n)]
            out = env.step(actions)
            t += 1
            nxt = out.next_state
            ep_reward += out.rewards
            solution = None if out.terminal else advisor.solve(nxt)
            a_idx = flat(actions)
            for j in range(n):
                values = learners[j].q.values
                obs = env.observation(state, j, mode)
                visits[j, obs, a_idx] += 1
                old = values[obs, a_idx]
                boot = 0.0 if solution is None else advisor_q(
                    solution, values[env.observation(nxt, j, mode)])
                new = (1.0 - alpha) * old + alpha * (out.rewards[j] + beta * boot)
                values[obs, a_idx] = new
                max_delta = max(max_delta, abs(new - old))
            if on_step is not None:
                on_step(learners, out)
            if out.done:
                break
            state, prev = nxt, actions
        rewards[ep] = ep_reward
        steps[ep] = t
        advisor.end_episode()
        if on_episode is not None:
            on_episode(ep, learners)
        if config.early_stop_tol is not None and max_delta < config.early_stop_tol:
            rewards, steps = rewards[:ep + 1], steps[:ep + 1]
            break

    k = rewards.shape[0]
    return TrainResult(rewards, [lr.q for lr in learners], steps,
                       np.full(k, p_rand), np.full(k, p_adv), visits)
