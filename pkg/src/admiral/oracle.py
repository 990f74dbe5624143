"""Brute-force reference values for enumerable games.

These are the yardsticks the learners are measured against: the value of
an advisor when every agent follows it, and the joint-optimal
Q-function of an identical-interest game (where the joint optimum is a
Nash equilibrium).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .advisors import Advisor, TableAdvisor
from .game import ConfigurationError, JointQTable, joint_unindex, n_joint


@dataclass(frozen=True)
class OracleConfig:
    beta: float = 0.9
    rollouts: int = 512
    horizon: int | None = None     # defaults to the environment's step cap
    tolerance: float = 1e-10
    method: str = "auto"           # "auto", "exact" or "rollout"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1), got {self.beta}")
        if self.rollouts < 1:
            raise ConfigurationError("rollouts must be >= 1")
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.method not in ("auto", "exact", "rollout"):
            raise ConfigurationError(f"unknown oracle method {self.method!r}")


def _require_enumerable(env):
    if not getattr(env, "enumerable", False):
        raise NotImplementedError(f"{type(env).__name__} cannot be enumerated")


def truncation_bound(beta: float, horizon: int, r_max: float) -> float:
    """Worst-case value lost by cutting an infinite discounted sum at ``horizon`` steps."""
    return beta ** horizon * abs(r_max) / (1.0 - beta)


def advisor_value_q(env, advisor: Advisor, config: OracleConfig = OracleConfig(),
                    rng: np.random.Generator | None = None) -> list[JointQTable]:
    """Q-values of every (state, joint action) when all agents follow ``advisor`` afterwards.

    Stationary advisors are evaluated exactly by backward induction over
    the remaining steps; others are estimated by Monte Carlo rollouts.
    Terminal states keep zero rows.
    """
    _require_enumerable(env)
    method = config.method
    if method == "auto":
        method = "exact" if advisor.stationary else "rollout"
    if method == "exact":
        return _advisor_value_exact(env, advisor, config)
    if rng is None:
        rng = np.random.default_rng(0)
    return _advisor_value_rollout(env, advisor, config, rng)


def _advisor_value_exact(env, advisor, config):
    horizon = config.horizon or env.step_cap
    nxt, rew, term = env.transition_arrays()
    n_s, n_a = nxt.shape
    live = np.array([not env.is_terminal(s) for s in range(n_s)])
    probs = np.zeros((n_s, n_a))
    for s in np.flatnonzero(live):
        probs[s] = advisor.solve(int(s)).joint_probabilities()
    cont = config.beta * (~term)
    out = []
    for j in range(env.n_agents):
        v = np.zeros(n_s)
        # v holds the value with h steps left; after the loop h = horizon - 1
        for _ in range(horizon - 1):
            v = np.einsum("sa,sa->s", probs, rew[j] + cont * v[nxt])
        q = np.where(live[:, None], rew[j] + cont * v[nxt], 0.0)
        out.append(JointQTable(j, env.action_sizes, q))
    return out


def rollout_return(env, advisor, state, joint_action, config, rng):
    """Discounted return of one trajectory: ``joint_action`` first, then the advisor."""
    horizon = config.horizon or env.step_cap
    n = env.n_agents
    total = np.zeros(n)
    disc = 1.0
    s, a = state, joint_action
    for _ in range(horizon):
        out = env.transition(s, a)
        total += disc * out.rewards
        if out.terminal:
            break
        disc *= config.beta
        s = out.next_state
        a = [advisor.recommend(s, k, rng) for k in range(n)]
    return total


def _advisor_value_rollout(env, advisor, config, rng):
    n_s, sizes = env.n_states, env.action_sizes
    n_a = n_joint(sizes)
    q = np.zeros((env.n_agents, n_s, n_a))
    for s in range(n_s):
        if env.is_terminal(s):
            continue
        for i in range(n_a):
            a = joint_unindex(i, sizes)
            acc = np.zeros(env.n_agents)
            for _ in range(config.rollouts):
                acc += rollout_return(env, advisor, s, a, config, rng)
            q[:, s, i] = acc / config.rollouts
    return [JointQTable(j, sizes, q[j]) for j in range(env.n_agents)]


def nash_q_identical_interest(env, beta: float = 0.9, tolerance: float = 1e-10,
                              max_iter: int = 100_000) -> list[JointQTable]:
    """Joint value iteration for a game where every agent gets the same reward.

    The joint optimum is then a Nash equilibrium, so the fixed point is a
    Nash Q-function. Raises :class:`ConfigurationError` for general-sum games.
    """
    _require_enumerable(env)
    if not 0.0 <= beta < 1.0:
        raise ConfigurationError(f"beta must lie in [0, 1), got {beta}")
    nxt, rew, term = env.transition_arrays()
    if not all(np.array_equal(rew[0], rew[j]) for j in range(1, env.n_agents)):
        raise ConfigurationError("rewards differ between agents; the game is not identical-interest")
    cont = beta * (~term)
    r = rew[0]
    q = np.zeros_like(r)
    for _ in range(max_iter):
        new = r + cont * q.max(axis=1)[nxt]
        delta = np.max(np.abs(new - q))
        q = new
        if delta < tolerance:
            break
    else:
        raise RuntimeError(f"value iteration did not reach tolerance {tolerance}")
    return [JointQTable(j, env.action_sizes, q.copy()) for j in range(env.n_agents)]


def bellman_residual(q: JointQTable, env, beta: float) -> float:
    """Sup-norm violation of the joint Bellman optimality equation."""
    nxt, rew, term = env.transition_arrays()
    live = np.array([not env.is_terminal(s) for s in range(env.n_states)])
    target = rew[q.agent_index] + beta * (~term) * q.values.max(axis=1)[nxt]
    return float(np.max(np.abs(target - q.values)[live]))


def joint_greedy_advisor(q: JointQTable, env) -> TableAdvisor:
    """Deterministic advisor playing the joint argmax of ``q`` (lowest index on ties)."""
    best = q.values.argmax(axis=1)
    joint = np.array([joint_unindex(int(i), env.action_sizes) for i in best])
    return TableAdvisor(env.action_sizes, joint)


def mse(q_a: JointQTable, q_b: JointQTable, mask: np.ndarray | None = None,
        weights: np.ndarray | None = None) -> float:
    """Mean squared difference over every (state, joint action).

    ``mask`` restricts the mean to selected entries; ``weights`` (for
    instance visit counts) turns it into a weighted mean. They are
    mutually exclusive.
    """
    a = np.asarray(getattr(q_a, "values", q_a))
    b = np.asarray(getattr(q_b, "values", q_b))
    if a.shape != b.shape:
        raise ConfigurationError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = (a - b) ** 2
    if mask is not None and weights is not None:
        raise ConfigurationError("pass either mask or weights, not both")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != a.shape:
            raise ConfigurationError(f"weights shape {w.shape} does not match {a.shape}")
        if np.any(w < 0) or w.sum() <= 0:
            raise ConfigurationError("weights must be non-negative with a positive sum")
        return float(np.sum(w * diff) / w.sum())
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise ConfigurationError(f"mask shape {mask.shape} does not match {a.shape}")
        if not mask.any():
            raise ConfigurationError("mask selects no entries")
        return float(diff[mask].mean())
    return float(diff.mean())
