"""Core containers for N-player stochastic games.

Joint actions are stored flat in row-major order with agent 0 varying
slowest, so a per-state Q slice for sizes ``(2, 3)`` is laid out as
``(0,0) (0,1) (0,2) (1,0) (1,1) (1,2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when shapes, probabilities or hyperparameters are inconsistent."""


class UsageError(RuntimeError):
    """Raised when an object is used out of order (e.g. stepping a finished episode)."""


def n_joint(sizes: Sequence[int]) -> int:
    return int(np.prod(sizes, dtype=np.int64))


def joint_index(actions: Sequence[int], sizes: Sequence[int]) -> int:
    if len(actions) != len(sizes):
        raise IndexError(f"expected {len(sizes)} actions, got {len(actions)}")
    idx = 0
    for a, n in zip(actions, sizes):
        a = int(a)
        if not 0 <= a < n:
            raise IndexError(f"action {a} out of range for action space of size {n}")
        idx = idx * n + a
    return idx


def joint_unindex(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    total = n_joint(sizes)
    if not 0 <= index < total:
        raise IndexError(f"joint index {index} out of range [0, {total})")
    out = []
    for n in reversed(sizes):
        index, a = divmod(index, n)
        out.append(a)
    return tuple(reversed(out))


def own_action_indices(sizes: Sequence[int], agent: int, others: Sequence[int]) -> np.ndarray:
    """Flat indices of every joint action where ``agent`` varies and the others are fixed.

    ``others`` lists the actions of all agents except ``agent``, in agent order.
    """
    if len(others) != len(sizes) - 1:
        raise ConfigurationError(
            f"expected {len(sizes) - 1} other-agent actions, got {len(others)}"
        )
    full = list(others[:agent]) + [0] + list(others[agent:])
    base = joint_index(full, sizes)
    stride = n_joint(sizes[agent + 1:])
    return base + stride * np.arange(sizes[agent])


@dataclass(frozen=True)
class EnvStep:
    next_state: int
    rewards: np.ndarray
    terminal: bool
    # episode cut by the step cap; learners still bootstrap through it
    truncated: bool = False

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated


@dataclass
class JointQTable:
    """Q-values of one agent over (state, joint action)."""

    agent_index: int
    sizes: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, agent_index: int, n_states: int, sizes: Sequence[int],
              fill: float = 0.0) -> "JointQTable":
        sizes = tuple(int(n) for n in sizes)
        return cls(agent_index, sizes, np.full((n_states, n_joint(sizes)), float(fill)))

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != n_joint(self.sizes):
            raise ConfigurationError(
                f"values must have shape (n_states, {n_joint(self.sizes)}), got {self.values.shape}"
            )

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, key):
        state, actions = key
        return self.values[state, joint_index(actions, self.sizes)]

    def __setitem__(self, key, value):
        state, actions = key
        self.values[state, joint_index(actions, self.sizes)] = value

    def copy(self) -> "JointQTable":
        return JointQTable(self.agent_index, self.sizes, self.values.copy())


class AdvisorSolution:
    """Per-agent mixed strategies recommended by an advisor at one state."""

    __slots__ = ("strategies",)

    def __init__(self, strategies: Sequence[Sequence[float]]):
        strategies = tuple(np.asarray(p, dtype=float) for p in strategies)
        for j, p in enumerate(strategies):
            if p.ndim != 1 or p.size == 0:
                raise ConfigurationError(f"strategy of agent {j} must be a non-empty vector")
            if np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ConfigurationError(f"strategy of agent {j} has negative or non-finite entries")
            if abs(p.sum() - 1.0) > 1e-9:
                raise ConfigurationError(f"strategy of agent {j} sums to {p.sum()}, not 1")
        self.strategies = strategies

    @classmethod
    def deterministic(cls, actions: Sequence[int], sizes: Sequence[int]) -> "AdvisorSolution":
        return cls([np.eye(n)[a] for a, n in zip(actions, sizes)])

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "AdvisorSolution":
        return cls([np.full(n, 1.0 / n) for n in sizes])

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.strategies)

    def joint_probabilities(self) -> np.ndarray:
        """Product distribution over joint actions, flat row-major."""
        return reduce(np.multiply.outer, self.strategies).ravel()

    def __getitem__(self, agent: int) -> np.ndarray:
        return self.strategies[agent]

    def __len__(self) -> int:
        return len(self.strategies)

    def __repr__(self) -> str:
        return f"AdvisorSolution({[p.tolist() for p in self.strategies]})"


@dataclass
class StageGame:
    """Payoffs of every agent over joint actions at a fixed state."""

    sizes: tuple[int, ...]
    payoffs: list[np.ndarray]

    def __post_init__(self):
        size = n_joint(self.sizes)
        self.payoffs = [np.asarray(m, dtype=float).ravel() for m in self.payoffs]
        if len(self.payoffs) != len(self.sizes):
            raise ConfigurationError("need one payoff array per agent")
        for m in self.payoffs:
            if m.size != size:
                raise ConfigurationError(f"payoff arrays must have {size} entries")

    @classmethod
    def from_tables(cls, tables: Sequence[JointQTable], state: int) -> "StageGame":
        return cls(tables[0].sizes, [t.values[state] for t in tables])

    def value(self, solution: AdvisorSolution) -> np.ndarray:
        return np.array([advisor_q(solution, m) for m in self.payoffs])


def advisor_q(solution: AdvisorSolution, q_slice) -> float:
    """Expected payoff of ``q_slice`` when every agent plays its advisor strategy."""
    q = np.asarray(q_slice, dtype=float)
    sizes = solution.sizes
    if q.size != n_joint(sizes):
        raise ConfigurationError(
            f"q slice has {q.size} entries but the solution spans {n_joint(sizes)} joint actions"
        )
    # contract the last agent's axis first; each step removes one axis
    out = q.reshape(sizes)
    for p in reversed(solution.strategies):
        out = out @ p
    return float(out)


def greedy_own_action(q_table: JointQTable, state: int, others_actions: Sequence[int],
                      rng: np.random.Generator, agent: int | None = None) -> int:
    """Best own action with the other agents' actions held fixed; ties broken at random."""
    agent = q_table.agent_index if agent is None else agent
    idx = own_action_indices(q_table.sizes, agent, others_actions)
    return argmax_random(q_table.values[state, idx], rng)


def argmax_random(values: np.ndarray, rng: np.random.Generator) -> int:
    best = np.flatnonzero(values == values.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])
