"""Stochastic-game environments: the two-agent grid maze and matrix games.

All environments here are enumerable: states are integers in
``[0, n_states)`` and :meth:`transition` is a pure function of
``(state, joint_action)``, which is what the value oracles iterate over.
:meth:`step` wraps it with episode bookkeeping (step counter, terminal
latch, truncation at the step cap).
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .game import ConfigurationError, EnvStep, UsageError, joint_unindex, n_joint

FORMAT_VERSION = 1

UP, DOWN, LEFT, RIGHT = range(4)
ACTION_NAMES = ("up", "down", "left", "right")
_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))

_REWARD_KEYS = ("one_goal", "both_goal", "one_pitfall", "both_pitfall", "goal_and_pitfall")
_MAZE_KEYS = {"format_version", "kind", "rows", "cols", "starts", "goal", "pitfalls",
              "walls", "step_cap", "rewards", "description"}


class _EpisodeMixin:
    """Episode bookkeeping shared by every environment."""

    step_cap: int

    def reset(self, rng: np.random.Generator | None = None) -> int:
        self.state = self.initial_state()
        self.steps = 0
        self.finished = False
        return self.state

    def step(self, joint_action: Sequence[int]) -> EnvStep:
        if self.finished:
            raise UsageError("episode has finished; call reset() first")
        out = self.transition(self.state, joint_action)
        self.steps += 1
        if not out.terminal and self.steps >= self.step_cap:
            out = EnvStep(out.next_state, out.rewards, False, truncated=True)
        self.state = out.next_state
        self.finished = out.done
        return out

    def transition_arrays(self):
        """Tabulate ``next_state``, ``rewards`` and ``terminal`` for every non-terminal state.

        Rows of terminal states are left as self-loops with zero reward.
        """
        n_s, n_a = self.n_states, n_joint(self.action_sizes)
        nxt = np.tile(np.arange(n_s)[:, None], (1, n_a))
        rew = np.zeros((self.n_agents, n_s, n_a))
        term = np.ones((n_s, n_a), dtype=bool)
        joint = [joint_unindex(i, self.action_sizes) for i in range(n_a)]
        for s in range(n_s):
            if self.is_terminal(s):
                continue
            for i, a in enumerate(joint):
                out = self.transition(s, a)
                nxt[s, i] = out.next_state
                rew[:, s, i] = out.rewards
                term[s, i] = out.terminal
        return nxt, rew, term


class GridMazeEnv(_EpisodeMixin):
    """Two agents on a grid racing to a shared goal while avoiding pitfalls.

    The joint state id is ``cell(agent0) * n_cells + cell(agent1)`` with
    cells numbered row-major. Both moves are applied in the same tick and
    rewards are assessed on the resulting positions.
    """

    n_agents = 2
    enumerable = True

    def __init__(self, rows=5, cols=5, starts=((4, 0), (4, 4)), goal=(2, 2),
                 pitfalls=((3, 2), (4, 2)), walls=(), step_cap=100, rewards=None):
        self.rows, self.cols = int(rows), int(cols)
        self.starts = tuple(tuple(int(v) for v in c) for c in starts)
        self.goal = tuple(int(v) for v in goal)
        self.pitfalls = tuple(tuple(int(v) for v in c) for c in pitfalls)
        self.walls = tuple(tuple(int(v) for v in c) for c in walls)
        self.step_cap = int(step_cap)
        self.rewards = {"one_goal": 1.0, "both_goal": 2.0, "one_pitfall": -1.0,
                        "both_pitfall": -2.0, "goal_and_pitfall": 1.0}
        if rewards:
            unknown = set(rewards) - set(_REWARD_KEYS)
            if unknown:
                raise ConfigurationError(f"unknown reward keys: {sorted(unknown)}")
            self.rewards.update({k: float(v) for k, v in rewards.items()})
        self._validate()

        self.n_cells = self.rows * self.cols
        self.n_states = self.n_cells ** 2
        self.action_sizes = (4, 4)
        # 0 plain, 1 goal, 2 pitfall
        self.kind = np.zeros(self.n_cells, dtype=np.int8)
        self.kind[self.cell_id(self.goal)] = 1
        for p in self.pitfalls:
            self.kind[self.cell_id(p)] = 2
        blocked = {self.cell_id(w) for w in self.walls}
        self.moves = np.zeros((self.n_cells, 4), dtype=np.int64)
        for c in range(self.n_cells):
            r, q = divmod(c, self.cols)
            for a, (dr, dc) in enumerate(_DELTAS):
                nr, nc = r + dr, q + dc
                inside = 0 <= nr < self.rows and 0 <= nc < self.cols
                target = nr * self.cols + nc if inside else c
                self.moves[c, a] = c if target in blocked else target
        self._moves = self.moves.tolist()
        self._kind = self.kind.tolist()
        self.reset()

    def _validate(self):
        if self.rows < 2 or self.cols < 2:
            raise ConfigurationError("grid must be at least 2x2")
        if len(self.starts) != 2:
            raise ConfigurationError("grid maze needs exactly two start cells")
        cells = list(self.starts) + [self.goal] + list(self.pitfalls) + list(self.walls)
        for c in cells:
            if len(c) != 2 or not (0 <= c[0] < self.rows and 0 <= c[1] < self.cols):
                raise ConfigurationError(f"cell {c} is off the {self.rows}x{self.cols} grid")
        special = {self.goal, *self.pitfalls}
        for s in self.starts:
            if s in special or s in self.walls:
                raise ConfigurationError(f"start cell {s} must be a plain cell")
        if self.goal in self.pitfalls or special & set(self.walls):
            raise ConfigurationError("goal, pitfalls and walls must not overlap")
        if self.step_cap < 1:
            raise ConfigurationError("step_cap must be positive")

    # -- description files -------------------------------------------------

    @classmethod
    def from_description(cls, desc: dict) -> "GridMazeEnv":
        unknown = set(desc) - _MAZE_KEYS
        if unknown:
            raise ConfigurationError(f"unknown keys in maze description: {sorted(unknown)}")
        if desc.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"unsupported maze format_version {desc.get('format_version')!r}")
        if desc.get("kind", "grid_maze") != "grid_maze":
            raise ConfigurationError(f"not a grid maze description: kind={desc.get('kind')!r}")
        kwargs = {k: v for k, v in desc.items()
                  if k not in ("format_version", "kind", "description")}
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "GridMazeEnv":
        return cls.from_description(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> "GridMazeEnv":
        text = resources.files("admiral.data").joinpath("grid_maze.json").read_text()
        return cls.from_description(json.loads(text))

    def description(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "grid_maze",
            "rows": self.rows, "cols": self.cols,
            "starts": [list(c) for c in self.starts],
            "goal": list(self.goal),
            "pitfalls": [list(c) for c in self.pitfalls],
            "walls": [list(c) for c in self.walls],
            "step_cap": self.step_cap,
            "rewards": dict(self.rewards),
        }

    def to_file(self, path):
        Path(path).write_text(json.dumps(self.description(), indent=2) + "\n")

    # -- geometry ----------------------------------------------------------

    def cell_id(self, rc) -> int:
        return int(rc[0]) * self.cols + int(rc[1])

    def cell_rc(self, cell: int) -> tuple[int, int]:
        return divmod(int(cell), self.cols)

    def state_of(self, cells: Sequence[int]) -> int:
        return int(cells[0]) * self.n_cells + int(cells[1])

    def cells_of(self, state: int) -> tuple[int, int]:
        return divmod(int(state), self.n_cells)

    def positions(self, state: int | None = None):
        state = self.state if state is None else state
        return tuple(self.cell_rc(c) for c in self.cells_of(state))

    def initial_state(self) -> int:
        return self.state_of([self.cell_id(c) for c in self.starts])

    def is_terminal(self, state: int) -> bool:
        c0, c1 = divmod(int(state), self.n_cells)
        return self._kind[c0] != 0 or self._kind[c1] != 0

    # -- dynamics ----------------------------------------------------------

    def _reward(self, k0: int, k1: int) -> float:
        goals = (k0 == 1) + (k1 == 1)
        pits = (k0 == 2) + (k1 == 2)
        rw = self.rewards
        if goals == 2:
            return rw["both_goal"]
        if goals == 1:
            return rw["goal_and_pitfall"] if pits else rw["one_goal"]
        if pits == 2:
            return rw["both_pitfall"]
        if pits == 1:
            return rw["one_pitfall"]
        return 0.0

    def transition(self, state: int, joint_action: Sequence[int]) -> EnvStep:
        a0, a1 = joint_action
        c0, c1 = divmod(int(state), self.n_cells)
        n0 = self._moves[c0][a0]
        n1 = self._moves[c1][a1]
        k0, k1 = self._kind[n0], self._kind[n1]
        r = self._reward(k0, k1)
        return EnvStep(n0 * self.n_cells + n1, np.array([r, r]), bool(k0 or k1))

    def max_episode_return(self) -> float:
        return max(self.rewards.values())

    # -- observations ------------------------------------------------------

    def n_observations(self, mode: str = "joint") -> int:
        if mode == "joint":
            return self.n_states
        if mode == "local":
            return self.n_cells
        raise ConfigurationError(f"unknown observation mode {mode!r}")

    def observation(self, state: int, agent: int, mode: str = "joint") -> int:
        if agent not in (0, 1):
            raise IndexError(f"invalid agent index {agent}")
        if mode == "joint":
            return int(state)
        if mode == "local":
            return self.cells_of(state)[agent]
        raise ConfigurationError(f"unknown observation mode {mode!r}")

    def observe(self, agent: int, mode: str = "joint") -> int:
        return self.observation(self.state, agent, mode)

    def render(self, state: int | None = None) -> str:
        state = self.state if state is None else state
        c0, c1 = self.cells_of(state)
        rows = []
        for r in range(self.rows):
            line = []
            for c in range(self.cols):
                cell = r * self.cols + c
                ch = "."
                if (r, c) == self.goal:
                    ch = "G"
                elif (r, c) in self.pitfalls:
                    ch = "X"
                elif (r, c) in self.walls:
                    ch = "#"
                if cell == c0 and cell == c1:
                    ch = "*"
                elif cell == c0:
                    ch = "A"
                elif cell == c1:
                    ch = "B"
                line.append(ch)
            rows.append(" ".join(line))
        return "\n".join(rows)


class MatrixGameEnv(_EpisodeMixin):
    """A single-state game with fixed payoffs.

    With ``horizon=1`` every episode is one simultaneous move that ends
    the game, so the Nash Q-values are exactly the payoff tables. Larger
    horizons repeat the stage game and cut the episode at ``horizon``
    steps without a terminal flag.
    """

    enumerable = True
    n_states = 1

    def __init__(self, payoffs, horizon: int = 1):
        payoffs = np.asarray(payoffs, dtype=float)
        if payoffs.ndim < 2:
            raise ConfigurationError("payoffs must have shape (n_agents, |A1|, ..., |An|)")
        if payoffs.shape[0] != payoffs.ndim - 1:
            raise ConfigurationError(
                f"payoffs for {payoffs.shape[0]} agents need {payoffs.shape[0]} action axes")
        if not np.all(np.isfinite(payoffs)):
            raise ConfigurationError("payoffs must be finite")
        if horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        self.n_agents = payoffs.shape[0]
        self.action_sizes = tuple(payoffs.shape[1:])
        self.payoffs = payoffs.reshape(self.n_agents, -1)
        self.horizon = int(horizon)
        self.step_cap = self.horizon
        self.reset()

    def initial_state(self) -> int:
        return 0

    def is_terminal(self, state: int) -> bool:
        return False

    def transition(self, state: int, joint_action: Sequence[int]) -> EnvStep:
        if state != 0:
            raise IndexError(f"matrix game has a single state, got {state}")
        idx = 0
        for a, n in zip(joint_action, self.action_sizes):
            if not 0 <= a < n:
                raise IndexError(f"action {a} out of range for action space of size {n}")
            idx = idx * n + int(a)
        return EnvStep(0, self.payoffs[:, idx].copy(), self.horizon == 1)

    def max_episode_return(self) -> float:
        return float(self.payoffs.max() * self.horizon)

    def description(self) -> dict:
        shape = (self.n_agents, *self.action_sizes)
        return {"format_version": 1, "kind": "matrix_game",
                "payoffs": self.payoffs.reshape(shape).tolist(), "horizon": self.horizon}

    def n_observations(self, mode: str = "joint") -> int:
        return 1

    def observation(self, state: int, agent: int, mode: str = "joint") -> int:
        if not 0 <= agent < self.n_agents:
            raise IndexError(f"invalid agent index {agent}")
        return 0

    def observe(self, agent: int, mode: str = "joint") -> int:
        return self.observation(self.state, agent, mode)


class SingleStateDemoEnv(MatrixGameEnv):
    """Two agents, one state: agent 0 picks Up/Down, agent 1 picks Left/Right.

    (Up, Left) pays ``reward`` to both; every other joint action pays
    ``other_reward``. The state never terminates; episodes are cut at
    ``step_cap``.
    """

    ACTIONS = (("Up", "Down"), ("Left", "Right"))

    def __init__(self, reward: float = 2.0, other_reward: float = 0.0, step_cap: int = 10):
        payoffs = np.full((2, 2, 2), float(other_reward))
        payoffs[:, 0, 0] = reward
        super().__init__(payoffs, horizon=step_cap)
        self.reward, self.other_reward = float(reward), float(other_reward)

    def description(self) -> dict:
        return {"format_version": 1, "kind": "single_state_demo", "reward": self.reward,
                "other_reward": self.other_reward, "step_cap": self.horizon}

    def transition(self, state, joint_action):
        out = super().transition(state, joint_action)
        return EnvStep(out.next_state, out.rewards, False)


def make_env(spec) -> GridMazeEnv | MatrixGameEnv:
    """Build an environment from a preset name, description dict or file path."""
    if isinstance(spec, (GridMazeEnv, MatrixGameEnv)):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind", "grid_maze")
        if kind == "grid_maze":
            return GridMazeEnv.from_description(spec)
        if kind == "matrix_game":
            unknown = set(spec) - {"kind", "format_version", "payoffs", "horizon", "description"}
            if unknown:
                raise ConfigurationError(f"unknown keys in matrix game description: {sorted(unknown)}")
            return MatrixGameEnv(spec["payoffs"], spec.get("horizon", 1))
        if kind == "single_state_demo":
            unknown = set(spec) - {"kind", "format_version", "reward", "other_reward", "step_cap"}
            if unknown:
                raise ConfigurationError(f"unknown keys in demo description: {sorted(unknown)}")
            return SingleStateDemoEnv(spec.get("reward", 2.0), spec.get("other_reward", 0.0),
                                      spec.get("step_cap", 10))
        raise ConfigurationError(f"unknown environment kind {kind!r}")
    if spec in ("grid_maze", "maze"):
        return GridMazeEnv.default()
    if spec in ("single_state_demo", "demo"):
        return SingleStateDemoEnv()
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return make_env(json.loads(path.read_text()))
    raise ConfigurationError(f"unknown environment {spec!r}")
