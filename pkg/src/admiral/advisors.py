"""Advisors: external sources of action recommendations.

An advisor maps a state to an :class:`AdvisorSolution`, one mixed
strategy per agent. ``recommend`` samples a single agent's action from
its strategy.
"""
from __future__ import annotations

import math
from collections import deque
from typing import Sequence

import numpy as np

from .envs import GridMazeEnv
from .game import AdvisorSolution, ConfigurationError


class Advisor:
    #: True when ``solve`` depends on the state alone; the value oracle
    #: can then evaluate the advisor exactly instead of by rollouts.
    stationary = True

    def __init__(self, action_sizes: Sequence[int]):
        self.action_sizes = tuple(action_sizes)

    def solve(self, state: int) -> AdvisorSolution:
        raise NotImplementedError

    def recommend(self, state: int, agent: int, rng: np.random.Generator) -> int:
        p = self.solve(state)[agent]
        if p.max() == 1.0:
            return int(p.argmax())
        return int(rng.choice(p.size, p=p))

    def end_episode(self) -> None:
        """Called by the trainers after every episode."""

    def observe_transition(self, state, joint_action, step) -> None:
        """Optional hook for advisors that adapt online."""


class RandomAdvisor(Advisor):
    def solve(self, state):
        return AdvisorSolution.uniform(self.action_sizes)

    def recommend(self, state, agent, rng):
        return int(rng.integers(self.action_sizes[agent]))


class FixedAdvisor(Advisor):
    """Always recommends the same joint action."""

    def __init__(self, action_sizes, actions):
        super().__init__(action_sizes)
        self._solution = AdvisorSolution.deterministic(actions, action_sizes)

    def solve(self, state):
        return self._solution


class TableAdvisor(Advisor):
    """Deterministic advisor driven by a joint-action lookup per state."""

    def __init__(self, action_sizes, joint_actions: np.ndarray):
        super().__init__(action_sizes)
        self.joint_actions = np.asarray(joint_actions, dtype=np.int64)
        eyes = [np.eye(n) for n in self.action_sizes]
        self._cache = {}
        self._eyes = eyes

    def solve(self, state):
        sol = self._cache.get(state)
        if sol is None:
            acts = self.joint_actions[state]
            sol = AdvisorSolution([e[a] for e, a in zip(self._eyes, acts)])
            self._cache[state] = sol
        return sol

    def recommend(self, state, agent, rng):
        return int(self.joint_actions[state][agent])


class ScriptedSequenceAdvisor(Advisor):
    """Replays a fixed list of solutions, one per ``solve`` call.

    Recommendations come from ``actions`` (a fixed joint action) when
    given, otherwise from the most recent solution. Once the list is
    exhausted the last solution repeats.
    """

    stationary = False

    def __init__(self, solutions: Sequence[AdvisorSolution], actions: Sequence[int] | None = None):
        if not solutions:
            raise ConfigurationError("scripted advisor needs at least one solution")
        super().__init__(solutions[0].sizes)
        self.solutions = list(solutions)
        self.actions = None if actions is None else tuple(actions)
        self.calls = 0

    def solve(self, state):
        sol = self.solutions[min(self.calls, len(self.solutions) - 1)]
        self.calls += 1
        return sol

    def recommend(self, state, agent, rng):
        if self.actions is not None:
            return self.actions[agent]
        p = self.solutions[max(min(self.calls, len(self.solutions)) - 1, 0)][agent]
        return int(rng.choice(p.size, p=p))


class MazeAdvisor(Advisor):
    """Rule-based grid-maze advisor of a given grade.

    grade 1
        Shortest path to the goal treating pitfalls as walls.
    grade 2
        The grade-1 move when the agent is within one step of the goal or
        of a pitfall, uniform random elsewhere.
    grade 3
        Uniform over the moves that shrink the Manhattan distance to the
        goal, pitfalls ignored.
    grade 4
        Uniform random.

    Agents not listed in ``agents`` receive uniform placeholder strategies.
    """

    def __init__(self, env: GridMazeEnv, grade: int, agents: Sequence[int] | None = None):
        if grade not in (1, 2, 3, 4):
            raise ConfigurationError(f"maze advisor grade must be 1..4, got {grade!r}")
        super().__init__(env.action_sizes)
        self.env = env
        self.grade = grade
        self.agents = tuple(range(env.n_agents)) if agents is None else tuple(agents)
        self.cell_policy = _cell_policies(env, grade)
        self._cache: dict[int, AdvisorSolution] = {}

    def solve(self, state):
        sol = self._cache.get(state)
        if sol is None:
            cells = self.env.cells_of(state)
            uniform = np.full(4, 0.25)
            sol = AdvisorSolution([
                self.cell_policy[c] if j in self.agents else uniform
                for j, c in enumerate(cells)
            ])
            self._cache[state] = sol
        return sol

    def recommend(self, state, agent, rng):
        if self.grade == 4:
            # same draws as RandomAdvisor, so a grade-4 run replays the baseline run
            return int(rng.integers(self.action_sizes[agent]))
        return super().recommend(state, agent, rng)

    def __repr__(self):
        return f"MazeAdvisor(grade={self.grade})"


def maze_advisor(env: GridMazeEnv, grade: int) -> MazeAdvisor:
    return MazeAdvisor(env, grade)


def goal_distances(env: GridMazeEnv, avoid_pitfalls: bool = True) -> np.ndarray:
    """Breadth-first step counts from every cell to the goal (``inf`` if unreachable)."""
    dist = np.full(env.n_cells, np.inf)
    goal = env.cell_id(env.goal)
    dist[goal] = 0
    # reverse edges of the move table
    preds = [[] for _ in range(env.n_cells)]
    for c in range(env.n_cells):
        for a in range(4):
            n = env.moves[c, a]
            if n != c:
                preds[n].append(c)
    queue = deque([goal])
    while queue:
        n = queue.popleft()
        for c in preds[n]:
            if dist[c] != np.inf:
                continue
            if avoid_pitfalls and env.kind[c] == 2:
                continue
            dist[c] = dist[n] + 1
            queue.append(c)
    return dist


def _cell_policies(env: GridMazeEnv, grade: int) -> np.ndarray:
    n = env.n_cells
    policy = np.full((n, 4), 0.25)
    if grade == 4:
        return policy
    if grade in (1, 2):
        dist = goal_distances(env)
        near = _near_special(env)
        for c in range(n):
            if env.kind[c] != 0 or not np.isfinite(dist[c]):
                continue
            if grade == 2 and not near[c]:
                continue
            # first action (in up/down/left/right order) that strictly shortens the path
            nexts = [dist[env.moves[c, a]] for a in range(4)]
            best = int(np.argmin(nexts))
            policy[c] = np.eye(4)[best]
        return policy
    goal_r, goal_c = env.goal
    for c in range(n):
        if env.kind[c] != 0:
            continue
        r, q = env.cell_rc(c)
        here = abs(r - goal_r) + abs(q - goal_c)
        closer = []
        for a in range(4):
            nr, nq = env.cell_rc(env.moves[c, a])
            if abs(nr - goal_r) + abs(nq - goal_c) < here:
                closer.append(a)
        if closer:
            policy[c] = 0.0
            policy[c, closer] = 1.0 / len(closer)
    return policy


def _near_special(env: GridMazeEnv) -> np.ndarray:
    """Cells one move away from the goal or from a pitfall."""
    near = np.zeros(env.n_cells, dtype=bool)
    for c in range(env.n_cells):
        for a in range(4):
            if env.kind[env.moves[c, a]] != 0:
                near[c] = True
    return near


class AdaptiveAdvisor(Advisor):
    """Plays like the random advisor for ``switch_episode`` episodes, then like grade 1.

    ``switch_episode=None`` (or ``math.inf``) never switches.
    """

    stationary = False

    def __init__(self, env: GridMazeEnv, switch_episode: float | None):
        super().__init__(env.action_sizes)
        if switch_episode is not None and switch_episode < 0:
            raise ConfigurationError("switch_episode must be >= 0")
        self.switch_episode = math.inf if switch_episode is None else switch_episode
        self.weak = MazeAdvisor(env, 4)
        self.strong = MazeAdvisor(env, 1)
        self.episodes_seen = 0

    @property
    def current(self) -> MazeAdvisor:
        return self.strong if self.episodes_seen >= self.switch_episode else self.weak

    def solve(self, state):
        return self.current.solve(state)

    def recommend(self, state, agent, rng):
        return self.current.recommend(state, agent, rng)

    def end_episode(self):
        self.episodes_seen += 1


def scripted_adaptive_advisor(env: GridMazeEnv, switch_episode: float | None) -> AdaptiveAdvisor:
    return AdaptiveAdvisor(env, switch_episode)


def demo_script_advisor() -> ScriptedSequenceAdvisor:
    """Two-agent, two-action script: recommend (0, 0); solution is pure (0, 0), then uniform."""
    sizes = (2, 2)
    return ScriptedSequenceAdvisor(
        [AdvisorSolution.deterministic((0, 0), sizes), AdvisorSolution.uniform(sizes)],
        actions=(0, 0))


ADVISOR_NAMES = ("grade1", "grade2", "grade3", "grade4", "random", "adaptive:<episode>",
                 "scripted-demo", "none")


def make_advisor(spec, env) -> Advisor | None:
    """Parse an advisor name (see ``ADVISOR_NAMES``); ``none`` gives ``None``."""
    if spec is None or isinstance(spec, Advisor):
        return spec
    name = str(spec).strip().lower()
    if name == "none":
        return None
    if name == "random":
        return RandomAdvisor(env.action_sizes)
    if name == "scripted-demo" and tuple(env.action_sizes) == (2, 2):
        return demo_script_advisor()
    if name.startswith("grade") and name[5:].isdigit() and isinstance(env, GridMazeEnv):
        return MazeAdvisor(env, int(name[5:]))
    if name.startswith("adaptive") and isinstance(env, GridMazeEnv):
        _, _, arg = name.partition(":")
        switch = None if arg in ("", "inf", "never") else int(arg)
        return AdaptiveAdvisor(env, switch)
    raise ConfigurationError(f"unknown advisor {spec!r} for {type(env).__name__}")
