import math
from collections import deque

import numpy as np
import pytest

from admiral.advisors import (AdaptiveAdvisor, MazeAdvisor, RandomAdvisor, ScriptedSequenceAdvisor,
                              demo_script_advisor, goal_distances, make_advisor)
from admiral.envs import GridMazeEnv
from admiral.game import AdvisorSolution, ConfigurationError
from admiral.oracle import OracleConfig, advisor_value_q
from admiral.tabular import LearnerConfig, train_ae

UP, DOWN, LEFT, RIGHT = range(4)


def bfs_oracle(env, avoid_pitfalls=True):
    """Forward BFS from every cell separately (independent of the reverse search)."""
    goal = env.goal
    out = {}
    for r in range(env.rows):
        for c in range(env.cols):
            seen = {(r, c): 0}
            queue = deque([(r, c)])
            while queue:
                cur = queue.popleft()
                if cur == goal:
                    break
                if avoid_pitfalls and cur in env.pitfalls and cur != (r, c):
                    continue
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    nxt = (cur[0] + dr, cur[1] + dc)
                    if not (0 <= nxt[0] < env.rows and 0 <= nxt[1] < env.cols):
                        continue
                    if nxt in env.walls or nxt in seen:
                        continue
                    seen[nxt] = seen[cur] + 1
                    queue.append(nxt)
            out[(r, c)] = seen.get(goal, math.inf)
    return out


def state(env, p0, p1):
    return env.state_of([env.cell_id(p0), env.cell_id(p1)])


class TestMazeAdvisors:
    def test_goal_distances_match_forward_bfs(self, maze):
        dist = goal_distances(maze)
        oracle = bfs_oracle(maze)
        for cell, d in oracle.items():
            if cell in maze.pitfalls:
                continue
            assert dist[maze.cell_id(cell)] == d

    def test_grade1_enters_goal_when_adjacent(self, maze):
        sol = MazeAdvisor(maze, 1).solve(state(maze, (2, 1), (2, 3)))
        np.testing.assert_array_equal(sol[0], np.eye(4)[RIGHT])
        np.testing.assert_array_equal(sol[1], np.eye(4)[LEFT])

    def test_grade1_never_steps_into_pitfall(self, maze):
        adv = MazeAdvisor(maze, 1)
        for s in range(maze.n_states):
            if maze.is_terminal(s):
                continue
            sol = adv.solve(s)
            for j, cell in enumerate(maze.cells_of(s)):
                a = int(np.argmax(sol[j]))
                assert sol[j][a] == 1.0
                assert maze.kind[maze.moves[cell, a]] != 2

    def test_grade4_uniform(self, maze):
        sol = MazeAdvisor(maze, 4).solve(maze.initial_state())
        for p in sol.strategies:
            np.testing.assert_array_equal(p, [0.25] * 4)

    def test_grade3_walks_into_pitfall_on_the_way(self, maze):
        # from (0,2) the only Manhattan-closer move to (2,2) is down, onto the pitfall (1,2)
        sol = MazeAdvisor(maze, 3).solve(state(maze, (0, 2), (4, 4)))
        np.testing.assert_array_equal(sol[0], np.eye(4)[DOWN])

    def test_grade3_matches_manhattan_oracle(self, maze):
        adv = MazeAdvisor(maze, 3)
        gr, gc = maze.goal
        for cell in range(maze.n_cells):
            if maze.kind[cell]:
                continue
            r, c = maze.cell_rc(cell)
            closer = [a for a, (dr, dc) in enumerate(((-1, 0), (1, 0), (0, -1), (0, 1)))
                      if abs(r + dr - gr) + abs(c + dc - gc) < abs(r - gr) + abs(c - gc)]
            p = adv.solve(maze.state_of([cell, 0]))[0]
            expected = np.zeros(4)
            expected[closer] = 1 / len(closer)
            np.testing.assert_allclose(p, expected)

    def test_grade2_guided_only_near_special_cells(self, maze):
        g1, g2 = MazeAdvisor(maze, 1), MazeAdvisor(maze, 2)
        near = state(maze, (2, 1), (4, 4))     # next to the goal
        far = state(maze, (4, 0), (4, 4))
        np.testing.assert_array_equal(g2.solve(near)[0], g1.solve(near)[0])
        np.testing.assert_array_equal(g2.solve(far)[0], [0.25] * 4)

    @pytest.mark.parametrize("grade", [1, 2, 3, 4])
    def test_stationary_and_valid(self, maze, grade):
        adv = MazeAdvisor(maze, grade)
        for s in range(0, maze.n_states, 7):
            a, b = adv.solve(s), adv.solve(s)
            for p, q in zip(a.strategies, b.strategies):
                np.testing.assert_array_equal(p, q)
                assert abs(p.sum() - 1) < 1e-12 and (p >= 0).all()

    def test_grade_monotone_at_start(self, maze):
        start = maze.initial_state()
        values = []
        for grade in (1, 2, 3, 4):
            q = advisor_value_q(maze, MazeAdvisor(maze, grade))[0]
            p = MazeAdvisor(maze, grade).solve(start).joint_probabilities()
            values.append(float(p @ q.values[start]))
        assert values == sorted(values, reverse=True)


class TestOtherAdvisors:
    def test_demo_script(self):
        adv = demo_script_advisor()
        first, second = adv.solve(0), adv.solve(0)
        np.testing.assert_array_equal(first[0], [1, 0])
        np.testing.assert_array_equal(second[0], [0.5, 0.5])
        np.testing.assert_array_equal(second[1], [0.5, 0.5])
        assert adv.recommend(0, 1, np.random.default_rng()) == 0

    def test_scripted_repeats_last(self):
        adv = ScriptedSequenceAdvisor([AdvisorSolution.uniform((2,))])
        assert adv.solve(0) is adv.solve(0)
        with pytest.raises(ConfigurationError):
            ScriptedSequenceAdvisor([])

    def test_adaptive_switch_zero_is_grade1(self, maze):
        adv, g1 = AdaptiveAdvisor(maze, 0), MazeAdvisor(maze, 1)
        for s in range(0, 625, 11):
            np.testing.assert_array_equal(adv.solve(s).joint_probabilities(),
                                          g1.solve(s).joint_probabilities())

    def test_adaptive_never_switching_is_grade4(self, maze):
        adv = AdaptiveAdvisor(maze, None)
        for _ in range(5000):
            adv.end_episode()
        assert adv.current.grade == 4
        assert AdaptiveAdvisor(maze, math.inf).current.grade == 4

    def test_adaptive_switches_after_episode(self, maze):
        adv = AdaptiveAdvisor(maze, 3)
        grades = []
        for _ in range(5):
            grades.append(adv.current.grade)
            adv.end_episode()
        assert grades == [4, 4, 4, 1, 1]

    def test_adaptive_curve_crosses_grade4_after_switch(self, maze):
        cfg = LearnerConfig(alpha=0.5)
        switch = 500
        rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
        adaptive = train_ae(maze, AdaptiveAdvisor(maze, switch), cfg, 1000, rng_a).rewards[:, 0]
        weak = train_ae(maze, MazeAdvisor(maze, 4), cfg, 1000, rng_b).rewards[:, 0]
        # identical draws until the switch
        np.testing.assert_array_equal(adaptive[:switch], weak[:switch])
        gap = np.cumsum(adaptive) - np.cumsum(weak)
        assert gap[switch - 1] == 0
        assert gap[-1] > 0
        assert adaptive[switch:].mean() > weak[switch:].mean()

    def test_random_advisor_recommends_all_actions(self, rng):
        adv = RandomAdvisor((4, 4))
        counts = np.bincount([adv.recommend(0, 0, rng) for _ in range(4000)], minlength=4)
        assert counts.min() > 850

    def test_make_advisor(self, maze):
        assert make_advisor("none", maze) is None
        assert make_advisor("grade2", maze).grade == 2
        assert make_advisor("adaptive:10", maze).switch_episode == 10
        with pytest.raises(ConfigurationError):
            make_advisor("grade7", maze)
        with pytest.raises(ConfigurationError):
            make_advisor("oracle", maze)
