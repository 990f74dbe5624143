"""Pre-learning on the maze: how much should each of the four advisors be trusted?

Run: python3 demos/02_advisor_evaluation.py [episodes] [seeds]
Defaults (2000 episodes, 5 seeds) take about 15 s.
"""
# %%
import sys
from dataclasses import replace

from admiral import GridMazeEnv, harness

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
n_seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 5

print(GridMazeEnv.default().render())

# %% [markdown]
# Each advisor drives the evaluation learner for `episodes` episodes. The random
# advisor gives the floor (RCR); the best possible return, reduced by the share of
# forced random moves, gives the ceiling (MCR).

# %%
cfg = harness.load_config("advisor-sweep")
cfg = replace(cfg, episodes=episodes, ae_episodes=episodes, seeds=list(range(n_seeds)))
rows = harness.evaluate_advisors(cfg)
print(f"{'advisor':8} {'CR':>9} {'RCR':>9} {'MCR':>9} {'epsilon0':>9}")
for r in rows:
    print(f"{r.advisor:8} {r.cr:9.1f} {r.rcr:9.1f} {r.mcr:9.1f} {r.epsilon0:9.1f}")

# %% [markdown]
# The grade-4 advisor draws its recommendations exactly like the random
# baseline, so its row reproduces RCR and gets epsilon0 = 0.
