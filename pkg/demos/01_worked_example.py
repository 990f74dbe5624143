"""Two updates of the advisor-evaluation rule on a one-state game, then the epsilon0 heuristic.

Run: python3 demos/01_worked_example.py
"""
# %%
import numpy as np

from admiral import LearnerConfig, SingleStateDemoEnv, normalize_epsilon0, train_ae
from admiral.advisors import demo_script_advisor

# %% [markdown]
# One state, two actions per agent, reward 2 for the joint action (0, 0).
# The scripted advisor first insists on (0, 0), then becomes uniform.

# %%
env = SingleStateDemoEnv(step_cap=2)
cfg = LearnerConfig(alpha=0.9, beta=0.9, eta=0.0, eta_prime=1.0)
trace = []
train_ae(env, demo_script_advisor(), cfg, 1, np.random.default_rng(0),
         on_step=lambda learners, out: trace.append(learners[0].q[0, (0, 0)]))
print("Q(s, (0, 0)) after each update:", [float(v) for v in trace])

# %% [markdown]
# First update: 0.9 * 2 = 1.8.
# Second update: the uniform advisor weighs Q(s, (0, 0)) by 1/4 in the bootstrap,
# 0.1 * 1.8 + 0.9 * (2 + 0.9 * 0.25 * 1.8) = 2.3445.

# %%
for cr, rcr, mcr in [(3560, 930, 3800), (1700, 930, 3800), (58000, -63000, 90000)]:
    print(f"CR {cr:>6}  RCR {rcr:>6}  MCR {mcr:>6}  ->  epsilon0 {normalize_epsilon0(cr, rcr, mcr)}")
