"""Neural decision-making on the one-hot maze, with and without the grade-1 advisor.

Run: python3 demos/04_neural.py [seeds]
About 15 s per seed.
"""
# %%
import sys
from dataclasses import replace

import numpy as np

from admiral import harness
from admiral.neural import episodes_to_threshold, evaluate_actors, evaluate_random_policy

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3

# %%
cfg = replace(harness.load_config("dm-nn"), seeds=list(range(n_seeds)))
advised = harness.run_seeds(cfg)
plain = harness.run_seeds(replace(cfg, params=dict(cfg.params, epsilon_prime=0.0)))
for label, runs in (("grade-1 advice", advised), ("no advice", plain)):
    hits = [episodes_to_threshold(m.rewards, 1.5) for m in runs]
    print(f"{label:15} episodes to a 20-episode mean of 1.5: {hits}")

# %% [markdown]
# Actor-critic: a centralized critic sees the others' actions, while each actor
# acts from its own cell only. After training the actors run on their own.

# %%
ac = harness.load_config("dm-ac")
for m in harness.run_seeds(replace(ac, seeds=[0])):
    env = ac.make_env()
    learned = evaluate_actors(env, m.model.actors, 200, np.random.default_rng(1)).mean()
    random = evaluate_random_policy(env, 200, np.random.default_rng(1)).mean()
    print(f"actors {learned:.2f} vs uniform random {random:.2f} summed reward per episode")
