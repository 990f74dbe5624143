"""Decision-making with advice: cumulative reward per advisor and error to the joint optimum.

Run: python3 demos/03_decision_making.py [out_dir]
Writes dm_rewards.svg and dm_mse.svg; about 30 s.
"""
# %%
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from admiral import harness

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
# epsilon0 per grade from the advisor evaluation demo
eps0 = {"grade1": 0.9, "grade2": 0.4, "grade3": 0.1, "grade4": 0.0}

# %%
cfg = replace(harness.load_config("dm-sweep"), out=str(out))
series = {}
for name, e0 in eps0.items():
    params = dict(cfg.params, epsilon_prime={"start": e0, "end": 0.0, "horizon": "run"})
    run_cfg = replace(cfg, advisor=name, params=params)
    paths = []
    for m in harness.run_seeds(run_cfg):
        paths.append(harness.write_metrics_csv(out / name / f"metrics_seed{m.seed}.csv", m))
    series[name] = paths
    final = np.mean([harness.read_metrics_csv(p)["cumulative_reward"][-1].mean() for p in paths])
    print(f"{name}: epsilon0 {e0}, final cumulative reward {final:.1f}")
print("plot:", harness.emit_plot(series, out / "dm_rewards.svg", title="decision-making by advisor"))

# %% [markdown]
# Error to the joint-optimal Q-function, weighted by how often each entry was
# updated during the run.

# %%
mse_cfg = replace(harness.load_config("dm-mse"), out=str(out))
paths = [harness.write_metrics_csv(out / "mse" / f"metrics_seed{m.seed}.csv", m)
         for m in harness.run_seeds(mse_cfg)]
curve = np.mean([harness.read_metrics_csv(p)["mse_to_oracle"].mean(axis=1) for p in paths], axis=0)
print(f"MSE first 100 episodes {curve[:100].mean():.4f}, last 100 {curve[-100:].mean():.4f}")
print("plot:", harness.emit_plot({"grade1": paths}, out / "dm_mse.svg", metric="mse_to_oracle"))
