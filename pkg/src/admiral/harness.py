"""Experiment orchestration: configs, seeded runs, CSV/SVG output.

A config is a JSON object with ``format_version: 1``. Unknown keys are
rejected. A ``preset`` key pulls in one of the shipped experiment
presets, and the remaining keys override it. Every run derives
independent random streams from its seed with :func:`seed_streams`.
"""
from __future__ import annotations

import csv
import glob
import io as _io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .advisors import Advisor, make_advisor
from .envs import make_env
from .game import ConfigurationError, JointQTable
from .io import save_q_tables, save_weights
from .neural import NeuralConfig, train_ae_nn, train_dm_ac, train_dm_nn
from .oracle import OracleConfig, advisor_value_q, bellman_residual, mse, nash_q_identical_interest
from .tabular import LearnerConfig, Schedule, normalize_epsilon0, train_ae, train_dm

FORMAT_VERSION = 1
LEARNERS = ("dm", "ae", "dm-nn", "ae-nn", "dm-ac")
CSV_COLUMNS = ("episode", "seed", "agent", "episode_reward", "cumulative_reward",
               "epsilon", "epsilon_prime", "mse_to_oracle")
STREAMS = ("env", "explore", "advisor", "buffer", "init")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for each consumer of randomness in one run.

    ``SeedSequence(seed).spawn`` gives one child per name in ``STREAMS``,
    so toggling one component (say, a stochastic advisor) never shifts the
    draws seen by another.
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


# --------------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    env: object = "grid_maze"
    learner: str = "dm"
    advisor: object = "none"           # one name for all agents, or a list per agent
    candidates: list | None = None     # advisors compared by evaluate-advisor / pipeline
    baseline_advisor: str = "random"   # advisor whose cumulative reward is the RCR
    params: dict = field(default_factory=dict)
    ae_params: dict = field(default_factory=dict)
    episodes: int = 2000
    ae_episodes: int | None = None
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs"
    oracle: str | None = None          # "advisor", "nash" or None
    oracle_advisor: str | None = None  # defaults to the run's advisor
    oracle_rollouts: int = 512
    mse_weighting: str = "visits"      # "visits" or "uniform"
    mcr: float | None = None
    offline: list | None = None        # rows of {"advisor", "cr", "rcr", "mcr"}
    run_config: str | None = None      # training config replayed by the oracle command
    plot: dict | None = None
    save_model: bool = True
    workers: int = 1
    preset: str | None = None
    description: str = ""

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ConfigurationError(f"learner: expected one of {LEARNERS}, got {self.learner!r}")
        if not isinstance(self.seeds, list) or not self.seeds:
            raise ConfigurationError("seeds: need a non-empty list of integers")
        if any(not isinstance(s, int) or isinstance(s, bool) for s in self.seeds):
            raise ConfigurationError("seeds: entries must be integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds: entries must be distinct")
        if not isinstance(self.episodes, int) or self.episodes < 1:
            raise ConfigurationError("episodes: must be a positive integer")
        if self.ae_episodes is not None and (not isinstance(self.ae_episodes, int) or self.ae_episodes < 1):
            raise ConfigurationError("ae_episodes: must be a positive integer")
        if self.oracle not in (None, "advisor", "nash"):
            raise ConfigurationError(f"oracle: expected 'advisor', 'nash' or null, got {self.oracle!r}")
        if self.mse_weighting not in ("visits", "uniform"):
            raise ConfigurationError(f"mse_weighting: expected 'visits' or 'uniform', got {self.mse_weighting!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigurationError("workers: must be a positive integer")
        if not isinstance(self.params, dict) or not isinstance(self.ae_params, dict):
            raise ConfigurationError("params/ae_params: must be objects")

    # derived objects; built on demand so configs stay plain data
    def make_env(self):
        try:
            return make_env(self.env)
        except ConfigurationError as exc:
            raise ConfigurationError(f"env: {exc}") from exc

    def make_advisors(self, env, spec=None, field_name="advisor") -> list[Advisor | None]:
        spec = self.advisor if spec is None else spec
        names = spec if isinstance(spec, list) else [spec] * env.n_agents
        if len(names) != env.n_agents:
            raise ConfigurationError(f"{field_name}: need {env.n_agents} entries, got {len(names)}")
        out = []
        cache = {}
        for name in names:
            # agents naming the same advisor share one instance
            if name not in cache:
                try:
                    cache[name] = make_advisor(name, env)
                except ConfigurationError as exc:
                    raise ConfigurationError(f"{field_name}: {exc}") from exc
            out.append(cache[name])
        return out

    def validate(self):
        """Build everything once so bad names fail before any run starts."""
        env = self.make_env()
        self.make_advisors(env)
        for i, cand in enumerate(self.candidates or []):
            self.make_advisors(env, cand, f"candidates[{i}]")
        self.make_advisors(env, self.baseline_advisor, "baseline_advisor")
        if self.oracle_advisor is not None:
            self.make_advisors(env, self.oracle_advisor, "oracle_advisor")
        learner_config(self.learner, self.params, self.episodes, "params")
        learner_config("ae", self.ae_params, self.ae_episodes or self.episodes, "ae_params")
        return self


def preset_names() -> list[str]:
    root = resources.files("admiral") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("admiral") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigurationError(f"preset: unknown preset {name!r} (available: {', '.join(preset_names())})")
    return json.loads(path.read_text())


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    raw = dict(raw)
    if raw.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"format_version: expected {FORMAT_VERSION}, got {raw.get('format_version')!r}")
    if raw.get("preset"):
        merged = load_preset(raw["preset"])
        merged.update(raw)
        raw = merged
    raw.pop("format_version")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**raw)


def load_config(path, out: str | None = None, seeds: Sequence[int] | None = None) -> ExperimentConfig:
    """Read a config file (or a bare preset name) and apply command-line overrides."""
    p = Path(path)
    if p.is_file():
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    elif str(path) in preset_names():
        raw = {"format_version": FORMAT_VERSION, "preset": str(path)}
    else:
        raise ConfigurationError(f"config file {path} not found")
    cfg = config_from_dict(raw)
    if out is not None:
        cfg = replace(cfg, out=str(out))
    if seeds is not None:
        cfg = replace(cfg, seeds=list(seeds))
    return cfg.validate()


def _schedule(value, episodes, name) -> Schedule:
    try:
        if isinstance(value, (int, float)):
            return Schedule.constant(float(value))
        if isinstance(value, dict):
            unknown = set(value) - {"start", "end", "horizon"}
            if unknown:
                raise ConfigurationError(f"unknown schedule keys {sorted(unknown)}")
            horizon = value.get("horizon", "run")
            horizon = episodes if horizon == "run" else float(horizon)
            return Schedule(float(value["start"]), float(value.get("end", 0.0)), horizon)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name}: bad schedule {value!r} ({exc})") from exc
    raise ConfigurationError(f"{name}: a schedule is a number or {{start, end, horizon}}")


def learner_config(kind: str, params: dict, episodes: int, where: str = "params"):
    """Turn a ``params`` object into a :class:`LearnerConfig` or :class:`NeuralConfig`."""
    cls = NeuralConfig if kind in ("dm-nn", "ae-nn", "dm-ac") else LearnerConfig
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {', '.join(unknown)}")
    kwargs = dict(params)
    for key in ("epsilon", "epsilon_prime"):
        if key in kwargs:
            kwargs[key] = _schedule(kwargs[key], episodes, f"{where}.{key}")
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


# ----------------------------------------------------------------------- runs

@dataclass
class RunMetrics:
    seed: int
    rewards: np.ndarray               # (episodes, n_agents)
    epsilon: np.ndarray
    epsilon_prime: np.ndarray
    mse: np.ndarray | None = None     # (episodes, n_agents)
    wall_clock: float = 0.0
    model: object = None              # TrainResult or NeuralResult

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.rewards, axis=0)


class TableRecorder:
    """Logs which table entries changed in each episode.

    Replaying the log afterwards gives the error series against a fixed
    oracle under weights that are only known once training has finished
    (the run's final visit counts), without keeping a full copy per episode.
    """

    def __init__(self):
        self.start = None
        self.prev = None
        self.changes: list[list[tuple[np.ndarray, np.ndarray]]] = []

    def __call__(self, episode, learners):
        tables = [lr.q.values for lr in learners]
        if self.start is None:
            self.start = [np.full_like(t, lr.config.q_init) for t, lr in zip(tables, learners)]
            self.prev = [s.copy() for s in self.start]
        entry = []
        for prev, cur in zip(self.prev, tables):
            idx = np.flatnonzero(prev.ravel() != cur.ravel())
            vals = cur.ravel()[idx].copy()
            prev.ravel()[idx] = vals
            entry.append((idx, vals))
        self.changes.append(entry)

    def mse_series(self, oracle: Sequence[np.ndarray], weights: Sequence[np.ndarray | None]) -> np.ndarray:
        n = len(oracle)
        out = np.zeros((len(self.changes), n))
        for j in range(n):
            cur = self.start[j].ravel().copy()
            target = np.asarray(oracle[j]).ravel()
            w = None if weights[j] is None else np.asarray(weights[j], dtype=float).ravel()
            w = np.full(cur.size, 1.0) if w is None else w
            total = w.sum()
            err = w * (cur - target) ** 2
            acc = err.sum()
            for ep, entry in enumerate(self.changes):
                idx, vals = entry[j]
                if idx.size:
                    acc -= err[idx].sum()
                    cur[idx] = vals
                    err[idx] = w[idx] * (vals - target[idx]) ** 2
                    acc += err[idx].sum()
                # re-sum now and then to keep rounding drift away
                if ep % 256 == 255:
                    acc = err.sum()
                out[ep, j] = acc / total
        return out


def oracle_tables(cfg: ExperimentConfig, env, advisors) -> list[np.ndarray]:
    beta = float(cfg.params.get("beta", 0.9))
    if cfg.oracle == "nash":
        return [t.values for t in nash_q_identical_interest(env, beta)]
    spec = cfg.oracle_advisor
    adv = advisors[0] if spec is None else cfg.make_advisors(env, spec, "oracle_advisor")[0]
    if adv is None:
        raise ConfigurationError("oracle_advisor: the advisor oracle needs an advisor")
    oc = OracleConfig(beta=beta, rollouts=cfg.oracle_rollouts)
    return [t.values for t in advisor_value_q(env, adv, oc, np.random.default_rng(0))]


def run_one(cfg: ExperimentConfig, seed: int, learner: str | None = None, advisor=None,
            params: dict | None = None, episodes: int | None = None,
            with_oracle: bool = True) -> RunMetrics:
    """Train one seed; optional overrides let the pipeline reuse a config for its stages."""
    learner = learner or cfg.learner
    episodes = episodes or cfg.episodes
    params = cfg.params if params is None else params
    env = cfg.make_env()
    advisors = cfg.make_advisors(env, advisor)
    lc = learner_config(learner, params, episodes)
    rngs = seed_streams(seed)
    env.reset(rngs["env"])
    want_mse = with_oracle and cfg.oracle is not None
    if want_mse and learner not in ("dm", "ae"):
        raise ConfigurationError("oracle: MSE traces need a tabular learner (dm or ae)")
    recorder = TableRecorder() if want_mse else None

    t0 = time.perf_counter()
    if learner == "dm":
        res = train_dm(env, advisors, lc, episodes, rngs["explore"], on_episode=recorder,
                       advisor_rng=rngs["advisor"])
    elif learner == "ae":
        res = train_ae(env, _single(advisors, "advisor"), lc, episodes, rngs["explore"],
                       on_episode=recorder, advisor_rng=rngs["advisor"])
    elif learner == "dm-nn":
        res = train_dm_nn(env, advisors, lc, episodes, rngs["explore"], init_rng=rngs["init"],
                          buffer_rng=rngs["buffer"], advisor_rng=rngs["advisor"])
    elif learner == "ae-nn":
        res = train_ae_nn(env, _single(advisors, "advisor"), lc, episodes, rngs["explore"],
                          init_rng=rngs["init"], buffer_rng=rngs["buffer"], advisor_rng=rngs["advisor"])
    else:
        res = train_dm_ac(env, advisors, lc, episodes, rngs["explore"], init_rng=rngs["init"],
                          advisor_rng=rngs["advisor"])
    wall = time.perf_counter() - t0

    series = None
    if want_mse:
        oracle = oracle_tables(cfg, env, advisors)
        weights = ([v for v in res.visits] if cfg.mse_weighting == "visits"
                   else [None] * env.n_agents)
        series = recorder.mse_series(oracle, weights)
    return RunMetrics(seed, res.rewards, res.epsilon, res.epsilon_prime, series, wall, res)


def _single(advisors, name):
    first = advisors[0]
    if first is None or any(a is not first for a in advisors):
        raise ConfigurationError(f"{name}: advisor evaluation needs one advisor shared by all agents")
    return first


def _run_seed(args):
    cfg, seed, kwargs = args
    return run_one(cfg, seed, **kwargs)


def run_seeds(cfg: ExperimentConfig, **kwargs) -> list[RunMetrics]:
    jobs = [(cfg, s, kwargs) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_seed, jobs))
    return [_run_seed(j) for j in jobs]


# --------------------------------------------------------------------- output

def _fmt(x) -> str:
    return repr(float(x)) if math.isfinite(x) else ""


def metrics_csv_text(m: RunMetrics) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cum = m.cumulative
    for ep in range(m.rewards.shape[0]):
        for j in range(m.rewards.shape[1]):
            w.writerow([ep, m.seed, j, _fmt(m.rewards[ep, j]), _fmt(cum[ep, j]),
                        _fmt(m.epsilon[ep]), _fmt(m.epsilon_prime[ep]),
                        "" if m.mse is None else _fmt(m.mse[ep, j])])
    return buf.getvalue()


def write_metrics_csv(path, m: RunMetrics) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(metrics_csv_text(m))
    return path


def read_metrics_csv(path) -> dict[str, np.ndarray]:
    """Columns of a metrics CSV as arrays shaped (episodes, agents); blanks become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    missing = set(CSV_COLUMNS) - set(rows[0])
    if missing:
        raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")
    n_agents = max(int(r["agent"]) for r in rows) + 1
    n_eps = max(int(r["episode"]) for r in rows) + 1
    out = {}
    for col in CSV_COLUMNS:
        arr = np.full((n_eps, n_agents), np.nan)
        for r in rows:
            v = r[col]
            arr[int(r["episode"]), int(r["agent"])] = float(v) if v != "" else np.nan
        out[col] = arr
    return out


def save_model(path, m: RunMetrics, env) -> Path:
    res = m.model
    desc = env.description()
    if hasattr(res, "tables"):
        save_q_tables(path, res.tables, desc)
    else:
        nets = {f"q{j}": net for j, net in enumerate(res.nets)}
        if res.actors is not None:
            nets = {f"critic{j}": net for j, net in enumerate(res.nets)}
            nets.update({f"actor{j}": net for j, net in enumerate(res.actors)})
        save_weights(path, nets, desc)
    return Path(path)


# ------------------------------------------------------------------- commands

def cmd_train(cfg: ExperimentConfig) -> list[Path]:
    """One metrics CSV and one model file per seed under ``<out>/train``."""
    out = Path(cfg.out) / "train"
    env = cfg.make_env()
    written = []
    for m in run_seeds(cfg):
        written.append(write_metrics_csv(out / f"metrics_seed{m.seed}.csv", m))
        if cfg.save_model:
            written.append(save_model(out / f"model_seed{m.seed}.json", m, env))
    return written


@dataclass
class AdvisorReport:
    advisor: str
    cr: float           # mean cumulative reward over seeds
    rcr: float
    mcr: float
    epsilon0: float
    per_seed: list = field(default_factory=list)


def _cumulative_reward(m: RunMetrics) -> float:
    # mean over agents of each agent's total reward
    return float(m.rewards.sum(axis=0).mean())


def evaluate_advisors(cfg: ExperimentConfig) -> list[AdvisorReport]:
    if cfg.offline is not None:
        rows = []
        for i, row in enumerate(cfg.offline):
            try:
                cr, rcr, mcr = float(row["cr"]), float(row["rcr"]), float(row["mcr"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigurationError(f"offline[{i}]: need numeric cr, rcr and mcr") from exc
            rows.append(AdvisorReport(str(row.get("advisor", f"advisor{i + 1}")), cr, rcr, mcr,
                                      normalize_epsilon0(cr, rcr, mcr)))
        return rows
    env = cfg.make_env()
    episodes = cfg.ae_episodes or cfg.episodes
    ae_cfg = learner_config("ae", cfg.ae_params, episodes, "ae_params")
    candidates = cfg.candidates if cfg.candidates is not None else [cfg.advisor]

    def mean_cr(spec):
        runs = run_seeds(cfg, learner="ae", advisor=spec, params=cfg.ae_params,
                         episodes=episodes, with_oracle=False)
        crs = [_cumulative_reward(m) for m in runs]
        return float(np.mean(crs)), crs

    rcr, _ = mean_cr(cfg.baseline_advisor)
    if cfg.mcr is not None:
        mcr = float(cfg.mcr)
    else:
        # the best possible return, discounted by the share of forced random moves
        mcr = (1.0 - ae_cfg.eta) * env.max_episode_return() * episodes
    rows = []
    for spec in candidates:
        cr, crs = mean_cr(spec)
        rows.append(AdvisorReport(_name(spec), cr, rcr, mcr, normalize_epsilon0(cr, rcr, mcr), crs))
    return rows


def _name(spec) -> str:
    return ",".join(map(str, spec)) if isinstance(spec, list) else str(spec)


REPORT_COLUMNS = ("advisor", "cr", "rcr", "mcr", "epsilon0")


def write_report(path, rows: Sequence[AdvisorReport]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([r.advisor, repr(r.cr), repr(r.rcr), repr(r.mcr), repr(r.epsilon0)])
    path.write_text(buf.getvalue())
    return path


def cmd_evaluate_advisor(cfg: ExperimentConfig) -> list[AdvisorReport]:
    rows = evaluate_advisors(cfg)
    write_report(Path(cfg.out) / "evaluate_advisor" / "report.csv", rows)
    return rows


def select_advisor(rows: Sequence[AdvisorReport]) -> AdvisorReport:
    """Highest epsilon0 wins; ties go to the earlier candidate."""
    best = rows[0]
    for r in rows[1:]:
        if r.epsilon0 > best.epsilon0:
            best = r
    return best


def cmd_pipeline(cfg: ExperimentConfig) -> dict:
    """Pre-learning evaluation, then decision-making seeded with the winner's epsilon0."""
    if cfg.offline is not None:
        raise ConfigurationError("offline: the pipeline needs measured cumulative rewards")
    if cfg.learner not in ("dm", "dm-nn", "dm-ac"):
        raise ConfigurationError(f"learner: the pipeline trains a decision-making learner, got {cfg.learner!r}")
    rows = cmd_evaluate_advisor(replace(cfg, out=str(Path(cfg.out) / "pipeline")))
    best = select_advisor(rows)
    candidates = cfg.candidates if cfg.candidates is not None else [cfg.advisor]
    spec = candidates[[r.advisor for r in rows].index(best.advisor)]
    params = dict(cfg.params)
    sched = params.get("epsilon_prime", {"horizon": "run"})
    horizon = sched.get("horizon", "run") if isinstance(sched, dict) else "run"
    end = sched.get("end", 0.0) if isinstance(sched, dict) else 0.0
    params["epsilon_prime"] = {"start": best.epsilon0, "end": min(end, best.epsilon0), "horizon": horizon}
    dm_cfg = replace(cfg, advisor=spec, params=params, out=str(Path(cfg.out) / "pipeline"))
    written = cmd_train(dm_cfg)
    summary = {"advisor": best.advisor, "epsilon0": best.epsilon0,
               "rows": [vars(r) for r in rows], "files": [str(p) for p in written]}
    path = Path(cfg.out) / "pipeline" / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_oracle(cfg: ExperimentConfig) -> dict:
    """Oracle tables for ``cfg.env``; with ``run_config`` also per-episode MSE CSVs."""
    if cfg.oracle is None:
        raise ConfigurationError("oracle: choose 'advisor' or 'nash'")
    env = cfg.make_env()
    out = Path(cfg.out) / "oracle"
    advisors = cfg.make_advisors(env)
    tables = oracle_tables(cfg, env, advisors)
    qt = [JointQTable(j, env.action_sizes, t) for j, t in enumerate(tables)]
    save_q_tables(out / "oracle_q.json", qt, env.description())
    result = {"oracle": cfg.oracle, "files": [str(out / "oracle_q.json")]}
    if cfg.oracle == "nash":
        beta = float(cfg.params.get("beta", 0.9))
        result["bellman_residual"] = max(bellman_residual(q, env, beta) for q in qt)
    if cfg.run_config is not None:
        run = load_config(cfg.run_config)
        if run.make_env().description() != env.description():
            raise ConfigurationError("run_config: the training run uses a different environment")
        replay = replace(run, oracle=cfg.oracle, oracle_advisor=cfg.oracle_advisor or _first(cfg.advisor),
                         mse_weighting=cfg.mse_weighting, seeds=cfg.seeds, out=cfg.out)
        for m in run_seeds(replay):
            p = write_metrics_csv(out / f"mse_seed{m.seed}.csv", m)
            result["files"].append(str(p))
    return result


def _first(spec):
    if spec in (None, "none"):
        return None
    return spec[0] if isinstance(spec, list) else spec


def emit_plot(series: dict[str, Sequence], output, metric: str = "cumulative_reward",
              title: str = "", ylabel: str | None = None) -> Path:
    """Mean line per series with a +/- one standard deviation band across seeds.

    ``series`` maps a legend label to the CSV files of that series (one per
    seed); legend order follows the mapping's order. Values are averaged
    over agents within each file first.
    """
    if not series or not any(series.values()):
        raise ConfigurationError("plot: no input CSV files")
    if metric not in CSV_COLUMNS[3:]:
        raise ConfigurationError(f"plot: unknown metric {metric!r}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "admiral"

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, paths in series.items():
        if not paths:
            raise ConfigurationError(f"plot: series {label!r} has no files")
        runs = [np.nanmean(read_metrics_csv(p)[metric], axis=1) for p in paths]
        n = min(len(r) for r in runs)
        data = np.array([r[:n] for r in runs])
        episodes = np.arange(1, n + 1)
        mean = data.mean(axis=0)
        line, = ax.plot(episodes, mean, label=label, linewidth=1.2)
        if len(runs) > 1:
            sd = data.std(axis=0)
            ax.fill_between(episodes, mean - sd, mean + sd, alpha=0.25, color=line.get_color(),
                            linewidth=0)
    ax.set_xlabel("episode")
    ax.set_ylabel(ylabel or metric.replace("_", " ") + " (mean ± std over seeds)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, format="svg", metadata={"Date": None})
    plt.close(fig)
    return output


def cmd_plot(cfg: ExperimentConfig) -> Path:
    spec = cfg.plot
    if not isinstance(spec, dict):
        raise ConfigurationError("plot: missing plot section")
    unknown = set(spec) - {"series", "metric", "output", "title", "ylabel"}
    if unknown:
        raise ConfigurationError(f"plot: unknown keys {sorted(unknown)}")
    if not isinstance(spec.get("series"), dict):
        raise ConfigurationError("plot.series: map each label to a list of CSV paths or glob patterns")
    series = {}
    for label, pats in spec["series"].items():
        files = []
        for pat in ([pats] if isinstance(pats, str) else pats):
            if any(c in pat for c in "*?["):
                files += [Path(f) for f in sorted(glob.glob(pat))]
            else:
                files.append(Path(pat))
        for f in files:
            if not f.is_file():
                raise ConfigurationError(f"plot.series.{label}: {f} not found")
        series[label] = files
    output = spec.get("output") or str(Path(cfg.out) / "plot.svg")
    return emit_plot(series, output, spec.get("metric", "cumulative_reward"),
                     spec.get("title", ""), spec.get("ylabel"))
