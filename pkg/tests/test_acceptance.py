"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; ``conftest.py`` prints the lines in
the terminal summary so ``pytest -v`` shows a pass/fail row per criterion.
"""
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from admiral import harness
from admiral.advisors import demo_script_advisor
from admiral.envs import GridMazeEnv, MatrixGameEnv, SingleStateDemoEnv
from admiral.game import AdvisorSolution, JointQTable, advisor_q, joint_unindex
from admiral.io import load_q_tables, load_weights, save_q_tables, save_weights
from admiral.neural import episodes_to_threshold
from admiral.nn import Mlp
from admiral.tabular import LearnerConfig, Schedule, mixed_action, normalize_epsilon0, train_ae, train_dm

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def cumulative(runs):
    """Seed-mean cumulative reward per episode (mean over agents too)."""
    return np.mean([m.cumulative.mean(axis=1) for m in runs], axis=0)


def final_mean(runs, k=100):
    return float(np.mean([m.rewards[-k:].mean() for m in runs]))


def mse_ratio(runs, k=100):
    curve = np.mean([m.mse.mean(axis=1) for m in runs], axis=0)
    return float(curve[-k:].mean() / curve[:k].mean()), [
        float(m.mse[-k:].mean() / m.mse[:k].mean()) for m in runs]


@pytest.fixture(scope="module")
def sweep():
    """Advisor evaluation of grades 1-4 over 5 seeds, 2000 episodes each."""
    t = time.perf_counter()
    rows = harness.evaluate_advisors(harness.load_config("advisor-sweep"))
    return {r.advisor: r for r in rows}, time.perf_counter() - t


def test_criterion_01_golden_trace():
    t = time.perf_counter()
    trace = []
    cfg = LearnerConfig(alpha=0.9, beta=0.9, eta=0.0, eta_prime=1.0)
    train_ae(SingleStateDemoEnv(step_cap=2), demo_script_advisor(), cfg, 1, np.random.default_rng(0),
             on_step=lambda learners, out: trace.append(learners[0].q[0, (0, 0)]))
    a = b = Fraction(9, 10)
    q1 = a * 2
    q2 = (1 - a) * q1 + a * (2 + b * Fraction(1, 4) * q1)
    err = max(abs(trace[0] - float(q1)), abs(trace[1] - float(q2)))
    secs = time.perf_counter() - t
    record(1, err <= 1e-12 and secs < 1.0,
           f"Q after updates 1, 2 = {float(trace[0])!r}, {float(trace[1])!r}; exact {q1}, {q2}; error {err:.1e}; {secs:.2f}s")


def test_criterion_02_normalization_rows():
    t = time.perf_counter()
    tables = {
        "advisor table A": (3800, 930, [(3560, 1.0), (1700, 0.3), (1030, 0.1), (930, 0.0)]),
        "advisor table B": (90000, -63000, [(58000, 0.8), (35000, 0.7), (-16000, 0.4), (-63000, 0.0)]),
        "advisor table C": (90000, -54000, [(63000, 0.9), (34000, 0.7), (-16400, 0.3), (-54000, 0.0)]),
        "advisor table D": (90000, -81000, [(79000, 1.0), (39000, 0.7), (-21000, 0.4), (-81000, 0.0)]),
    }
    wrong = [(name, cr, normalize_epsilon0(cr, rcr, mcr), want)
             for name, (mcr, rcr, rows) in tables.items() for cr, want in rows
             if normalize_epsilon0(cr, rcr, mcr) != want]
    secs = time.perf_counter() - t
    record(2, not wrong and secs < 1.0, f"16 rows reproduced exactly, mismatches {wrong}; {secs:.3f}s")


def test_criterion_03_advisor_ordering(sweep):
    rows, secs = sweep
    cr = {g: rows[f"grade{g}"].cr for g in (1, 2, 3, 4)}
    rcr = rows["grade1"].rcr
    ordered = cr[1] > cr[2] > cr[3] >= cr[4]
    near = abs(cr[4] - rcr) <= 0.15 * abs(rcr)
    eps0 = {g: rows[f"grade{g}"].epsilon0 for g in (1, 2, 3, 4)}
    record(3, ordered and near and secs < 300,
           f"mean CR {cr[1]:.1f} > {cr[2]:.1f} > {cr[3]:.1f} >= {cr[4]:.1f}: {ordered}; "
           f"RCR {rcr:.1f}, grade 4 off by {abs(cr[4] - rcr) / abs(rcr):.1%}; "
           f"epsilon0 {eps0}; {secs:.0f}s")


def test_criterion_04_ae_error_to_advisor_value():
    t = time.perf_counter()
    runs = harness.run_seeds(harness.load_config("ae-mse"))
    ratio, per_seed = mse_ratio(runs)
    secs = time.perf_counter() - t
    record(4, ratio < 0.05 and secs < 300,
           f"final/first 100-episode MSE = {ratio:.4f} (< 0.05); per seed {np.round(per_seed, 4).tolist()}; "
           f"{secs:.0f}s")


def test_criterion_05_dm_error_to_nash(sweep):
    rows, _ = sweep
    eps0 = rows["grade1"].epsilon0
    t = time.perf_counter()
    cfg = harness.load_config("dm-mse")
    params = dict(cfg.params, epsilon_prime={"start": eps0, "end": 0.0, "horizon": "run"})
    runs = harness.run_seeds(replace(cfg, params=params))
    ratio, per_seed = mse_ratio(runs)
    secs = time.perf_counter() - t
    record(5, ratio < 0.05 and secs < 300,
           f"epsilon0 {eps0}; final/first 100-episode MSE = {ratio:.4f} (< 0.05); "
           f"per seed {np.round(per_seed, 4).tolist()}; {secs:.0f}s")


def test_criterion_06_dm_ordering(sweep):
    rows, _ = sweep
    cfg = harness.load_config("dm-sweep")
    curves = {}
    for g in (1, 2, 3, 4):
        params = dict(cfg.params, epsilon_prime={"start": rows[f"grade{g}"].epsilon0, "end": 0.0,
                                                 "horizon": "run"})
        curves[g] = cumulative(harness.run_seeds(replace(cfg, advisor=f"grade{g}", params=params)))
    params = dict(cfg.params, epsilon_prime=0.0)
    base = cumulative(harness.run_seeds(replace(cfg, advisor="none", params=params)))
    best = all(curves[1][-1] >= curves[g][-1] for g in (2, 3, 4))
    dominated = bool(np.all(curves[1][500:] >= base[500:]))
    finals = {g: round(float(c[-1]), 1) for g, c in curves.items()}
    record(6, best and dominated,
           f"final cumulative reward by grade {finals}, baseline {base[-1]:.1f}; grade 1 highest: {best}; "
           f"grade 1 >= baseline at every episode after 500: {dominated}")


def test_criterion_07_bad_advice_recovery():
    cfg = harness.load_config("bad-advice")
    bad = final_mean(harness.run_seeds(cfg))
    base_cfg = replace(cfg, advisor="none", params=dict(cfg.params, epsilon_prime=0.0))
    base = final_mean(harness.run_seeds(base_cfg))
    gap = abs(bad - base) / abs(base)
    record(7, gap <= 0.10,
           f"final-100 mean reward, grade 4 at epsilon0 0.5: {bad:.4f}; no advice: {base:.4f}; "
           f"relative gap {gap:.2%} (<= 10%) after {cfg.episodes} episodes x {len(cfg.seeds)} seeds")


def test_criterion_08_single_step_game_convergence():
    payoffs = np.array([[4.0, -1.0, 0.0], [2.5, 1.0, -3.0]])
    env = MatrixGameEnv(np.stack([payoffs, payoffs]))
    cfg = LearnerConfig(alpha=0.1, beta=0.9, epsilon=Schedule.constant(1.0))
    res = train_dm(env, None, cfg, 75_000, np.random.default_rng(0))
    visits = int(res.visits[:, 0].min())
    err = max(float(np.max(np.abs(t.values[0] - payoffs.ravel()))) for t in res.tables)
    record(8, visits >= 10_000 and err <= 1e-2,
           f"min visits per cell {visits}; sup-norm error to payoffs {err:.2e} (<= 1e-2)")


def _advisor_q_brute(sol, q_slice, sizes):
    total = 0.0
    for i in range(len(q_slice)):
        a = joint_unindex(i, sizes)
        p = 1.0
        for j, aj in enumerate(a):
            p *= sol[j][aj]
        total += p * q_slice[i]
    return total


def test_criterion_09_property_suites(tmp_path):
    rng = np.random.default_rng(2024)
    notes = []

    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        sizes = tuple(int(k) for k in rng.integers(1, 5, size=n))
        sol = AdvisorSolution([rng.dirichlet(np.ones(k)) for k in sizes])
        q = rng.normal(scale=10, size=int(np.prod(sizes)))
        worst = max(worst, abs(advisor_q(sol, q) - _advisor_q_brute(sol, q, sizes)))
    ok_aq = worst <= 1e-9
    notes.append(f"advisor_q max error {worst:.1e}")

    worst_rel = 0.0
    h = 1e-6
    for _ in range(100):
        depth = int(rng.integers(1, 3))
        sizes = [int(rng.integers(2, 6)) for _ in range(depth + 2)]
        net = Mlp(sizes, rng)
        # random biases too; with zero biases a dead layer puts the next one exactly on the kink
        net.set_flat(rng.normal(size=net.n_params))
        x = rng.normal(size=(3, sizes[0]))
        w = rng.normal(size=(3, sizes[-1]))
        net.forward(x)
        analytic = np.concatenate([g.ravel() for g in net.backward(w)])
        flat = net.get_flat()
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            for sign in (1, -1):
                probe = flat.copy()
                probe[i] += sign * h
                net.set_flat(probe)
                numeric[i] += sign * np.sum(w * net.forward(x))
            numeric[i] /= 2 * h
        net.set_flat(flat)
        denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
        worst_rel = max(worst_rel, float(np.max(np.abs(analytic - numeric) / denom)))
    ok_grad = worst_rel < 1e-4
    notes.append(f"MLP gradient max relative error {worst_rel:.1e}")

    tables = [JointQTable(j, (4, 4), rng.normal(size=(25, 16)) * 1e3) for j in range(2)]
    save_q_tables(tmp_path / "q.json", tables)
    back, _ = load_q_tables(tmp_path / "q.json")
    nets = {"a": Mlp((25, 64, 64, 16), rng)}
    save_weights(tmp_path / "w.json", nets)
    wback, _ = load_weights(tmp_path / "w.json")
    ok_io = (all(np.array_equal(a.values, b.values) for a, b in zip(tables, back))
             and np.array_equal(wback["a"].get_flat(), nets["a"].get_flat()))
    notes.append(f"round trips bit-exact {ok_io}")

    draws = 100_000
    p_adv, p_rand = 0.3, 0.1
    counts = {"advisor": 0, "random": 0, "greedy": 0}
    for _ in range(draws):
        counts[mixed_action(p_adv, p_rand, 4, lambda: 0, lambda: 0, rng)[1]] += 1
    ok_mix = True
    for key, p in (("advisor", p_adv), ("random", p_rand), ("greedy", 1 - p_adv - p_rand)):
        ok_mix &= abs(counts[key] - draws * p) <= 3 * np.sqrt(draws * p * (1 - p))
    notes.append(f"mixture counts {counts} within 3 sigma {ok_mix}")

    env = GridMazeEnv.default()
    steps = [0]
    broken = [0]

    def coherent(learners, out):
        steps[0] += 1
        for lr in learners:
            for k, copy in lr.copies.items():
                broken[0] += not np.array_equal(copy.values, learners[k].q.values)

    from admiral.advisors import MazeAdvisor
    train_dm(env, MazeAdvisor(env, 2), LearnerConfig(alpha=0.3, epsilon=Schedule(0.2, 0.0, 100),
                                                     epsilon_prime=Schedule(0.5, 0.0, 100)),
             100, np.random.default_rng(1), on_step=coherent)
    ok_copy = broken[0] == 0 and steps[0] > 0
    notes.append(f"copy coherence over {steps[0]} steps {ok_copy}")

    record(9, ok_aq and ok_grad and ok_io and ok_mix and ok_copy, "; ".join(notes))


def test_criterion_10_neural_advisor_benefit():
    t = time.perf_counter()
    cfg = harness.load_config("dm-nn")
    with_adv = harness.run_seeds(cfg)
    base = harness.run_seeds(replace(cfg, params=dict(cfg.params, epsilon_prime=0.0)))
    threshold, window = 1.5, 20
    adv_eps = [episodes_to_threshold(m.rewards, threshold, window) for m in with_adv]
    base_eps = [episodes_to_threshold(m.rewards, threshold, window) for m in base]
    secs = time.perf_counter() - t
    ok = np.median(adv_eps) < np.median(base_eps) and secs < 1200
    record(10, ok,
           f"episodes to a {window}-episode mean summed reward of {threshold}: grade 1 median "
           f"{np.median(adv_eps)} {adv_eps}; no advice median {np.median(base_eps)} {base_eps} "
           f"({cfg.episodes + 1} = never); {secs:.0f}s")
