"""Function-approximation learners on top of :mod:`admiral.nn`.

``train_dm_nn`` and ``train_ae_nn`` replace the tables with a Q-network
per agent (one output per joint action) trained from a replay buffer
against a periodically synced target network. Instead of keeping copies
of the other agents' networks, greedy choices condition on the other
agents' currently observed actions.

``train_dm_ac`` is the actor-critic variant: a centralized critic per
agent sees the state and the other agents' actions, while the actor sees
only its own observation so the trained policies can run decentralized.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .advisors import Advisor
from .game import ConfigurationError, n_joint
from .nn import Mlp, ReplayBuffer, softmax
from .tabular import Schedule, _as_advisor_list, _end_episode, _mixture_check


class DivergenceError(RuntimeError):
    """Raised when a network's value estimates blow past the configured limit."""


@dataclass
class NeuralConfig:
    lr: float = 0.01
    beta: float = 0.9
    hidden: tuple = (64, 64)
    batch_size: int = 32
    buffer_capacity: int = 200_000
    target_sync: int = 10           # learning iterations between target copies
    learn_every: int = 1            # environment steps between learning iterations
    epsilon: Schedule = field(default_factory=lambda: Schedule(0.1, 0.0, 300))
    epsilon_prime: Schedule = field(default_factory=lambda: Schedule(0.0, 0.0, 300))
    eta: float = 0.05
    eta_prime: float = 0.5
    obs_mode: str = "joint"
    divergence_limit: float = 1e6
    # actor-critic only
    critic_lr: float = 1e-3
    actor_lr: float = 1e-5
    actor_obs_mode: str = "local"
    actor_loss: str = "literal"     # "literal" or "advantage" (the latter is not the published rule)
    prob_floor: float = 1e-8

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        for name in ("lr", "critic_lr", "actor_lr"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1), got {self.beta}")
        if self.batch_size < 1 or self.buffer_capacity < 1 or self.target_sync < 1 or self.learn_every < 1:
            raise ConfigurationError("batch_size, buffer_capacity, target_sync and learn_every must be >= 1")
        if self.obs_mode not in ("joint", "local") or self.actor_obs_mode not in ("joint", "local"):
            raise ConfigurationError("observation modes must be 'joint' or 'local'")
        if self.actor_loss not in ("literal", "advantage"):
            raise ConfigurationError(f"unknown actor_loss {self.actor_loss!r}")
        _mixture_check(self.eta_prime, self.eta)


@dataclass
class NeuralResult:
    rewards: np.ndarray             # (episodes, n_agents)
    steps: np.ndarray
    epsilon: np.ndarray
    epsilon_prime: np.ndarray
    nets: list                      # eval Q-nets, or critics for actor-critic
    targets: list | None = None
    actors: list | None = None
    learn_iterations: int = 0

    @property
    def episodes(self) -> int:
        return self.rewards.shape[0]

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.rewards, axis=0)


def _flat(actions, sizes) -> int:
    idx = 0
    for a, m in zip(actions, sizes):
        idx = idx * m + a
    return idx


def _flat_batch(actions: np.ndarray, sizes) -> np.ndarray:
    idx = np.zeros(actions.shape[0], dtype=np.int64)
    for k, m in enumerate(sizes):
        idx = idx * m + actions[:, k]
    return idx


def _own_slice(row: np.ndarray, sizes, j: int, actions) -> np.ndarray:
    """Entries of a joint-action vector where agent ``j`` varies and the rest sit at ``actions``."""
    stride = n_joint(sizes[j + 1:])
    base = _flat(actions, sizes) - actions[j] * stride
    return row[base:base + stride * sizes[j]:stride]


def _argmax(values: np.ndarray, rng) -> int:
    best = np.flatnonzero(values == values.max())
    return int(best[0]) if best.size == 1 else int(rng.choice(best))


def _check_divergence(values: np.ndarray, limit: float, what: str):
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if not np.isfinite(worst) or worst > limit:
        raise DivergenceError(f"{what} reached |Q| = {worst:.3g}, above the limit {limit:g}")


def q_step(net: Mlp, x: np.ndarray, a_idx: np.ndarray, y: np.ndarray,
           lr: float) -> np.ndarray:
    """One SGD step on ``mean((y - Q(x)[a])**2)``; returns the pre-update predictions."""
    q = net.forward(x)
    rows = np.arange(q.shape[0])
    pred = q[rows, a_idx]
    grad = np.zeros_like(q)
    grad[rows, a_idx] = 2.0 * (pred - y) / q.shape[0]
    net.sgd_step(net.backward(grad), lr)
    return q


def _make_nets(n_in, n_out, hidden, n_agents, rng):
    nets = [Mlp((n_in, *hidden, n_out), rng) for _ in range(n_agents)]
    return nets, [net.copy() for net in nets]


def train_dm_nn(env, advisors, config: NeuralConfig, episodes: int, rng: np.random.Generator,
                on_episode: Callable | None = None, init_rng: np.random.Generator | None = None,
                buffer_rng: np.random.Generator | None = None,
                advisor_rng: np.random.Generator | None = None) -> NeuralResult:
    """Neural decision-making with replay and target networks.

    ``init_rng``, ``buffer_rng`` and ``advisor_rng`` default to ``rng``;
    passing separate streams keeps weight initialization, minibatch draws
    and advisor sampling independent of the exploration noise.
    """
    arng = advisor_rng or rng
    n, sizes = env.n_agents, tuple(env.action_sizes)
    mode = config.obs_mode
    n_obs = env.n_observations(mode)
    n_a = n_joint(sizes)
    advisors = _as_advisor_list(advisors, n)
    nets, targets = _make_nets(n_obs, n_a, config.hidden, n, init_rng or rng)
    buffer = ReplayBuffer(config.buffer_capacity, n)
    brng = buffer_rng or rng
    eye = np.eye(n_obs)
    obs_cache = np.array([[env.observation(s, j, mode) for j in range(n)]
                          for s in range(env.n_states)])
    beta, lr, k_batch = config.beta, config.lr, config.batch_size

    rewards = np.zeros((episodes, n))
    steps = np.zeros(episodes, dtype=np.int64)
    eps_log, epsp_log = np.zeros(episodes), np.zeros(episodes)
    learn_iter = 0
    env_steps = 0

    def choose(j, state, current, p_adv, p_rand):
        u = rng.random()
        if u < p_adv:
            return advisors[j].recommend(state, j, arng)
        if u < p_adv + p_rand:
            return int(rng.integers(sizes[j]))
        q = nets[j].forward(eye[obs_cache[state, j]])
        return _argmax(_own_slice(q, sizes, j, current), rng)

    def learn():
        nonlocal learn_iter
        for j in range(n):
            b = buffer.sample(k_batch, brng)
            s, s2 = obs_cache[b["state"], j], obs_cache[b["next_state"], j]
            q_next = targets[j].forward(eye[s2])
            boot = q_next[np.arange(k_batch), _flat_batch(b["next_actions"], sizes)]
            y = b["rewards"][:, j] + beta * (~b["done"]) * boot
            q = q_step(nets[j], eye[s], _flat_batch(b["actions"], sizes), y, lr)
            _check_divergence(q, config.divergence_limit, f"agent {j} Q-network")
        learn_iter += 1
        if learn_iter % config.target_sync == 0:
            for j in range(n):
                targets[j].load_from(nets[j])

    for ep in range(episodes):
        p_adv_base = config.epsilon_prime.value(ep)
        p_rand_base = config.epsilon.value(ep)
        p = [(p_adv_base if advisors[j] is not None else 0.0) for j in range(n)]
        q_rand = [min(p_rand_base, 1.0 - p[j]) for j in range(n)]
        state = env.reset()
        actions = [choose(j, state, [0] * n, p[j], q_rand[j]) for j in range(n)]
        ep_reward = np.zeros(n)
        t = 0
        while True:
            out = env.step(actions)
            t += 1
            env_steps += 1
            ep_reward += out.rewards
            nxt = out.next_state
            if out.terminal:
                nxt_actions = [0] * n
            else:
                nxt_actions = [choose(j, nxt, actions, p[j], q_rand[j]) for j in range(n)]
            buffer.add(state, actions, out.rewards, nxt, nxt_actions, out.terminal)
            if len(buffer) >= k_batch and env_steps % config.learn_every == 0:
                learn()
            if out.done:
                break
            state, actions = nxt, nxt_actions
        rewards[ep], steps[ep] = ep_reward, t
        eps_log[ep], epsp_log[ep] = p_rand_base, p_adv_base
        _end_episode(advisors)
        if on_episode is not None:
            on_episode(ep, nets)

    return NeuralResult(rewards, steps, eps_log, epsp_log, nets, targets,
                        learn_iterations=learn_iter)


def train_ae_nn(env, advisor: Advisor, config: NeuralConfig, episodes: int,
                rng: np.random.Generator, on_episode: Callable | None = None,
                init_rng: np.random.Generator | None = None,
                buffer_rng: np.random.Generator | None = None,
                advisor_rng: np.random.Generator | None = None) -> NeuralResult:
    """Neural advisor evaluation: the target is the advisor's expected next value."""
    arng = advisor_rng or rng
    if advisor is None:
        raise ConfigurationError("advisor evaluation needs an advisor")
    n, sizes = env.n_agents, tuple(env.action_sizes)
    mode = config.obs_mode
    n_obs = env.n_observations(mode)
    n_a = n_joint(sizes)
    nets, targets = _make_nets(n_obs, n_a, config.hidden, n, init_rng or rng)
    buffer = ReplayBuffer(config.buffer_capacity, n, extra_dim=n_a)
    brng = buffer_rng or rng
    eye = np.eye(n_obs)
    obs_cache = np.array([[env.observation(s, j, mode) for j in range(n)]
                          for s in range(env.n_states)])
    beta, lr, k_batch = config.beta, config.lr, config.batch_size
    p_adv, p_rand = config.eta_prime, config.eta
    no_advice = np.zeros(n_a)

    rewards = np.zeros((episodes, n))
    steps = np.zeros(episodes, dtype=np.int64)
    learn_iter = 0
    env_steps = 0

    def choose(j, state, prev):
        u = rng.random()
        if u < p_adv:
            return advisor.recommend(state, j, arng)
        if u < p_adv + p_rand:
            return int(rng.integers(sizes[j]))
        q = nets[j].forward(eye[obs_cache[state, j]])
        return _argmax(_own_slice(q, sizes, j, prev), rng)

    def learn():
        nonlocal learn_iter
        for j in range(n):
            b = buffer.sample(k_batch, brng)
            s, s2 = obs_cache[b["state"], j], obs_cache[b["next_state"], j]
            # the stored joint strategy makes this the advisor-weighted stage value
            boot = np.einsum("ka,ka->k", b["extra"], targets[j].forward(eye[s2]))
            y = b["rewards"][:, j] + beta * (~b["done"]) * boot
            q = q_step(nets[j], eye[s], _flat_batch(b["actions"], sizes), y, lr)
            _check_divergence(q, config.divergence_limit, f"agent {j} Q-network")
        learn_iter += 1
        if learn_iter % config.target_sync == 0:
            for j in range(n):
                targets[j].load_from(nets[j])

    for ep in range(episodes):
        state = env.reset()
        prev = [0] * n
        ep_reward = np.zeros(n)
        t = 0
        while True:
            actions = [choose(j, state, prev) for j in range(n)]
            out = env.step(actions)
            t += 1
            env_steps += 1
            ep_reward += out.rewards
            nxt = out.next_state
            if out.terminal:
                joint_p, advised = no_advice, [0] * n
            else:
                joint_p = advisor.solve(nxt).joint_probabilities()
                advised = [advisor.recommend(nxt, j, arng) for j in range(n)]
            buffer.add(state, actions, out.rewards, nxt, advised, out.terminal, extra=joint_p)
            if len(buffer) >= k_batch and env_steps % config.learn_every == 0:
                learn()
            if out.done:
                break
            state, prev = nxt, actions
        rewards[ep], steps[ep] = ep_reward, t
        advisor.end_episode()
        if on_episode is not None:
            on_episode(ep, nets)

    return NeuralResult(rewards, steps, np.full(episodes, p_rand), np.full(episodes, p_adv),
                        nets, targets, learn_iterations=learn_iter)


class AcPair:
    """Centralized critic and decentralized actor for one agent."""

    def __init__(self, agent: int, n_state_obs: int, n_actor_obs: int, sizes: Sequence[int],
                 hidden: Sequence[int], rng: np.random.Generator):
        self.agent = agent
        self.sizes = tuple(sizes)
        self.others = [k for k in range(len(sizes)) if k != agent]
        self._offsets = np.cumsum([0] + [self.sizes[k] for k in self.others])
        self.n_state_obs = n_state_obs
        n_in = n_state_obs + int(self._offsets[-1])
        self.critic = Mlp((n_in, *hidden, self.sizes[agent]), rng)
        self.actor = Mlp((n_actor_obs, *hidden, self.sizes[agent]), rng)
        # zero output layer: uniform policy at initialization
        self.actor.weights[-1][...] = 0.0
        self.actor.biases[-1][...] = 0.0

    def critic_input(self, state_obs: int, actions: Sequence[int]) -> np.ndarray:
        x = np.zeros(self.critic.sizes[0])
        x[state_obs] = 1.0
        for i, k in enumerate(self.others):
            x[self.n_state_obs + self._offsets[i] + actions[k]] = 1.0
        return x

    def policy(self, actor_obs: int) -> np.ndarray:
        x = np.zeros(self.actor.sizes[0])
        x[actor_obs] = 1.0
        return softmax(self.actor.forward(x))


def train_dm_ac(env, advisors, config: NeuralConfig, episodes: int, rng: np.random.Generator,
                on_episode: Callable | None = None,
                init_rng: np.random.Generator | None = None,
                advisor_rng: np.random.Generator | None = None) -> NeuralResult:
    """Actor-critic decision-making: advisor with probability epsilon', else the actor's sample.

    The critic minimizes ``(y - V(s, a^-j)[a^j])**2`` with
    ``y = r + beta * V(s', a'^-j)[a'^j]``. With ``actor_loss="literal"``
    the actor minimizes ``log pi(a^j | s) * L`` where ``L`` is that
    critic loss; ``"advantage"`` instead ascends ``log pi * A`` with the
    critic's advantage over the policy's expected value.
    """
    n, sizes = env.n_agents, tuple(env.action_sizes)
    arng = advisor_rng or rng
    advisors = _as_advisor_list(advisors, n)
    n_state = env.n_observations(config.obs_mode)
    n_actor = env.n_observations(config.actor_obs_mode)
    irng = init_rng or rng
    pairs = [AcPair(j, n_state, n_actor, sizes, config.hidden, irng) for j in range(n)]
    beta = config.beta

    rewards = np.zeros((episodes, n))
    steps = np.zeros(episodes, dtype=np.int64)
    epsp_log = np.zeros(episodes)

    def choose(j, state, p_adv):
        if p_adv > 0 and rng.random() < p_adv:
            return advisors[j].recommend(state, j, arng)
        pi = pairs[j].policy(env.observation(state, j, config.actor_obs_mode))
        return int(rng.choice(sizes[j], p=pi))

    for ep in range(episodes):
        p_base = config.epsilon_prime.value(ep)
        p = [(p_base if advisors[j] is not None else 0.0) for j in range(n)]
        state = env.reset()
        actions = [choose(j, state, p[j]) for j in range(n)]
        ep_reward = np.zeros(n)
        t = 0
        while True:
            out = env.step(actions)
            t += 1
            ep_reward += out.rewards
            nxt = out.next_state
            nxt_actions = None if out.terminal else [choose(j, nxt, p[j]) for j in range(n)]
            for j, pair in enumerate(pairs):
                s_obs = env.observation(state, j, config.obs_mode)
                if nxt_actions is None:
                    boot = 0.0
                else:
                    v_next = pair.critic.forward(
                        pair.critic_input(env.observation(nxt, j, config.obs_mode), nxt_actions))
                    boot = float(v_next[nxt_actions[j]])
                y = float(out.rewards[j]) + beta * boot
                v = pair.critic.forward(pair.critic_input(s_obs, actions))
                _check_divergence(v, config.divergence_limit, f"agent {j} critic")
                err = float(v[actions[j]]) - y
                loss = err * err
                grad = np.zeros_like(v)
                grad[actions[j]] = 2.0 * err
                pair.critic.sgd_step(pair.critic.backward(grad), config.critic_lr)
                _update_actor(pair, env.observation(state, j, config.actor_obs_mode),
                              actions[j], loss, v, config)
            if out.done:
                break
            state, actions = nxt, nxt_actions
        rewards[ep], steps[ep], epsp_log[ep] = ep_reward, t, p_base
        _end_episode(advisors)
        if on_episode is not None:
            on_episode(ep, pairs)

    return NeuralResult(rewards, steps, np.zeros(episodes), epsp_log,
                        [pr.critic for pr in pairs], actors=[pr.actor for pr in pairs])


def _update_actor(pair: AcPair, actor_obs: int, action: int, loss: float,
                  values: np.ndarray, config: NeuralConfig) -> None:
    x = np.zeros(pair.actor.sizes[0])
    x[actor_obs] = 1.0
    pi = softmax(pair.actor.forward(x))
    if config.actor_loss == "literal":
        scale = loss
    else:
        # descend -log pi * advantage
        scale = -(float(values[action]) - float(pi @ values))
    if scale == 0.0 or config.actor_lr == 0.0:
        return
    # d log(max(pi_a, floor)) / d logits; zero when the floor is active
    onehot = np.zeros_like(pi)
    onehot[action] = 1.0
    dlog = onehot - pi if pi[action] > config.prob_floor else np.zeros_like(pi)
    pair.actor.sgd_step(pair.actor.backward(scale * dlog), config.actor_lr)


def evaluate_actors(env, actors: Sequence[Mlp], episodes: int, rng: np.random.Generator,
                    obs_mode: str = "local") -> np.ndarray:
    """Decentralized execution: every agent samples from its own actor only.

    Returns the per-episode reward summed over agents.
    """
    n_obs = env.n_observations(obs_mode)
    eye = np.eye(n_obs)
    totals = np.zeros(episodes)
    for ep in range(episodes):
        state = env.reset()
        while True:
            acts = []
            for j, actor in enumerate(actors):
                pi = softmax(actor.forward(eye[env.observation(state, j, obs_mode)]))
                acts.append(int(rng.choice(pi.size, p=pi)))
            out = env.step(acts)
            totals[ep] += float(np.sum(out.rewards))
            if out.done:
                break
            state = out.next_state
    return totals


def evaluate_random_policy(env, episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Per-episode summed reward when every agent acts uniformly at random."""
    totals = np.zeros(episodes)
    for ep in range(episodes):
        env.reset()
        while True:
            out = env.step([int(rng.integers(m)) for m in env.action_sizes])
            totals[ep] += float(np.sum(out.rewards))
            if out.done:
                break
    return totals


def episodes_to_threshold(rewards: np.ndarray, threshold: float, window: int = 20) -> int:
    """First episode count at which the trailing-window mean summed reward reaches ``threshold``.

    Returns ``len(rewards) + 1`` when it never does.
    """
    total = np.asarray(rewards, dtype=float)
    if total.ndim == 2:
        total = total.sum(axis=1)
    if total.size < window:
        return total.size + 1
    means = np.convolve(total, np.ones(window) / window, mode="valid")
    hit = np.flatnonzero(means >= threshold)
    return int(hit[0] + window) if hit.size else total.size + 1
