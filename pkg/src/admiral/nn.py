"""Small numpy multilayer perceptron and replay buffer.

The network is deliberately plain (rectifier hidden layers, linear
output, vanilla SGD) so its gradients can be checked against finite
differences.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .game import ConfigurationError


class Mlp:
    """Fully connected net: ``relu`` on hidden layers, identity on the output."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 scale: str = "he"):
        self.sizes = tuple(int(n) for n in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ConfigurationError(f"need at least input and output sizes, got {self.sizes}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            if scale == "zeros":
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ConfigurationError(f"expected {self.n_params} parameters, got {flat.size}")
        i = 0
        for p in self.params():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._cache = None
        return other

    def load_from(self, other: "Mlp") -> None:
        if other.sizes != self.sizes:
            raise ConfigurationError("architectures differ")
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def forward(self, x) -> np.ndarray:
        """Accepts a single input vector or a batch (rows); caches for :meth:`backward`."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.sizes[0]:
            raise ConfigurationError(f"input has {h.shape[1]} features, expected {self.sizes[0]}")
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        self._cache = inputs
        return h[0] if single else h

    def backward(self, grad_out) -> list[np.ndarray]:
        """Gradients of every parameter (same order as :meth:`params`) given dLoss/dOutput."""
        if self._cache is None:
            raise RuntimeError("backward() needs a preceding forward()")
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            x = self._cache[i]
            grads[2 * i] = x.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (x > 0)
        return grads

    def sgd_step(self, grads: Sequence[np.ndarray], lr: float) -> None:
        if lr == 0.0:
            return
        for p, g in zip(self.params(), grads):
            p -= lr * g

    def max_abs_param(self) -> float:
        return max(float(np.max(np.abs(p))) for p in self.params())


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of ``(s, a, r, s', a', done)`` records.

    ``extra_dim`` reserves a float vector per record (used to keep the
    advisor's joint strategy at ``s'``).
    """

    def __init__(self, capacity: int, n_agents: int, extra_dim: int = 0):
        if capacity < 1:
            raise ConfigurationError("capacity must be positive")
        self.capacity = int(capacity)
        self.state = np.zeros(capacity, dtype=np.int64)
        self.actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self.rewards = np.zeros((capacity, n_agents))
        self.next_state = np.zeros(capacity, dtype=np.int64)
        self.next_actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self.done = np.zeros(capacity, dtype=bool)
        self.extra = np.zeros((capacity, extra_dim)) if extra_dim else None
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s_next, a_next, done, extra=None):
        i = self._next
        self.state[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_state[i] = s_next
        self.next_actions[i] = a_next
        self.done[i] = done
        if self.extra is not None:
            self.extra[i] = extra
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ConfigurationError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=k)

    def sample(self, k: int, rng: np.random.Generator) -> dict:
        idx = self.sample_indices(k, rng)
        batch = {
            "state": self.state[idx], "actions": self.actions[idx],
            "rewards": self.rewards[idx], "next_state": self.next_state[idx],
            "next_actions": self.next_actions[idx], "done": self.done[idx],
        }
        if self.extra is not None:
            batch["extra"] = self.extra[idx]
        return batch

    def oldest_index(self) -> int:
        """Slot holding the record that the next :meth:`add` will evict."""
        return self._next if self.size == self.capacity else 0
