import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from admiral.envs import GridMazeEnv
from admiral.game import ConfigurationError, JointQTable
from admiral.io import load_q_tables, load_weights, save_q_tables, save_weights
from admiral.nn import Mlp, ReplayBuffer, softmax


def numeric_grads(net, x, weight, h=1e-6):
    flat = net.get_flat()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (1, -1):
            probe = flat.copy()
            probe[i] += sign * h
            net.set_flat(probe)
            out[i] += sign * np.sum(weight * net.forward(x))
        out[i] /= 2 * h
    net.set_flat(flat)
    return out


class TestMlp:
    def test_backward_matches_finite_differences(self, rng):
        net = Mlp((5, 7, 6, 3), rng)
        net.set_flat(rng.normal(size=net.n_params))
        x = rng.normal(size=(4, 5))
        weight = rng.normal(size=(4, 3))
        net.forward(x)
        grads = np.concatenate([g.ravel() for g in net.backward(weight)])
        np.testing.assert_allclose(grads, numeric_grads(net, x, weight), atol=1e-6, rtol=1e-5)

    def test_single_input_matches_batch_row(self, rng):
        net = Mlp((3, 4, 2), rng)
        x = rng.normal(size=(6, 3))
        batch = net.forward(x)
        for i in range(6):
            np.testing.assert_allclose(net.forward(x[i]), batch[i], rtol=0, atol=1e-14)

    def test_zero_learning_rate_leaves_params(self, rng):
        net = Mlp((3, 4, 2), rng)
        before = net.get_flat().copy()
        net.forward(rng.normal(size=(2, 3)))
        net.sgd_step(net.backward(np.ones((2, 2))), 0.0)
        np.testing.assert_array_equal(net.get_flat(), before)

    def test_sgd_reduces_squared_loss(self, rng):
        net = Mlp((2, 8, 1), rng)
        x = rng.normal(size=(16, 2))
        y = x[:, :1] - 2 * x[:, 1:]
        losses = []
        for _ in range(200):
            err = net.forward(x) - y
            losses.append(float(np.mean(err ** 2)))
            net.sgd_step(net.backward(2 * err / len(x)), 0.05)
        assert losses[-1] < 0.1 * losses[0]

    def test_copy_is_independent(self, rng):
        net = Mlp((2, 3, 1), rng)
        twin = net.copy()
        net.weights[0][0, 0] += 1.0
        assert twin.weights[0][0, 0] != net.weights[0][0, 0]
        twin.load_from(net)
        np.testing.assert_array_equal(twin.get_flat(), net.get_flat())

    def test_wrong_input_width(self, rng):
        with pytest.raises(ConfigurationError):
            Mlp((3, 2), rng).forward(np.zeros(4))
        with pytest.raises(ConfigurationError):
            Mlp((3,))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    def test_softmax_is_a_distribution(self, logits):
        p = softmax(np.array(logits))
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
        assert p[int(np.argmax(logits))] == p.max()


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(3, 2)
        for t in range(5):
            assert buf.oldest_index() == (t % 3 if t >= 3 else 0)
            buf.add(t, (0, 0), (0.0, 0.0), t + 1, (0, 0), False)
        assert len(buf) == 3
        assert sorted(buf.state.tolist()) == [2, 3, 4]

    def test_sampling_is_uniform(self):
        buf = ReplayBuffer(8, 1)
        for t in range(8):
            buf.add(t, (0,), (0.0,), t, (0,), False)
        idx = buf.sample_indices(80_000, np.random.default_rng(0))
        counts = np.bincount(buf.state[idx], minlength=8)
        expected = 10_000
        chi2 = np.sum((counts - expected) ** 2 / expected)
        # 7 degrees of freedom, 0.999 quantile is about 24.3
        assert chi2 < 24.3

    def test_samples_only_filled_slots(self):
        buf = ReplayBuffer(100, 1, extra_dim=2)
        buf.add(7, (1,), (1.0,), 8, (2,), True, extra=(0.25, 0.75))
        batch = buf.sample(20, np.random.default_rng(1))
        assert set(batch["state"].tolist()) == {7}
        np.testing.assert_array_equal(batch["extra"][0], [0.25, 0.75])

    def test_empty_and_bad_capacity(self):
        with pytest.raises(ConfigurationError):
            ReplayBuffer(0, 1)
        with pytest.raises(ConfigurationError):
            ReplayBuffer(4, 1).sample_indices(1, np.random.default_rng())


class TestPersistence:
    def test_weights_round_trip_bit_exact(self, tmp_path, rng):
        nets = {"q0": Mlp((50, 64, 64, 16), rng), "q1": Mlp((50, 8, 16), rng)}
        env = GridMazeEnv.default().description()
        save_weights(tmp_path / "w.json", nets, env)
        loaded, env_back = load_weights(tmp_path / "w.json")
        assert env_back == env
        for name, net in nets.items():
            assert loaded[name].sizes == net.sizes
            np.testing.assert_array_equal(loaded[name].get_flat(), net.get_flat())

    def test_q_tables_round_trip_bit_exact(self, tmp_path, rng):
        tables = [JointQTable(j, (4, 4), rng.normal(size=(6, 16))) for j in range(2)]
        save_q_tables(tmp_path / "q.json", tables)
        back, _ = load_q_tables(tmp_path / "q.json")
        for a, b in zip(tables, back):
            assert a.agent_index == b.agent_index
            np.testing.assert_array_equal(a.values, b.values)

    def test_non_finite_refused(self, tmp_path):
        bad = JointQTable(0, (2, 2), np.array([[np.nan, 0, 0, 0]]))
        with pytest.raises(ConfigurationError):
            save_q_tables(tmp_path / "q.json", [bad])

    def test_wrong_kind_and_version(self, tmp_path, rng):
        save_weights(tmp_path / "w.json", {"a": Mlp((2, 2), rng)})
        with pytest.raises(ConfigurationError):
            load_q_tables(tmp_path / "w.json")
        (tmp_path / "v.json").write_text('{"format_version": 99, "kind": "q_tables"}')
        with pytest.raises(ConfigurationError):
            load_q_tables(tmp_path / "v.json")
