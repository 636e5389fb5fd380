import numpy as np
import pytest

from fedpart.agent import td_loss
from fedpart.network import (
    AdamOptimizer,
    QNetwork,
    SGDOptimizer,
    expected_weight_count,
    load_checkpoint,
    make_optimizer,
    save_checkpoint,
)


def toy_net(n_actions=3, hidden=(4, 4, 3), dropout=(0.0, 0.0, 0.0), seed=0, dtype=np.float64):
    return QNetwork(
        n_actions,
        hidden=hidden,
        dropout_rates=dropout,
        input_dim=5,
        rng=np.random.default_rng(seed),
        dtype=dtype,
    )


class TestForward:
    def test_zero_weights_give_zero_q(self):
        net = toy_net()
        net.set_weights(np.zeros(net.flat.size))
        q = net.forward(np.array([0.3, 0.2, 0.9, 0.1, 0.5]))
        assert np.array_equal(q, np.zeros(net.n_actions))

    def test_eval_mode_deterministic(self):
        net = QNetwork(7, rng=np.random.default_rng(1))
        x = np.random.default_rng(2).random((16, 5))
        assert np.array_equal(net.forward(x), net.forward(x))

    def test_hand_computed_two_unit_net(self):
        """2-2-2 toy (one hidden ReLU layer of width 2) checked by hand."""
        net = QNetwork(2, hidden=(2,), dropout_rates=(0.0,), input_dim=2,
                       rng=np.random.default_rng(0), dtype=np.float64)
        w1 = np.array([[1.0, -1.0], [0.5, 2.0]])
        b1 = np.array([0.1, -0.2])
        w2 = np.array([[2.0, 0.0], [1.0, -1.0]])
        b2 = np.array([0.0, 0.5])
        net.set_weights(np.concatenate([w1.ravel(), b1, w2.ravel(), b2]))
        x = np.array([1.0, 2.0])
        # z1 = [1*1+2*0.5+0.1, 1*-1+2*2-0.2] = [2.1, 2.8]; relu keeps both
        # q = [2.1*2+2.8*1, 2.1*0+2.8*-1+0.5] = [7.0, -2.3]
        assert np.allclose(net.forward(x), [7.0, -2.3])

    def test_dimension_mismatch_rejected(self):
        net = toy_net()
        with pytest.raises(ValueError):
            net.forward(np.zeros(4))

    def test_dropout_inverted_scaling(self):
        """Mean train-mode activation matches eval activation (within 2%)."""
        net = QNetwork(4, hidden=(64, 64, 32), dropout_rates=(0.4, 0.3, 0.0),
                       rng=np.random.default_rng(3), dtype=np.float64)
        x = np.abs(np.random.default_rng(4).random((8, 5)))
        eval_q = net.forward(x)
        rng = np.random.default_rng(5)
        draws = np.mean([net.forward(x, train=True, rng=rng) for _ in range(3000)], axis=0)
        scale = np.abs(eval_q).mean()
        assert np.max(np.abs(draws - eval_q)) / scale < 0.02


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_analytic_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = toy_net(n_actions=3, hidden=(6, 5, 4), seed=seed)
        target = net.clone()
        target.set_weights(net.get_weights() + 0.1 * rng.standard_normal(net.flat.size))
        batch = (
            rng.random((7, 5)),
            rng.integers(0, 3, size=7),
            rng.standard_normal(7),
            rng.random((7, 5)),
        )
        gamma = 0.9

        q, cache = net.forward_cached(np.asarray(batch[0], dtype=np.float64), train=True)
        q_next, _ = target.forward_cached(np.asarray(batch[3], dtype=np.float64), train=False)
        targets = batch[2] + gamma * q_next.max(axis=1)
        rows = np.arange(7)
        td = q[rows, batch[1]] - targets
        grad_q = net.output_grad_buffer(7)
        grad_q[rows, batch[1]] = 2.0 * td / 7
        analytic = net.backward(cache, grad_q).copy()

        h = 1e-6
        flat = net.flat
        numeric = np.empty_like(analytic)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = td_loss(net, target, batch, gamma)
            flat[i] = orig - h
            down = td_loss(net, target, batch, gamma)
            flat[i] = orig
            numeric[i] = (up - down) / (2 * h)
        denom = np.maximum(np.abs(numeric), 1e-8)
        rel = np.abs(analytic - numeric) / denom
        mask = np.abs(numeric) > 1e-7  # ignore dead-unit zero gradients
        assert rel[mask].max() < 1e-4


class TestWeightVector:
    def test_round_trip_identity(self):
        net = QNetwork(9, rng=np.random.default_rng(7))
        x = np.random.default_rng(8).random((4, 5))
        before = net.forward(x)
        net.set_weights(net.get_weights())
        assert np.array_equal(net.forward(x), before)

    def test_two_nets_same_weights_same_outputs(self):
        a = QNetwork(6, rng=np.random.default_rng(1))
        b = QNetwork(6, rng=np.random.default_rng(2))
        b.set_weights(a.get_weights())
        x = np.random.default_rng(3).random((10, 5))
        assert np.array_equal(a.forward(x), b.forward(x))

    def test_length_formula(self):
        net = QNetwork(106)
        dims = (5, 100, 100, 60, 106)
        expected = sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))
        assert net.get_weights().size == expected == expected_weight_count(dims)

    def test_length_mismatch_rejected(self):
        net = toy_net()
        with pytest.raises(ValueError):
            net.set_weights(np.zeros(net.flat.size + 1))

    def test_clone_is_independent(self):
        net = toy_net()
        twin = net.clone()
        net.flat[...] += 1.0
        assert not np.array_equal(net.flat, twin.flat)


class TestOptimizers:
    def test_sgd_step(self):
        params = np.array([1.0, 2.0])
        SGDOptimizer(params, lr=0.5).step(params, np.array([1.0, -2.0]))
        assert np.allclose(params, [0.5, 3.0])

    def test_adam_first_step_magnitude(self):
        # bias-corrected first step moves each coordinate by ~lr in -sign(grad)
        params = np.zeros(3)
        opt = AdamOptimizer(params, lr=0.1)
        opt.step(params, np.array([1.0, -2.0, 0.5]))
        assert np.allclose(params, [-0.1, 0.1, -0.1], atol=1e-6)

    def test_reset_clears_moments(self):
        params = np.zeros(2)
        opt = AdamOptimizer(params, lr=0.1)
        opt.step(params, np.ones(2))
        opt.reset()
        assert opt.t == 0
        assert not opt.m.any() and not opt.v.any()

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", np.zeros(1), 0.1)


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        net = QNetwork(11, rng=np.random.default_rng(4))
        path = tmp_path / "weights.ckpt"
        save_checkpoint(path, net.dims, net.get_weights())
        dims, weights = load_checkpoint(path)
        assert dims == net.dims
        assert np.array_equal(weights, net.get_weights())

    def test_wrong_count_rejected(self, tmp_path):
        net = QNetwork(3, hidden=(4, 4, 4))
        with pytest.raises(ValueError):
            save_checkpoint(tmp_path / "x.ckpt", net.dims, np.zeros(10))

    def test_corrupt_header_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text("nope\n1.0\n")
        with pytest.raises(ValueError, match="dims"):
            load_checkpoint(path)
