import numpy as np
import pytest

from evosynth.data import Dataset, synthetic_gaussian_blobs
from evosynth.errors import DivergenceError, ShapeError
from evosynth.network import act, conv, dense, genome_from_layers, pool
from evosynth.trainer import (
    TrainerConfig, evaluate, forward, gradient_check, loss_and_gradients, train,
)

from conftest import conv_layers, dense_layers, random_genome


def zero_weights(g):
    return g.replace(weights=tuple(None if w is None else np.zeros_like(w) for w in g.weights),
                     biases=tuple(None if b is None else np.zeros_like(b) for b in g.biases))


class TestForward:
    def test_zero_weights_uniform(self):
        g = zero_weights(genome_from_layers(conv_layers(n_out=4)))
        p = forward(g, np.random.default_rng(0).random((3, 2, 8, 8)))
        np.testing.assert_allclose(p, 0.25, rtol=1e-6)

    def test_rows_sum_to_one(self, conv_genome):
        p = forward(conv_genome, np.random.default_rng(1).random((5, 2, 8, 8)) * 50)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=1e-5)
        assert np.all(p >= 0)

    def test_hand_computed_logits(self):
        w1 = np.array([[1.0, -1.0], [0.5, 0.5]], np.float32)
        w2 = np.array([[2.0, 0.0], [0.0, 1.0]], np.float32)
        g = genome_from_layers([dense(2, 2), act((2,), "relu"), dense(2, 2)])
        g = g.replace(weights=(w1, None, w2), biases=(np.array([0.0, 1.0], np.float32), None,
                                                      np.array([0.5, 0.0], np.float32)))
        # h = relu([1 - 2, 0.5 + 1 + 1]) = [0, 2.5]; logits = [0.5, 2.5]
        p = forward(g, np.array([[1.0, 2.0]]))
        e = np.exp([0.5, 2.5])
        np.testing.assert_allclose(p[0], e / e.sum(), rtol=1e-6)

    def test_conv_pool_hand_computed(self):
        g = genome_from_layers([conv((1, 3, 3), 1, 2), pool((1, 2, 2), 2), dense(1, 2)])
        g = g.replace(weights=(np.ones((1, 1, 2, 2), np.float32), None, np.array([[1.0], [0.0]], np.float32)))
        x = np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3)
        # window sums 8, 12, 20, 24; max 24 -> logits [24, 0]
        p = forward(g, x)
        np.testing.assert_allclose(p[0], [1 / (1 + np.exp(-24)), 1 / (1 + np.exp(24))], rtol=1e-6)

    def test_masked_equals_zeroed(self):
        g = random_genome(conv_layers(), 3, alive_fraction=0.5)
        x = np.random.default_rng(2).random((4, 2, 8, 8))
        explicit = g.replace(masks=tuple(None if m is None else np.ones_like(m) for m in g.masks))
        np.testing.assert_allclose(forward(g, x), forward(explicit, x), rtol=1e-6)

    def test_shape_mismatch(self, conv_genome):
        with pytest.raises(ShapeError):
            forward(conv_genome, np.zeros((2, 1, 8, 8)))


def xor_dataset():
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], np.float32)
    y = np.array([0, 1, 1, 0])
    x = np.tile(x, (64, 1)).reshape(-1, 2, 1, 1)
    y = np.tile(y, 64)
    n = len(y)
    return Dataset(x, y, 2, {"train": np.arange(n - 16), "test": np.arange(n - 16, n)})


def pixel_net(n_in, hidden, n_out, activation="tanh"):
    """A 1x1 convolution over a (n_in, 1, 1) image acts as a dense hidden layer."""
    return [conv((n_in, 1, 1), hidden, 1), act((hidden, 1, 1), activation), dense(hidden, n_out)]


class TestTrain:
    def test_xor(self):
        ds = xor_dataset()
        g = genome_from_layers(pixel_net(2, 8, 2), seed=0)
        cfg = TrainerConfig(learning_rate=0.1, batch_size=8, epochs=60)
        trained, history = train(g, ds, cfg, seed=1)
        assert len(history) == 60
        assert history[-1].accuracy >= 0.95

    def test_zero_learning_rate_is_identity(self):
        ds = synthetic_gaussian_blobs(3, 60, seed=0, image_size=8)
        g = random_genome(conv_layers(channels=1, n_out=3), 4)
        trained, _ = train(g, ds, TrainerConfig(learning_rate=0.0, epochs=2), seed=0)
        for a, b in zip(g.weights + g.biases, trained.weights + trained.biases):
            if a is not None:
                np.testing.assert_array_equal(a, b)

    def test_dead_weights_stay_zero(self):
        ds = synthetic_gaussian_blobs(3, 90, seed=1, image_size=8)
        g = random_genome(conv_layers(channels=1, n_out=3), 5, alive_fraction=0.4)
        trained, _ = train(g, ds, TrainerConfig(epochs=2, batch_size=16), seed=0)
        changed = False
        for i in g.weighted_layers:
            assert np.all(trained.weights[i][~g.masks[i]] == 0)
            np.testing.assert_array_equal(trained.masks[i], g.masks[i])
            changed |= not np.array_equal(trained.weights[i], g.weights[i])
        assert changed

    def test_deterministic(self):
        ds = synthetic_gaussian_blobs(3, 90, seed=2, image_size=8)
        g = random_genome(conv_layers(channels=1, n_out=3), 6)
        a, _ = train(g, ds, TrainerConfig(epochs=1, batch_size=16), seed=9)
        b, _ = train(g, ds, TrainerConfig(epochs=1, batch_size=16), seed=9)
        for x, y in zip(a.weights, b.weights):
            if x is not None:
                np.testing.assert_array_equal(x, y)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_guard(self):
        ds = synthetic_gaussian_blobs(3, 60, seed=3, image_size=8)
        g = random_genome(conv_layers(channels=1, n_out=3), 7, scale=10.0)
        with pytest.raises(DivergenceError, match="learning_rate"):
            train(g, ds, TrainerConfig(learning_rate=1e30, momentum=0.0, epochs=3, batch_size=8), seed=0)

    def test_evaluate_counts(self):
        g = zero_weights(genome_from_layers(pixel_net(2, 3, 2)))
        r = evaluate(g, np.zeros((10, 2, 1, 1)), np.zeros(10, dtype=int))
        # uniform outputs: argmax picks class 0 everywhere
        assert r.accuracy == 1.0 and r.samples == 10
        assert r.loss == pytest.approx(np.log(2), rel=1e-6)


def sample(shape, classes, seed, n=3):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n,) + shape), rng.integers(0, classes, n)


class TestGradientCheck:
    def test_dense(self):
        g = random_genome(dense_layers(4, 6, 3, "tanh"), 1)
        r = gradient_check(g, sample((4,), 3, 1))
        assert r.passed and r.checked > 0, r

    def test_dense_relu(self):
        g = random_genome(dense_layers(4, 6, 3, "relu"), 2)
        assert gradient_check(g, sample((4,), 3, 2)).passed

    def test_conv(self):
        g = random_genome([conv((2, 5, 5), 3, 3), act((3, 3, 3), "tanh"), dense(27, 3)], 3)
        r = gradient_check(g, sample((2, 5, 5), 3, 3))
        assert r.passed, r

    def test_pool(self):
        g = random_genome([conv((1, 6, 6), 2, 3), pool((2, 4, 4), 2), dense(8, 3)], 4)
        r = gradient_check(g, sample((1, 6, 6), 3, 4))
        assert r.passed, r

    def test_composite_masked(self):
        g = random_genome(conv_layers(activation="tanh"), 5, alive_fraction=0.6)
        r = gradient_check(g, sample((2, 8, 8), 3, 5))
        assert r.passed and r.max_relative_error <= 1e-3, r

    def test_broken_gradient_is_caught(self):
        g = random_genome(dense_layers(4, 6, 3, "tanh"), 6)

        def wrong(genome, x, y):
            loss, gw, gb = loss_and_gradients(genome, x, y)
            gw = [None if w is None else 1.5 * w for w in gw]
            return loss, gw, gb

        assert not gradient_check(g, sample((4,), 3, 6), grad_fn=wrong).passed

    def test_gradients_masked(self):
        g = random_genome(conv_layers(), 7, alive_fraction=0.5)
        x, y = sample((2, 8, 8), 3, 7)
        _, gw, _ = loss_and_gradients(g, x, y)
        for i in g.weighted_layers:
            assert np.all(gw[i][~g.masks[i]] == 0)
