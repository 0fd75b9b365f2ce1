import numpy as np
import pytest

from evosynth.network import NetworkGenome, act, conv, dense, genome_from_layers, pool


def dense_layers(n_in=4, hidden=5, n_out=3, activation="relu"):
    return [dense(n_in, hidden), act((hidden,), activation), dense(hidden, n_out)]


def conv_layers(channels=2, size=8, filters=3, k=3, hidden=5, n_out=3, activation="relu"):
    c1 = conv((channels, size, size), filters, k)
    p = pool(c1.output_shape, 2)
    flat = int(np.prod(p.output_shape))
    return [c1, act(c1.output_shape, activation), p, dense(flat, hidden), act((hidden,), activation),
            dense(hidden, n_out)]


def three_layer_conv(activation="relu"):
    """conv -> pool -> conv -> dense: three weighted layers, small enough for brute force."""
    c1 = conv((1, 8, 8), 3, 3)
    p1 = pool(c1.output_shape, 2)
    c2 = conv(p1.output_shape, 4, 2)
    flat = int(np.prod(c2.output_shape))
    return [c1, act(c1.output_shape, activation), p1, c2, act(c2.output_shape, activation), dense(flat, 3)]


def random_genome(layers, seed, alive_fraction=0.7, scale=1.0) -> NetworkGenome:
    rng = np.random.default_rng(seed)
    g = genome_from_layers(layers, seed=seed)
    ws, bs, ms = list(g.weights), list(g.biases), list(g.masks)
    for i in g.weighted_layers:
        ws[i] = (rng.standard_normal(ws[i].shape) * scale).astype(np.float32)
        bs[i] = (0.1 * rng.standard_normal(bs[i].shape)).astype(np.float32)
        ms[i] = rng.random(ws[i].shape) < alive_fraction
    return g.replace(weights=tuple(ws), biases=tuple(bs), masks=tuple(ms))


@pytest.fixture
def dense_genome():
    return random_genome(dense_layers(), seed=11, alive_fraction=1.0)


@pytest.fixture
def conv_genome():
    return random_genome(conv_layers(), seed=12, alive_fraction=1.0)
