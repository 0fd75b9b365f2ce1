import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evosynth.encoding import EncodingParams, probability_field, truncated_cluster_sums
from evosynth.errors import ConfigError, IncompatibleParentsError
from evosynth.mating import MatingCoefficients, mate_weights, mated_cluster_strengths
from evosynth.network import dense, genome_from_layers

from conftest import conv_layers, dense_layers, random_genome

P = EncodingParams()
HALF = MatingCoefficients()
ASEXUAL = MatingCoefficients(1.0, 0.0, 1.0, 0.0)


def parents(seed, frac=0.6):
    a = random_genome(conv_layers(), seed, alive_fraction=frac).replace(genome_id="g002-o00")
    b = random_genome(conv_layers(), seed + 10_000, alive_fraction=frac).replace(genome_id="g002-o01")
    return a, b


def test_degenerate_coefficients_keep_parent_a():
    a, b = parents(1)
    m = mate_weights(a, b, ASEXUAL)
    for li in a.weighted_layers:
        np.testing.assert_array_equal(m.weights[li][a.masks[li]], a.weights[li][a.masks[li]])
        only_b = b.masks[li] & ~a.masks[li]
        assert np.all(m.masks[li][only_b])
        assert np.all(m.weights[li][only_b] == 0)


def test_identical_parents_reproduce_parent():
    a, _ = parents(2)
    m = mate_weights(a, a, HALF)
    for li in a.weighted_layers:
        np.testing.assert_array_equal(m.weights[li], a.weights[li])
        np.testing.assert_array_equal(m.masks[li], a.masks[li])


def test_six_synapse_disjoint_hand_oracle():
    layers = [dense(3, 2)]
    wa = np.array([[0.8, 0.0, -0.4], [0.0, 0.6, 0.0]], np.float32)
    wb = np.array([[0.0, 0.2, 0.0], [1.0, 0.0, -0.3]], np.float32)
    ma, mb = wa != 0, wb != 0
    a = genome_from_layers(layers).replace(weights=(wa,), masks=(ma,), genome_id="A")
    b = genome_from_layers(layers).replace(weights=(wb,), masks=(mb,), genome_id="B")
    m = mate_weights(a, b, HALF)
    assert m.masks[0].all() and int(m.masks[0].sum()) == 6
    np.testing.assert_allclose(m.weights[0], [[0.4, 0.1, -0.2], [0.5, 0.3, -0.15]], rtol=1e-6)
    assert m.lineage == ("A", "B")


def test_mask_union():
    a, b = parents(3, frac=0.3)
    m = mate_weights(a, b, HALF)
    for li in a.weighted_layers:
        np.testing.assert_array_equal(m.masks[li], a.masks[li] | b.masks[li])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), ac=st.floats(0, 2), bc=st.floats(0.01, 2), as_=st.floats(0, 2),
       bs=st.floats(0.01, 2))
def test_commutative_with_swapped_coefficients(seed, ac, bc, as_, bs):
    a, b = parents(seed)
    c = MatingCoefficients(ac, bc, as_, bs)
    ab, ba = mate_weights(a, b, c), mate_weights(b, a, c.swapped())
    for li in a.weighted_layers:
        np.testing.assert_array_equal(ab.weights[li], ba.weights[li])
        np.testing.assert_array_equal(ab.biases[li], ba.biases[li])
        np.testing.assert_array_equal(ab.masks[li], ba.masks[li])
    for x, y in zip(mated_cluster_strengths(a, b, c, P), mated_cluster_strengths(b, a, c.swapped(), P)):
        np.testing.assert_array_equal(x, y)


def test_different_architectures_rejected():
    a = random_genome(dense_layers(4, 5, 3), 0)
    b = random_genome(dense_layers(4, 6, 3), 0)
    with pytest.raises(IncompatibleParentsError):
        mate_weights(a, b, HALF)
    with pytest.raises(IncompatibleParentsError):
        mated_cluster_strengths(a, b, HALF, P)


def test_different_generations_rejected():
    a, b = parents(4)
    with pytest.raises(IncompatibleParentsError):
        mate_weights(a, b.replace(generation=5), HALF)


def test_negative_coefficient_rejected():
    with pytest.raises(ConfigError, match="mating.beta_synapse"):
        MatingCoefficients(beta_synapse=-0.1)


class TestClusterStrengths:
    def test_beta_zero_gives_parent_a(self):
        a, b = parents(5)
        got = mated_cluster_strengths(a, b, MatingCoefficients(1.0, 0.0, 0.5, 0.5), P)
        for k, li in enumerate(a.weighted_layers):
            np.testing.assert_array_equal(got[k], truncated_cluster_sums(a, li, P))

    def test_identical_parents_unchanged(self):
        a, _ = parents(6)
        got = mated_cluster_strengths(a, a, MatingCoefficients(0.25, 0.75, 0.5, 0.5), P)
        for k, li in enumerate(a.weighted_layers):
            np.testing.assert_allclose(got[k], truncated_cluster_sums(a, li, P), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_brute_force(self, seed):
        a, b = parents(seed + 20)
        c = MatingCoefficients(0.3, 0.9, 0.5, 0.5)
        got = mated_cluster_strengths(a, b, c, P)
        for k, li in enumerate(a.weighted_layers):
            def sums(g):
                w, m = g.weights[li].astype(np.float64), g.masks[li]
                top = np.abs(w[m]).max()
                out = np.zeros(w.shape[0])
                for coord in map(tuple, np.argwhere(m)):
                    out[coord[0]] += np.floor(abs(w[coord]) / top / 0.1 + 1e-9) * 0.1
                return out
            np.testing.assert_allclose(got[k], 0.3 * sums(a) + 0.9 * sums(b), rtol=1e-12, atol=1e-12)


def test_degenerate_field_matches_asexual_on_parent_a():
    a, b = parents(7, frac=0.5)
    mated = mate_weights(a, b, ASEXUAL)
    sexual = probability_field(mated, P, cluster_strengths=mated_cluster_strengths(a, b, ASEXUAL, P))
    asexual = probability_field(a, P)
    for k, li in enumerate(a.weighted_layers):
        alive = a.masks[li]
        np.testing.assert_array_equal(sexual.synapse[k][alive], asexual.synapse[k][alive])
        np.testing.assert_array_equal(sexual.cluster_of(k)[alive], asexual.cluster_of(k)[alive])
        only_b = b.masks[li] & ~alive
        np.testing.assert_allclose(sexual.synapse[k][only_b], np.exp(-1.0))
