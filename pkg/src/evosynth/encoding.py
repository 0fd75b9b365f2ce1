"""Cluster- and synapse-level synthesis probabilities.

Cluster probability::

    P(cluster) = exp(S_c / Z - 1),  S_c = sum of truncated |w| over alive synapses

where truncation maps ``|w|`` onto ``[0, 1]`` by the layer's largest alive
magnitude and floors it to a grid of step ``truncation_step``; ``Z`` is the
largest ``S_c`` in the layer.

Synapse probability::

    P(synapse) = exp(|w| / a - 1),  a = largest alive |w| in the layer

Both land in ``[exp(-1), 1]`` for alive synapses.  Dead synapses are not
candidates and get probability 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .network import NetworkGenome, SynapticCluster

EXP_M1 = math.exp(-1.0)
# Guards floor() against ratios like 0.3 / 0.1 = 2.9999999999999996.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class EncodingParams:
    truncation_step: float = 0.1
    # When set, [exp(-1), 1] is mapped affinely onto [0, 1].
    rescale_floor: bool = False
    normalization_mode: str = "max"

    def __post_init__(self):
        if not (0.0 < self.truncation_step <= 1.0):
            raise ConfigError("encoding.truncation_step", "must lie in (0, 1]")
        if self.normalization_mode != "max":
            raise ConfigError("encoding.normalization_mode", "only 'max' is supported")


def truncate_weight(w, layer_max, tau):
    """``floor(|w| / layer_max / tau) * tau``; 0 when ``layer_max`` is 0."""
    w = np.abs(np.asarray(w, dtype=np.float64))
    if layer_max <= 0:
        out = np.zeros_like(w)
    else:
        out = np.floor(w / float(layer_max) / tau + _GRID_EPS) * tau
    return float(out) if out.ndim == 0 else out


def _rescale(p, params: EncodingParams):
    if not params.rescale_floor:
        return p
    return (p - EXP_M1) / (1.0 - EXP_M1)


def layer_max_abs(weights: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    return float(np.abs(weights[mask]).max())


def truncated_cluster_sums(genome: NetworkGenome, layer_index: int, params: EncodingParams) -> np.ndarray:
    w, m = genome.weights[layer_index], genome.masks[layer_index]
    t = truncate_weight(w, layer_max_abs(w, m), params.truncation_step)
    t = np.where(m, t, 0.0)
    return t.reshape(t.shape[0], -1).sum(axis=1)


def cluster_probabilities_from_strengths(strengths, params: EncodingParams) -> np.ndarray:
    s = np.asarray(strengths, dtype=np.float64)
    z = s.max() if s.size else 0.0
    if z <= 0:
        p = np.full(s.shape, EXP_M1)
    else:
        p = np.exp(s / z - 1.0)
    return _rescale(p, params)


def cluster_probability(cluster: SynapticCluster, genome: NetworkGenome, params: EncodingParams) -> float:
    sums = truncated_cluster_sums(genome, cluster.layer_index, params)
    return float(cluster_probabilities_from_strengths(sums, params)[cluster.cluster_index])


def synapse_probability(w, layer_max, params: EncodingParams | None = None):
    params = params or EncodingParams()
    w = np.abs(np.asarray(w, dtype=np.float64))
    if layer_max <= 0:
        p = np.full(w.shape, EXP_M1)
    else:
        p = np.exp(w / float(layer_max) - 1.0)
    p = _rescale(p, params)
    return float(p) if p.ndim == 0 else p


def synapse_probabilities(weights: np.ndarray, mask: np.ndarray, params: EncodingParams) -> np.ndarray:
    p = synapse_probability(weights, layer_max_abs(weights, mask), params)
    return np.where(mask, p, 0.0)


@dataclass(frozen=True, eq=False)
class ProbabilityField:
    """Per-layer probabilities aligned with a genome's weighted layers.

    ``cluster[k]`` has one entry per output channel/neuron of weighted layer
    ``layer_indices[k]``; ``synapse[k]`` has the weight tensor's shape with 0
    at dead coordinates.
    """

    layer_indices: tuple
    cluster: tuple
    synapse: tuple
    alive: tuple

    def cluster_of(self, k: int) -> np.ndarray:
        """Cluster probability broadcast over the synapses of weighted layer ``k``."""
        shape = self.synapse[k].shape
        return np.broadcast_to(self.cluster[k].reshape((-1,) + (1,) * (len(shape) - 1)), shape)


def probability_field(genome: NetworkGenome, params: EncodingParams,
                      cluster_strengths: Optional[Sequence[np.ndarray]] = None) -> ProbabilityField:
    """Assemble both probability factors over every weighted layer.

    ``cluster_strengths`` overrides the truncated cluster sums (used for mated
    parents); it must hold one array per weighted layer.
    """
    idx = genome.weighted_layers
    clusters, synapses, alive = [], [], []
    for k, li in enumerate(idx):
        s = truncated_cluster_sums(genome, li, params) if cluster_strengths is None else cluster_strengths[k]
        clusters.append(cluster_probabilities_from_strengths(s, params))
        synapses.append(synapse_probabilities(genome.weights[li], genome.masks[li], params))
        alive.append(genome.masks[li])
    return ProbabilityField(tuple(idx), tuple(clusters), tuple(synapses), tuple(alive))
