"""Affine mating of two parent genomes at the cluster and synapse level."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import EncodingParams, truncated_cluster_sums
from .errors import ConfigError, IncompatibleParentsError
from .network import NetworkGenome


@dataclass(frozen=True)
class MatingCoefficients:
    alpha_cluster: float = 0.5
    beta_cluster: float = 0.5
    alpha_synapse: float = 0.5
    beta_synapse: float = 0.5

    def __post_init__(self):
        for name in ("alpha_cluster", "beta_cluster", "alpha_synapse", "beta_synapse"):
            if getattr(self, name) < 0:
                raise ConfigError(f"mating.{name}", "must be >= 0")
        if self.alpha_cluster + self.beta_cluster <= 0:
            raise ConfigError("mating.alpha_cluster", "alpha_cluster + beta_cluster must be > 0")
        if self.alpha_synapse + self.beta_synapse <= 0:
            raise ConfigError("mating.alpha_synapse", "alpha_synapse + beta_synapse must be > 0")

    def swapped(self) -> "MatingCoefficients":
        return MatingCoefficients(self.beta_cluster, self.alpha_cluster, self.beta_synapse, self.alpha_synapse)


def check_compatible(parent_a: NetworkGenome, parent_b: NetworkGenome) -> None:
    if not parent_a.same_architecture(parent_b):
        raise IncompatibleParentsError("parents have different layer stacks")
    if parent_a.generation != parent_b.generation:
        raise IncompatibleParentsError(
            f"parents belong to generations {parent_a.generation} and {parent_b.generation}")


def mate_weights(parent_a: NetworkGenome, parent_b: NetworkGenome,
                 coeffs: MatingCoefficients) -> NetworkGenome:
    """Virtual mated parent: ``alpha_s*w_A + beta_s*w_B`` over the union mask.

    A parent whose synapse is dead contributes weight 0.  Biases are mated with
    the same synapse-level coefficients.
    """
    check_compatible(parent_a, parent_b)
    a, b = np.float32(coeffs.alpha_synapse), np.float32(coeffs.beta_synapse)
    n = len(parent_a.layers)
    weights, biases, masks = [None] * n, [None] * n, [None] * n
    for i in parent_a.weighted_layers:
        weights[i] = a * parent_a.weights[i] + b * parent_b.weights[i]
        biases[i] = a * parent_a.biases[i] + b * parent_b.biases[i]
        masks[i] = parent_a.masks[i] | parent_b.masks[i]
    return parent_a.replace(weights=tuple(weights), biases=tuple(biases), masks=tuple(masks),
                            lineage=(parent_a.genome_id, parent_b.genome_id),
                            genome_id=f"{parent_a.genome_id}x{parent_b.genome_id}")


def mated_cluster_strengths(parent_a: NetworkGenome, parent_b: NetworkGenome,
                            coeffs: MatingCoefficients, params: EncodingParams) -> list[np.ndarray]:
    """``alpha_c*S_A + beta_c*S_B`` per cluster, one array per weighted layer.

    ``S_X`` is parent X's truncated alive-weight sum, truncated against X's own
    layer maximum.
    """
    check_compatible(parent_a, parent_b)
    out = []
    for li in parent_a.weighted_layers:
        sa = truncated_cluster_sums(parent_a, li, params)
        sb = truncated_cluster_sums(parent_b, li, params)
        out.append(coeffs.alpha_cluster * sa + coeffs.beta_cluster * sb)
    return out
