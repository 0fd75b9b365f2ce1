"""Evolutionary synthesis of progressively sparser neural networks.

Ancestors are trained, then each generation's offspring are sampled from
cluster- and synapse-level retention probabilities derived from one parent
(asexual) or two mated parents (sexual), under a per-generation synapse budget.
"""
from .encoding import EncodingParams, ProbabilityField, probability_field
from .mating import MatingCoefficients, mate_weights, mated_cluster_strengths
from .metrics import GenerationRecord, cluster_efficiency, synaptic_efficiency
from .network import (LayerSpec, LeNetDims, NetworkGenome, SynapticCluster, build_lenet_like,
                      kernel_count, partition_clusters, prune_dead_structure, synapse_count)
from .synthesis import (EnvironmentalFactor, PopulationPolicy, SynthesisOutcome, synthesize_asexual,
                        synthesize_sexual)

__version__ = "0.1.0"
