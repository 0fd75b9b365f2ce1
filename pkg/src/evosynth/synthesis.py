"""Offspring synthesis: retention probabilities, budget calibration, sampling.

The environmental factor is a single scalar ``gamma`` multiplying every joint
retention probability.  It is found by bisection so that the expected number
of surviving synapses, ``sum_j min(gamma * p_j, 1)``, equals the budget
``budget_fraction * parent_count``.  ``gamma`` may exceed 1 unless
``EnvironmentalFactor.gamma_ceiling`` bounds it; when even the largest
admissible ``gamma`` falls short of the budget, that largest value is used.
In hard-cap mode the sampled mask is also trimmed to
``ceil(budget_fraction * parent_count)`` synapses.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .encoding import EncodingParams, ProbabilityField, probability_field
from .errors import ConfigError, DegeneratePopulationError, NoCandidatesError
from .mating import MatingCoefficients, check_compatible, mate_weights, mated_cluster_strengths
from .metrics import GenerationRecord, cluster_efficiency, synaptic_efficiency
from .network import NetworkGenome, kernel_count, prune_dead_structure, synapse_count

log = logging.getLogger(__name__)

ENFORCEMENT_MODES = ("expected", "hard-cap")
SELECTION_RULES = ("top2-accuracy", "random-pair")
MODES = ("asexual", "sexual")


@dataclass(frozen=True)
class EnvironmentalFactor:
    budget_fraction: float = 0.7
    enforcement: str = "hard-cap"
    tolerance: float = 1e-6
    # None: unbounded; 1.0: probabilities may only be scaled down
    gamma_ceiling: float | None = None

    def __post_init__(self):
        if self.gamma_ceiling is not None and self.gamma_ceiling <= 0:
            raise ConfigError("environment.gamma_ceiling", "must be > 0 (or null for no ceiling)")
        if not (0.0 < self.budget_fraction <= 1.0):
            raise ConfigError("environment.budget_fraction", "must lie in (0, 1]")
        if self.enforcement not in ENFORCEMENT_MODES:
            raise ConfigError("environment.enforcement", f"expected one of {ENFORCEMENT_MODES}")
        if not (0.0 < self.tolerance < 1.0):
            raise ConfigError("environment.tolerance", "must lie in (0, 1)")


@dataclass(frozen=True)
class PopulationPolicy:
    offspring_per_generation: int = 2
    parent_selection: str = "top2-accuracy"
    retrain_epochs: int = 1

    def __post_init__(self):
        if self.offspring_per_generation < 1:
            raise ConfigError("population.offspring_per_generation", "must be >= 1")
        if self.parent_selection not in SELECTION_RULES:
            raise ConfigError("population.parent_selection", f"expected one of {SELECTION_RULES}")
        if self.retrain_epochs < 0:
            raise ConfigError("population.retrain_epochs", "must be >= 0")


@dataclass(frozen=True, eq=False)
class SynthesisOutcome:
    offspring: NetworkGenome
    synapse_count: int
    kernel_count: int
    gamma: float
    seed: int


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from integer parts (master seed, generation, index...)."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


def budget_cap(budget_fraction: float, parent_count: int) -> int:
    # round() keeps 0.7 * 10 = 7.000000000000001 from becoming 8
    return math.ceil(round(budget_fraction * parent_count, 9))


def joint_retention_probabilities(field: ProbabilityField) -> tuple:
    """Per-synapse ``P(cluster) * P(synapse)``; 0 for dead coordinates."""
    return tuple(np.where(field.alive[k], field.cluster_of(k) * field.synapse[k], 0.0)
                 for k in range(len(field.layer_indices)))


def _flat(arrays) -> np.ndarray:
    if isinstance(arrays, np.ndarray):
        return arrays.ravel().astype(np.float64)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def calibrate_environmental_factor(retention, parent_count: int, env: EnvironmentalFactor) -> float:
    if parent_count <= 0:
        raise ValueError("parent_count must be positive")
    p = _flat(retention)
    p = p[p > 0]
    if p.size == 0:
        raise NoCandidatesError("no candidate synapse has a positive retention probability")
    target = env.budget_fraction * parent_count

    def expected(gamma):
        return float(np.minimum(gamma * p, 1.0).sum())

    # beyond 1/min(p) every candidate is certain, so larger gamma changes nothing
    hi = 1.0 / float(p.min())
    if env.gamma_ceiling is not None:
        hi = min(hi, env.gamma_ceiling)
    if expected(hi) <= target * (1.0 + env.tolerance):
        return hi
    if abs(expected(1.0) - target) <= env.tolerance * target:
        return 1.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = expected(mid)
        if abs(e - target) <= env.tolerance * target:
            return mid
        if e > target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def sample_offspring_mask(retention, gamma: float, env: EnvironmentalFactor, rng_seed: int,
                          parent_count: int | None = None) -> tuple:
    """Independent Bernoulli draw per candidate with probability ``min(gamma*p, 1)``.

    One uniform is drawn for every coordinate of every layer, in layer order,
    so the draw for a given coordinate depends only on the seed.
    """
    layers = [retention] if isinstance(retention, np.ndarray) else list(retention)
    rng = np.random.default_rng(rng_seed)
    probs, masks = [], []
    for p in layers:
        q = np.minimum(gamma * np.asarray(p, dtype=np.float64), 1.0)
        u = rng.random(q.shape)
        masks.append((u < q) & (q > 0))
        probs.append(q)
    if env.enforcement == "hard-cap":
        if parent_count is None:
            raise ValueError("hard-cap enforcement needs parent_count")
        cap = budget_cap(env.budget_fraction, parent_count)
        kept = sum(int(m.sum()) for m in masks)
        if kept > cap:
            flat_q = np.concatenate([q.ravel() for q in probs])
            flat_m = np.concatenate([m.ravel() for m in masks])
            idx = np.flatnonzero(flat_m)
            # lowest probability first, lower flat index first among ties
            order = np.lexsort((idx, flat_q[idx]))
            flat_m[idx[order[:kept - cap]]] = False
            out, pos = [], 0
            for m in masks:
                out.append(flat_m[pos:pos + m.size].reshape(m.shape))
                pos += m.size
            masks = out
    return masks if not isinstance(retention, np.ndarray) else masks[0]


def _offspring(source: NetworkGenome, sampled, generation: int, lineage, seed: int,
               genome_id: str, gamma: float) -> SynthesisOutcome:
    masks = list(source.masks)
    for k, li in enumerate(source.weighted_layers):
        masks[li] = sampled[k]
    child = source.replace(masks=tuple(masks), generation=generation, lineage=tuple(lineage),
                           seed=seed, genome_id=genome_id)
    child = prune_dead_structure(child)
    return SynthesisOutcome(child, synapse_count(child), kernel_count(child), gamma, seed)


def _synthesize(source: NetworkGenome, field: ProbabilityField, baseline: int, env, rng_seed,
                generation, lineage, genome_id) -> SynthesisOutcome:
    retention = joint_retention_probabilities(field)
    gamma = calibrate_environmental_factor(retention, baseline, env)
    sampled = sample_offspring_mask(retention, gamma, env, rng_seed, parent_count=baseline)
    return _offspring(source, sampled, generation, lineage, rng_seed, genome_id, gamma)


def synthesize_asexual(parent: NetworkGenome, env: EnvironmentalFactor, params: EncodingParams,
                       rng_seed: int, genome_id: str | None = None) -> SynthesisOutcome:
    count = synapse_count(parent)
    if count == 0:
        raise NoCandidatesError(f"parent {parent.genome_id} has no alive synapses")
    field = probability_field(parent, params)
    gen = parent.generation + 1
    return _synthesize(parent, field, count, env, rng_seed, gen, (parent.genome_id,),
                       genome_id or f"g{gen:03d}-o00")


def synthesize_sexual(parent_a: NetworkGenome, parent_b: NetworkGenome, coeffs: MatingCoefficients,
                      env: EnvironmentalFactor, params: EncodingParams, rng_seed: int,
                      genome_id: str | None = None) -> SynthesisOutcome:
    check_compatible(parent_a, parent_b)
    baseline = max(synapse_count(parent_a), synapse_count(parent_b))
    if baseline == 0:
        raise NoCandidatesError("both parents have no alive synapses")
    mated = mate_weights(parent_a, parent_b, coeffs)
    strengths = mated_cluster_strengths(parent_a, parent_b, coeffs, params)
    field = probability_field(mated, params, cluster_strengths=strengths)
    gen = parent_a.generation + 1
    return _synthesize(mated, field, baseline, env, rng_seed, gen,
                       (parent_a.genome_id, parent_b.genome_id), genome_id or f"g{gen:03d}-o00")


@dataclass(eq=False)
class Member:
    """A population entry: genome plus its measured test accuracy."""

    genome: NetworkGenome
    accuracy: float


def rank_key(member: Member):
    # accuracy desc, then synaptic efficiency desc (= fewer synapses), then id asc
    return (-member.accuracy, synapse_count(member.genome), member.genome.genome_id)


def select_parents(population: Sequence[Member], policy: PopulationPolicy, mode: str,
                   rng_seed: int) -> list[Member]:
    """Parents for the next generation.

    A sexual generation grown from a lone ancestor mates the ancestor with
    itself, which reduces exactly to asexual synthesis of that ancestor.
    """
    need = 2 if mode == "sexual" else 1
    if (mode == "sexual" and len(population) == 1 and population[0].genome.generation == 1):
        return [population[0], population[0]]
    if len(population) < need:
        raise ConfigError("population", f"{mode} synthesis needs at least {need} genomes, got {len(population)}")
    if policy.parent_selection == "random-pair" and mode == "sexual":
        rng = np.random.default_rng(rng_seed)
        picks = rng.choice(len(population), size=2, replace=False)
        return [population[int(i)] for i in picks]
    return sorted(population, key=rank_key)[:need]


class TrainerHandle(Protocol):
    def retrain(self, genome: NetworkGenome, seed: int, epochs: int) -> NetworkGenome: ...

    def evaluate(self, genome: NetworkGenome): ...


def run_generation(population: Sequence[Member], policy: PopulationPolicy, mode: str,
                   env: EnvironmentalFactor, params: EncodingParams, coeffs: MatingCoefficients,
                   trainer: TrainerHandle, master_seed: int, ancestor_synapses: int,
                   ancestor_kernels: int) -> tuple[list[Member], list[GenerationRecord]]:
    """Synthesize, retrain and evaluate one generation of offspring.

    Offspring that hit ``NoCandidatesError`` are skipped; if none survive a
    ``DegeneratePopulationError`` is raised.
    """
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}")
    if not population:
        raise ConfigError("population", "population is empty")
    generation = population[0].genome.generation + 1
    parents = select_parents(population, policy, mode, derive_seed(master_seed, generation, 0, 2))
    members, records = [], []
    for index in range(policy.offspring_per_generation):
        started = time.perf_counter()
        seed = derive_seed(master_seed, generation, index, 0)
        gid = f"g{generation:03d}-o{index:02d}"
        try:
            if mode == "sexual":
                out = synthesize_sexual(parents[0].genome, parents[1].genome, coeffs, env, params, seed, gid)
            else:
                out = synthesize_asexual(parents[0].genome, env, params, seed, gid)
        except NoCandidatesError as exc:
            log.warning("generation %d offspring %d: %s", generation, index, exc)
            continue
        child = out.offspring
        if policy.retrain_epochs > 0:
            child = trainer.retrain(child, derive_seed(master_seed, generation, index, 1), policy.retrain_epochs)
        result = trainer.evaluate(child)
        syn, ker = synapse_count(child), kernel_count(child)
        members.append(Member(child, result.accuracy))
        records.append(GenerationRecord(
            generation=generation, offspring_id=gid, lineage=child.lineage, accuracy=result.accuracy,
            synapse_count=syn, kernel_count=ker,
            synaptic_efficiency=synaptic_efficiency(ancestor_synapses, syn) if syn else math.inf,
            cluster_efficiency=cluster_efficiency(ancestor_kernels, ker) if ker else math.inf,
            gamma=out.gamma, seed=seed, duration=time.perf_counter() - started))
    if not members:
        raise DegeneratePopulationError(generation)
    return members, records
