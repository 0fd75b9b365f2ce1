"""Sparse layered networks ("genomes"), their synaptic clusters and counts.

A genome is a sequential stack of convolution, max-pooling, dense and
activation layers.  Convolution and dense layers carry a weight tensor, a bias
vector and a boolean alive-mask over the weights.  Dead synapses are stored as
exact zeros so that every tensor keeps its static shape.

Weight layouts are ``(out_channels, in_channels, k, k)`` for convolutions and
``(out_features, in_features)`` for dense layers.  A dense layer that follows a
feature map reads it flattened in channel-major (C, H, W) order.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ShapeError

WEIGHTED_KINDS = ("conv", "dense")
LAYER_KINDS = ("conv", "pool", "dense", "activation")
ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    input_shape: tuple
    output_shape: tuple
    kernel_size: int = 0
    window: int = 0
    activation: str = ""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "output_shape", tuple(int(s) for s in self.output_shape))
        if any(s < 1 for s in self.input_shape + self.output_shape):
            raise ShapeError(f"{self.kind} layer has a non-positive dimension")
        if self.kind == "conv":
            if self.kernel_size < 1:
                raise ShapeError("convolution kernel size must be >= 1")
            c, h, w = self.input_shape
            f, ho, wo = self.output_shape
            if (ho, wo) != (h - self.kernel_size + 1, w - self.kernel_size + 1):
                raise ShapeError("convolution output shape does not match a valid convolution")
        elif self.kind == "pool":
            if self.window < 1:
                raise ShapeError("pooling window must be >= 1")
            c, h, w = self.input_shape
            if self.output_shape != (c, h // self.window, w // self.window):
                raise ShapeError("pooling output shape mismatch")
        elif self.kind == "activation":
            if self.activation not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {self.activation!r}")
            if self.input_shape != self.output_shape:
                raise ShapeError("activation must preserve shape")
        elif self.kind == "dense":
            if len(self.input_shape) != 1 or len(self.output_shape) != 1:
                raise ShapeError("dense layers take and return vectors")

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS

    @property
    def weight_shape(self) -> tuple:
        if self.kind == "conv":
            k = self.kernel_size
            return (self.output_shape[0], self.input_shape[0], k, k)
        if self.kind == "dense":
            return (self.output_shape[0], self.input_shape[0])
        return ()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def conv(input_shape, filters, kernel_size) -> LayerSpec:
    c, h, w = input_shape
    return LayerSpec("conv", (c, h, w), (filters, h - kernel_size + 1, w - kernel_size + 1),
                     kernel_size=kernel_size)


def pool(input_shape, window=2) -> LayerSpec:
    c, h, w = input_shape
    return LayerSpec("pool", (c, h, w), (c, h // window, w // window), window=window)


def dense(n_in, n_out) -> LayerSpec:
    return LayerSpec("dense", (n_in,), (n_out,))


def act(shape, name="relu") -> LayerSpec:
    return LayerSpec("activation", shape, shape, activation=name)


def check_stack(layers: Sequence[LayerSpec]) -> None:
    """Consecutive layers must have matching shapes (dense may flatten a map)."""
    for i, (a, b) in enumerate(zip(layers, layers[1:])):
        if a.output_shape == b.input_shape:
            continue
        if b.kind == "dense" and int(np.prod(a.output_shape)) == b.input_shape[0]:
            continue
        raise ShapeError(f"layer {i} output {a.output_shape} does not feed layer {i + 1} input {b.input_shape}")


def _frozen(a: Optional[np.ndarray], dtype) -> Optional[np.ndarray]:
    if a is None:
        return None
    out = np.array(a, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NetworkGenome:
    """Architecture + weights + alive masks + lineage.  Immutable.

    ``weights``, ``biases`` and ``masks`` are aligned with ``layers``; entries
    for pooling/activation layers are ``None``.  On construction dead weights
    are forced to 0 and so is the bias of any cluster with no alive synapse,
    which makes a removed filter or neuron emit exactly 0.
    """

    layers: tuple
    weights: tuple
    biases: tuple
    masks: tuple
    generation: int = 1
    lineage: tuple = ()
    seed: int = 0
    genome_id: str = "g001-o00"

    def __post_init__(self):
        layers = tuple(self.layers)
        check_stack(layers)
        n = len(layers)
        if not (len(self.weights) == len(self.biases) == len(self.masks) == n):
            raise ShapeError("weights/biases/masks must align with layers")
        if self.generation < 1:
            raise ShapeError("generation index must be >= 1")
        ws, bs, ms = [], [], []
        for spec, w, b, m in zip(layers, self.weights, self.biases, self.masks):
            if not spec.weighted:
                ws.append(None), bs.append(None), ms.append(None)
                continue
            w = np.asarray(w, dtype=np.float32)
            m = np.asarray(m, dtype=bool)
            b = np.asarray(b, dtype=np.float32)
            if w.shape != spec.weight_shape or m.shape != w.shape:
                raise ShapeError(f"{spec.kind} layer expects weights of shape {spec.weight_shape}, "
                                 f"got weights {w.shape} / mask {m.shape}")
            if b.shape != (spec.weight_shape[0],):
                raise ShapeError("bias length must equal the number of output channels")
            w = np.where(m, w, np.float32(0))
            alive = m.reshape(m.shape[0], -1).any(axis=1)
            b = np.where(alive, b, np.float32(0))
            ws.append(_frozen(w, np.float32))
            bs.append(_frozen(b, np.float32))
            ms.append(_frozen(m, bool))
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))
        object.__setattr__(self, "masks", tuple(ms))
        object.__setattr__(self, "lineage", tuple(str(x) for x in self.lineage))
        object.__setattr__(self, "generation", int(self.generation))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def weighted_layers(self) -> list[int]:
        return [i for i, spec in enumerate(self.layers) if spec.weighted]

    @property
    def input_shape(self) -> tuple:
        return self.layers[0].input_shape

    @property
    def class_count(self) -> int:
        return self.layers[-1].output_shape[0]

    def replace(self, **changes) -> "NetworkGenome":
        return dataclasses.replace(self, **changes)

    def same_architecture(self, other: "NetworkGenome") -> bool:
        return self.layers == other.layers


def lenet_layers(input_channels, class_count, input_size=28, conv1_filters=32,
                 conv2_filters=64, kernel_size=5, hidden_units=88, activation="relu"):
    shape = (input_channels, input_size, input_size)
    layers = []
    for filters in (conv1_filters, conv2_filters):
        layers.append(conv(shape, filters, kernel_size))
        shape = layers[-1].output_shape
        layers.append(act(shape, activation))
        layers.append(pool(shape, 2))
        shape = layers[-1].output_shape
    flat = int(np.prod(shape))
    layers += [dense(flat, hidden_units), act((hidden_units,), activation), dense(hidden_units, class_count)]
    return layers


@dataclass(frozen=True)
class LeNetDims:
    """Dimensioning of the conv-pool-conv-pool-dense-dense stack.

    The defaults give 142,992 synapses for a 1-channel 28x28 input and
    144,592 for 3 channels; the 1600-synapse / 64-kernel gap between the two
    matches the reported 1- vs 3-channel gap exactly.
    """

    input_size: int = 28
    conv1_filters: int = 32
    conv2_filters: int = 64
    kernel_size: int = 5
    hidden_units: int = 88
    activation: str = "relu"


# Small variant used for desk-scale runs (about 20k synapses on 28x28 input).
DESK_DIMS = LeNetDims(conv1_filters=6, conv2_filters=16, hidden_units=64)


def init_weights(layers, rng: np.random.Generator, scheme="he_uniform"):
    """Fan-in scaled uniform initialization; biases start at 0."""
    gains = {"he_uniform": 6.0, "lecun_uniform": 3.0}
    if scheme not in gains:
        raise ConfigError("trainer.init", f"unknown initialization scheme {scheme!r}")
    weights, biases = [], []
    for spec in layers:
        if not spec.weighted:
            weights.append(None), biases.append(None)
            continue
        shape = spec.weight_shape
        fan_in = int(np.prod(shape[1:]))
        limit = np.sqrt(gains[scheme] / fan_in)
        weights.append(rng.uniform(-limit, limit, size=shape).astype(np.float32))
        biases.append(np.zeros(shape[0], dtype=np.float32))
    return weights, biases


def genome_from_layers(layers, seed=0, init="he_uniform", genome_id="g001-o00") -> NetworkGenome:
    rng = np.random.default_rng(seed)
    weights, biases = init_weights(layers, rng, init)
    masks = [None if w is None else np.ones(w.shape, dtype=bool) for w in weights]
    return NetworkGenome(tuple(layers), tuple(weights), tuple(biases), tuple(masks),
                         generation=1, lineage=(), seed=seed, genome_id=genome_id)


def build_lenet_like(input_channels: int, class_count: int, dims: LeNetDims | None = None,
                     seed: int = 0, init: str = "he_uniform",
                     genome_id: str = "g001-o00") -> NetworkGenome:
    """Fully-alive LeNet-style ancestor genome (generation 1, no lineage)."""
    if input_channels not in (1, 3):
        raise ConfigError("architecture.input_channels",
                          f"unsupported channel count {input_channels} (expected 1 or 3)")
    if class_count < 2:
        raise ConfigError("architecture.class_count", "need at least 2 classes")
    dims = dims or LeNetDims()
    if dims.activation not in ACTIVATIONS:
        raise ConfigError("architecture.activation", f"unknown activation {dims.activation!r}")
    layers = lenet_layers(input_channels, class_count, dims.input_size, dims.conv1_filters,
                          dims.conv2_filters, dims.kernel_size, dims.hidden_units, dims.activation)
    return genome_from_layers(layers, seed=seed, init=init, genome_id=genome_id)


@dataclass(frozen=True, eq=False)
class SynapticCluster:
    """One heredity unit: a conv filter or a dense neuron's fan-in."""

    layer_index: int
    cluster_index: int
    coordinates: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.coordinates)


def partition_clusters(genome: NetworkGenome) -> list[SynapticCluster]:
    clusters = []
    for li in genome.weighted_layers:
        shape = genome.layers[li].weight_shape
        inner = np.argwhere(np.ones(shape[1:], dtype=bool))
        for ci in range(shape[0]):
            coords = np.hstack([np.full((len(inner), 1), ci), inner])
            clusters.append(SynapticCluster(li, ci, coords))
    return clusters


def synapse_count(genome: NetworkGenome) -> int:
    return int(sum(int(genome.masks[i].sum()) for i in genome.weighted_layers))


def _alive_kernels(spec: LayerSpec, mask: np.ndarray) -> np.ndarray:
    if spec.kind == "conv":
        return mask.any(axis=(2, 3))
    return mask.any(axis=1)


def kernel_count(genome: NetworkGenome) -> int:
    """2-D conv kernel slices plus dense fan-in vectors holding an alive synapse."""
    return int(sum(int(_alive_kernels(genome.layers[i], genome.masks[i]).sum())
                   for i in genome.weighted_layers))


def synapse_capacity(genome: NetworkGenome) -> int:
    return int(sum(int(np.prod(genome.layers[i].weight_shape)) for i in genome.weighted_layers))


def kernel_capacity(genome: NetworkGenome) -> int:
    total = 0
    for i in genome.weighted_layers:
        shape = genome.layers[i].weight_shape
        total += shape[0] * shape[1] if len(shape) == 4 else shape[0]
    return total


def cluster_alive(genome: NetworkGenome, layer_index: int) -> np.ndarray:
    m = genome.masks[layer_index]
    return m.reshape(m.shape[0], -1).any(axis=1)


def _reader_view(mask: np.ndarray, layers, reader: int) -> np.ndarray:
    """View of ``mask`` shaped (out, input_channels, rest) for layer ``reader``."""
    spec = layers[reader]
    if spec.kind == "conv":
        return mask.reshape(mask.shape[0], mask.shape[1], -1)
    prev = layers[reader - 1].output_shape if reader > 0 else spec.input_shape
    if len(prev) == 3:
        return mask.reshape(mask.shape[0], prev[0], -1)
    return mask.reshape(mask.shape[0], mask.shape[1], 1)


def prune_dead_structure(genome: NetworkGenome) -> NetworkGenome:
    """Kill every synapse that reads a channel/neuron with no alive fan-in.

    Propagates forward through the weighted layers until nothing changes.
    Returns ``genome`` itself when there is nothing to prune.
    """
    idx = genome.weighted_layers
    masks = list(genome.masks)
    touched = False
    changed = True
    while changed:
        changed = False
        for src, dst in zip(idx, idx[1:]):
            m = masks[src]
            dead = ~m.reshape(m.shape[0], -1).any(axis=1)
            if not dead.any():
                continue
            view = _reader_view(masks[dst], genome.layers, dst)
            if not view[:, dead, :].any():
                continue
            if not masks[dst].flags.writeable:
                masks[dst] = masks[dst].copy()
                view = _reader_view(masks[dst], genome.layers, dst)
            view[:, dead, :] = False
            changed = touched = True
    if not touched:
        return genome
    return genome.replace(masks=tuple(masks))
