"""``.genome`` container, format version 1.

Layout::

    magic      4 bytes   b"EVGN"
    version    u16 LE    1
    header_len u32 LE    length of the JSON header in bytes
    header     UTF-8 JSON (sorted keys): layers, generation, lineage, seed,
               genome_id, tensors (per weighted layer: index, weight shape)
    payload    for each weighted layer, in layer order:
                 weights  float32 LE, row-major
                 biases   float32 LE
                 mask     bit-packed (numpy.packbits, MSB first), same order
                          as the weights, padded to a whole byte

The encoding holds no timestamps, so equal genomes give equal bytes.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import GenomeFormatError
from .network import LayerSpec, NetworkGenome

MAGIC = b"EVGN"
VERSION = 1


def genome_to_bytes(genome: NetworkGenome) -> bytes:
    tensors = [{"layer": i, "shape": list(genome.layers[i].weight_shape)} for i in genome.weighted_layers]
    header = {
        "layers": [spec.to_dict() for spec in genome.layers],
        "generation": genome.generation,
        "lineage": list(genome.lineage),
        "seed": genome.seed,
        "genome_id": genome.genome_id,
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(head)), head]
    for i in genome.weighted_layers:
        parts.append(genome.weights[i].astype("<f4").tobytes(order="C"))
        parts.append(genome.biases[i].astype("<f4").tobytes(order="C"))
        parts.append(np.packbits(genome.masks[i].ravel()).tobytes())
    return b"".join(parts)


def genome_from_bytes(data: bytes) -> NetworkGenome:
    if data[:4] != MAGIC:
        raise GenomeFormatError("not a .genome file (bad magic)")
    if len(data) < 10:
        raise GenomeFormatError("truncated .genome header")
    version, head_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise GenomeFormatError(f"unsupported .genome version {version}")
    pos = 10 + head_len
    try:
        header = json.loads(data[10:pos].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GenomeFormatError(f"corrupt .genome header: {exc}") from None
    layers = [LayerSpec.from_dict(d) for d in header["layers"]]
    n = len(layers)
    weights, biases, masks = [None] * n, [None] * n, [None] * n

    def take(count):
        nonlocal pos
        if pos + count > len(data):
            raise GenomeFormatError("truncated .genome payload")
        chunk = data[pos:pos + count]
        pos += count
        return chunk

    for t in header["tensors"]:
        i, shape = t["layer"], tuple(t["shape"])
        size = int(np.prod(shape))
        weights[i] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape)
        biases[i] = np.frombuffer(take(4 * shape[0]), dtype="<f4")
        bits = np.frombuffer(take((size + 7) // 8), dtype=np.uint8)
        masks[i] = np.unpackbits(bits, count=size).astype(bool).reshape(shape)
    if pos != len(data):
        raise GenomeFormatError("trailing bytes after .genome payload")
    return NetworkGenome(tuple(layers), tuple(weights), tuple(biases), tuple(masks),
                         generation=header["generation"], lineage=tuple(header["lineage"]),
                         seed=header["seed"], genome_id=header["genome_id"])


def save_genome(genome: NetworkGenome, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(genome_to_bytes(genome))
    os.replace(tmp, path)


def load_genome(path) -> NetworkGenome:
    with open(path, "rb") as fh:
        return genome_from_bytes(fh.read())
