"""Efficiency metrics, per-generation records and their CSV / series files.

CSV schema (header row, one record per line, in this column order):

    generation, offspring_id, lineage, accuracy, synapse_count, kernel_count,
    synaptic_efficiency, cluster_efficiency, gamma, seed, duration

``lineage`` joins parent identifiers with ``;`` (empty for ancestors).  Floats
are written with ``repr`` so they parse back exactly.  ``duration`` is
wall-clock seconds and is the only non-deterministic column.

Plot series files are ASCII, two space-separated columns (generation, value),
preceded by ``#`` header comments.
"""
from __future__ import annotations

import csv
import dataclasses
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DegenerateNetworkError, EvoSynthError

METRICS = ("accuracy", "synaptic_efficiency", "cluster_efficiency", "synapse_count", "kernel_count")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    offspring_id: str
    lineage: tuple
    accuracy: float
    synapse_count: int
    kernel_count: int
    synaptic_efficiency: float
    cluster_efficiency: float
    gamma: float
    seed: int
    duration: float = 0.0


FIELDS = tuple(f.name for f in dataclasses.fields(GenerationRecord))
_INT_FIELDS = {"generation", "synapse_count", "kernel_count", "seed"}
_FLOAT_FIELDS = {"accuracy", "synaptic_efficiency", "cluster_efficiency", "gamma", "duration"}


def synaptic_efficiency(ancestor_count: int, current_count: int) -> float:
    if current_count < 1:
        raise DegenerateNetworkError("network has no alive synapses")
    return ancestor_count / current_count


def cluster_efficiency(ancestor_kernels: int, current_kernels: int) -> float:
    if current_kernels < 1:
        raise DegenerateNetworkError("network has no alive kernels")
    return ancestor_kernels / current_kernels


def _fmt(name, value):
    if name == "lineage":
        return ";".join(value)
    if name in _FLOAT_FIELDS:
        return repr(float(value))
    return str(value)


def _parse(name, text):
    if name == "lineage":
        return tuple(text.split(";")) if text else ()
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def emit_csv(records: Sequence[GenerationRecord], path) -> Path:
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(FIELDS)
            for r in records:
                writer.writerow([_fmt(n, getattr(r, n)) for n in FIELDS])
    except OSError as exc:
        raise EvoSynthError(f"cannot write CSV {path}: {exc}") from exc
    return path


def read_csv(path) -> list[GenerationRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != FIELDS:
            raise EvoSynthError(f"{path}: unexpected CSV header {header}")
        return [GenerationRecord(**{n: _parse(n, v) for n, v in zip(FIELDS, row)}) for row in reader]


def best_by_generation(records: Iterable[GenerationRecord]) -> list[GenerationRecord]:
    """Best offspring per generation: accuracy, then synaptic efficiency, then lower id."""
    groups = defaultdict(list)
    for r in records:
        groups[r.generation].append(r)
    return [min(groups[g], key=lambda r: (-r.accuracy, -r.synaptic_efficiency, r.offspring_id))
            for g in sorted(groups)]


def emit_plot_series(records: Sequence[GenerationRecord], metric: str, path, best_only=True) -> Path:
    if not records:
        raise ValueError("no records to write")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    rows = best_by_generation(records) if best_only else sorted(records, key=lambda r: (r.generation, r.offspring_id))
    path = Path(path)
    try:
        with open(path, "w") as fh:
            fh.write(f"# {metric} vs generation ({'best offspring' if best_only else 'all offspring'})\n")
            fh.write(f"# generation {metric}\n")
            for r in rows:
                fh.write(f"{r.generation} {float(getattr(r, metric))!r}\n")
    except OSError as exc:
        raise EvoSynthError(f"cannot write series {path}: {exc}") from exc
    return path


def read_plot_series(path) -> list[tuple[int, float]]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            g, v = line.split()
            out.append((int(g), float(v)))
    return out


def first_generation_reaching(records: Sequence[GenerationRecord], metric: str, threshold: float):
    """First generation whose best offspring has ``metric >= threshold``, else None."""
    for r in best_by_generation(records):
        if getattr(r, metric) >= threshold:
            return r.generation
    return None


def first_accuracy_drop(records: Sequence[GenerationRecord], drop: float):
    """First generation whose best accuracy is at least ``drop`` below generation 1's.

    ``drop`` is absolute (0.03 = three percentage points).
    """
    best = best_by_generation(records)
    if not best:
        return None
    reference = best[0].accuracy
    for r in best[1:]:
        if reference - r.accuracy >= drop - 1e-12:
            return r.generation
    return None
