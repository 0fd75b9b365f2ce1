"""Experiment runs: ancestor training, the generation loop, manifests and resume.

Run directory layout::

    manifest.json          config snapshot, master seed, status, per-generation genome ids
    records.csv            every GenerationRecord so far (ancestors are generation 1)
    series/<metric>.txt    best-offspring series per generation
    genomes/gNNN/<id>.genome

The manifest and CSV are rewritten after each completed generation, so an
interrupted run can be resumed from the last completed generation.
"""
from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path
from typing import Callable, Optional

from .config import ExperimentConfig
from .data import Dataset, load_idx, load_mnist, subsample, synthetic_gaussian_blobs, concat_splits
from .errors import ConfigError, DegeneratePopulationError, ManifestError
from .genome_io import load_genome, save_genome
from .metrics import METRICS, GenerationRecord, emit_csv, emit_plot_series, read_csv
from .network import build_lenet_like, kernel_capacity, kernel_count, synapse_capacity, synapse_count
from .synthesis import Member, derive_seed, run_generation
from .trainer import Trainer

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORDS = "records.csv"
FORMAT = "evosynth-run"
FORMAT_VERSION = 1
ANCESTOR_MANIFEST = "ancestors.json"


def prepare_dataset(cfg: ExperimentConfig) -> Dataset:
    ds = cfg.dataset
    if ds.source == "blobs":
        return synthetic_gaussian_blobs(ds.classes, ds.samples, ds.subsample_seed, ds.image_size, ds.noise)
    if ds.source == "mnist":
        full = load_mnist(ds.path)
    else:
        missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels") if not getattr(ds, k)]
        if missing:
            raise ConfigError(f"dataset.{missing[0]}", "required when dataset.source is 'idx'")
        full = concat_splits({"train": load_idx(ds.train_images, ds.train_labels, "train"),
                              "test": load_idx(ds.test_images, ds.test_labels, "test")})
    return subsample(full, {"train": ds.train_size, "test": ds.test_size}, ds.subsample_seed)


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.exists():
        raise ManifestError(f"{run_dir}: no {MANIFEST} found")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: corrupt manifest ({exc})") from None
    if manifest.get("format") != FORMAT:
        raise ManifestError(f"{path}: not an evosynth run manifest")
    return manifest


def _ancestor_record(member: Member, syn: int, ker: int, duration: float) -> GenerationRecord:
    g = member.genome
    return GenerationRecord(generation=1, offspring_id=g.genome_id, lineage=(), accuracy=member.accuracy,
                            synapse_count=synapse_count(g), kernel_count=kernel_count(g),
                            synaptic_efficiency=syn / synapse_count(g), cluster_efficiency=ker / kernel_count(g),
                            gamma=1.0, seed=g.seed, duration=duration)


def train_ancestors(cfg: ExperimentConfig, dataset: Dataset, trainer: Trainer):
    """Train ``population.ancestors`` fully-alive genomes; returns members and records."""
    members, records = [], []
    channels, size = dataset.sample_shape[0], dataset.sample_shape[1]
    if dataset.sample_shape[1] != dataset.sample_shape[2]:
        raise ConfigError("dataset", "only square images are supported")
    for i in range(cfg.population.ancestors):
        started = time.perf_counter()
        genome = build_lenet_like(channels, dataset.class_count, cfg.architecture.dims(size),
                                  seed=derive_seed(cfg.seed, 1, i, 0), init=cfg.trainer.init,
                                  genome_id=f"g001-o{i:02d}")
        genome, history = trainer.train(genome, derive_seed(cfg.seed, 1, i, 1))
        acc = history[-1].accuracy if history else trainer.evaluate(genome).accuracy
        member = Member(genome, acc)
        members.append(member)
        records.append(_ancestor_record(member, synapse_capacity(genome), kernel_capacity(genome),
                                        time.perf_counter() - started))
        log.info("ancestor %s: test accuracy %.4f", genome.genome_id, acc)
    return members, records


def run_train_ancestor(cfg: ExperimentConfig) -> dict:
    """Train ancestors and write ``<id>.genome`` files plus ``ancestors.json``."""
    dataset = prepare_dataset(cfg)
    trainer = Trainer(dataset, cfg.trainer)
    members, records = train_ancestors(cfg, dataset, trainer)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for m, r in zip(members, records):
        path = out / f"{m.genome.genome_id}.genome"
        save_genome(m.genome, path)
        entries.append({"genome": path.name, "genome_id": m.genome.genome_id, "accuracy": m.accuracy,
                        "synapse_count": r.synapse_count, "kernel_count": r.kernel_count, "seed": m.genome.seed})
    manifest = {"format": "evosynth-ancestors", "version": FORMAT_VERSION, "config": cfg.to_dict(),
                "master_seed": cfg.seed, "ancestors": entries}
    _write_json(out / ANCESTOR_MANIFEST, manifest)
    return manifest


def _genome_path(run_dir: Path, genome_id: str, generation: int) -> Path:
    return run_dir / "genomes" / f"g{generation:03d}" / f"{genome_id}.genome"


def _save_population(run_dir: Path, members, generation: int) -> list[str]:
    folder = run_dir / "genomes" / f"g{generation:03d}"
    folder.mkdir(parents=True, exist_ok=True)
    for m in members:
        save_genome(m.genome, _genome_path(run_dir, m.genome.genome_id, generation))
    return [m.genome.genome_id for m in members]


def _flush(run_dir: Path, manifest: dict, records) -> None:
    emit_csv(records, run_dir / RECORDS)
    series = run_dir / "series"
    series.mkdir(exist_ok=True)
    for metric in METRICS:
        emit_plot_series(records, metric, series / f"{metric}.txt")
    _write_json(run_dir / MANIFEST, manifest)


def _comparable(cfg_dict: dict) -> dict:
    d = dict(cfg_dict)
    d.pop("generations", None)
    d.pop("output_dir", None)
    return d


def _load_ancestors(cfg: ExperimentConfig, trainer: Trainer):
    members, records = [], []
    for path in cfg.ancestor_genomes:
        genome = load_genome(path)
        if genome.generation != 1:
            raise ConfigError("ancestor_genomes", f"{path} is generation {genome.generation}, expected 1")
        acc = trainer.evaluate(genome).accuracy
        member = Member(genome, acc)
        members.append(member)
        records.append(_ancestor_record(member, synapse_capacity(genome), kernel_capacity(genome), 0.0))
    return members, records


def evolve(cfg: ExperimentConfig, dataset: Optional[Dataset] = None,
           on_generation: Optional[Callable[[int, list], None]] = None) -> dict:
    """Run (or resume) an evolution experiment; returns the final manifest.

    ``on_generation(generation, records)`` is called after each generation has
    been flushed to disk.  A degenerate population ends the run with status
    ``halted`` and re-raises ``DegeneratePopulationError``.
    """
    run_dir = Path(cfg.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    dataset = dataset if dataset is not None else prepare_dataset(cfg)
    trainer = Trainer(dataset, cfg.trainer)

    if (run_dir / MANIFEST).exists():
        manifest = read_manifest(run_dir)
        if _comparable(manifest["config"]) != _comparable(cfg.to_dict()):
            raise ConfigError("output_dir", f"{run_dir} holds a run with a different configuration")
        records = read_csv(run_dir / RECORDS)
        done = manifest["completed_generations"]
        ids = manifest["generations"][-1]["genomes"]
        acc = {r.offspring_id: r.accuracy for r in records if r.generation == done}
        population = [Member(load_genome(_genome_path(run_dir, gid, done)), acc[gid]) for gid in ids]
        log.info("resuming %s after generation %d", run_dir, done)
    else:
        if cfg.ancestor_genomes:
            population, records = _load_ancestors(cfg, trainer)
        else:
            population, records = train_ancestors(cfg, dataset, trainer)
        ancestor = population[0].genome
        manifest = {
            "format": FORMAT, "version": FORMAT_VERSION, "config": cfg.to_dict(), "master_seed": cfg.seed,
            "mode": cfg.mode, "status": "running", "completed_generations": 1,
            "ancestor": {"synapse_count": synapse_capacity(ancestor), "kernel_count": kernel_capacity(ancestor)},
            "generations": [{"generation": 1, "genomes": _save_population(run_dir, population, 1)}],
        }
        _flush(run_dir, manifest, records)
        if on_generation:
            on_generation(1, records)

    manifest["config"]["generations"] = cfg.generations
    base_syn = manifest["ancestor"]["synapse_count"]
    base_ker = manifest["ancestor"]["kernel_count"]
    gen = manifest["completed_generations"]
    while gen < cfg.generations:
        try:
            population, new = run_generation(population, cfg.population.policy(), cfg.mode, cfg.environment,
                                             cfg.encoding, cfg.mating, trainer, cfg.seed, base_syn, base_ker)
        except DegeneratePopulationError as exc:
            manifest["status"] = "halted"
            manifest["halt_reason"] = str(exc)
            _write_json(run_dir / MANIFEST, manifest)
            raise
        gen += 1
        records = records + new
        manifest["generations"].append({"generation": gen, "genomes": _save_population(run_dir, population, gen)})
        manifest["completed_generations"] = gen
        manifest["status"] = "complete" if gen >= cfg.generations else "running"
        _flush(run_dir, manifest, records)
        best = max(new, key=lambda r: r.accuracy)
        log.info("generation %d: best accuracy %.4f, synaptic efficiency %.2fx, cluster efficiency %.2fx",
                 gen, best.accuracy, best.synaptic_efficiency, best.cluster_efficiency)
        if on_generation:
            on_generation(gen, records)
    if manifest["status"] != "complete":
        manifest["status"] = "complete"
        _write_json(run_dir / MANIFEST, manifest)
    return manifest
