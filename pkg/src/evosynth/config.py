"""Experiment configuration: a JSON file of sections with documented defaults.

Every key is optional; omitted keys take the defaults below.  Unknown keys and
out-of-range values raise ``ConfigError`` naming the dotted key path.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .encoding import EncodingParams
from .errors import ConfigError
from .mating import MatingCoefficients
from .network import LeNetDims
from .synthesis import MODES, EnvironmentalFactor, PopulationPolicy
from .trainer import TrainerConfig

DATA_SOURCES = ("mnist", "blobs", "idx")


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "mnist"
    # mnist: directory with the four standard IDX files (raw or .gz)
    path: str = "data/mnist"
    # idx: explicit file paths
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_size: int = 10000
    test_size: int = 2000
    subsample_seed: int = 0
    # blobs
    classes: int = 10
    samples: int = 1000
    image_size: int = 16
    noise: float = 0.08

    def __post_init__(self):
        if self.source not in DATA_SOURCES:
            raise ConfigError("dataset.source", f"expected one of {DATA_SOURCES}")
        if self.train_size < 1:
            raise ConfigError("dataset.train_size", "must be >= 1")
        if self.test_size < 1:
            raise ConfigError("dataset.test_size", "must be >= 1")
        if self.classes < 2:
            raise ConfigError("dataset.classes", "must be >= 2")


@dataclass(frozen=True)
class ArchitectureConfig:
    conv1_filters: int = 6
    conv2_filters: int = 16
    kernel_size: int = 5
    hidden_units: int = 64
    activation: str = "relu"

    def __post_init__(self):
        for key in ("conv1_filters", "conv2_filters", "kernel_size", "hidden_units"):
            if getattr(self, key) < 1:
                raise ConfigError(f"architecture.{key}", "must be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError("architecture.activation", "expected 'relu' or 'tanh'")

    def dims(self, input_size: int) -> LeNetDims:
        return LeNetDims(input_size, self.conv1_filters, self.conv2_filters, self.kernel_size,
                         self.hidden_units, self.activation)


@dataclass(frozen=True)
class PopulationConfig:
    offspring_per_generation: int = 2
    parent_selection: str = "top2-accuracy"
    retrain_epochs: int = 1
    ancestors: int = 1

    def __post_init__(self):
        if self.ancestors < 1:
            raise ConfigError("population.ancestors", "must be >= 1")
        self.policy()

    def policy(self) -> PopulationPolicy:
        return PopulationPolicy(self.offspring_per_generation, self.parent_selection, self.retrain_epochs)


SECTIONS = {
    "dataset": DatasetConfig,
    "architecture": ArchitectureConfig,
    "trainer": TrainerConfig,
    "encoding": EncodingParams,
    "environment": EnvironmentalFactor,
    "mating": MatingCoefficients,
    "population": PopulationConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    encoding: EncodingParams = field(default_factory=EncodingParams)
    environment: EnvironmentalFactor = field(default_factory=EnvironmentalFactor)
    mating: MatingCoefficients = field(default_factory=MatingCoefficients)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    mode: str = "asexual"
    generations: int = 8
    seed: int = 0
    output_dir: str = "runs/default"
    # pre-trained generation-1 genomes; trained in-line when empty
    ancestor_genomes: tuple = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"expected one of {MODES}")
        if self.generations < 1:
            raise ConfigError("generations", "must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if self.mode == "sexual":
            if self.population.offspring_per_generation < 2:
                raise ConfigError("population.offspring_per_generation",
                                  "sexual mode needs a population of at least 2")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ancestor_genomes"] = list(self.ancestor_genomes)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _build_section(name, cls, values):
    if not isinstance(values, dict):
        raise ConfigError(name, "must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    typed = {}
    for key, value in values.items():
        default = getattr(cls(), key) if key in known else None
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{name}.{key}", "must be true or false")
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}.{key}", "must be a number")
            if isinstance(default, int) and not isinstance(default, bool) and value != int(value):
                raise ConfigError(f"{name}.{key}", "must be an integer")
            value = type(default)(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{name}.{key}", "must be a string")
        elif default is None and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}.{key}", "must be a number or null")
            value = float(value)
        typed[key] = value
    try:
        return cls(**typed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(key, "unknown key")
    kwargs = {name: _build_section(name, cls, data[name]) for name, cls in SECTIONS.items() if name in data}
    for key in ("mode", "output_dir"):
        if key in data:
            if not isinstance(data[key], str):
                raise ConfigError(key, "must be a string")
            kwargs[key] = data[key]
    for key in ("generations", "seed"):
        if key in data:
            if isinstance(data[key], bool) or not isinstance(data[key], int):
                raise ConfigError(key, "must be an integer")
            kwargs[key] = data[key]
    if "ancestor_genomes" in data:
        paths = data["ancestor_genomes"]
        if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
            raise ConfigError("ancestor_genomes", "must be a list of paths")
        kwargs["ancestor_genomes"] = tuple(paths)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"{path} is not valid JSON: {exc}") from None
    cfg = config_from_dict(data)
    # relative data/genome paths resolve against the config file's directory
    base = path.parent
    ds = cfg.dataset
    fixes = {k: str(base / getattr(ds, k)) for k in ("path", "train_images", "train_labels", "test_images", "test_labels")
             if getattr(ds, k) and not Path(getattr(ds, k)).is_absolute()}
    anc = tuple(p if Path(p).is_absolute() else str(base / p) for p in cfg.ancestor_genomes)
    return cfg.replace(dataset=dataclasses.replace(ds, **fixes), ancestor_genomes=anc)


def apply_overrides(cfg: ExperimentConfig, *, out: Optional[str] = None, seed: Optional[int] = None,
                    mode: Optional[str] = None, generations: Optional[int] = None) -> ExperimentConfig:
    changes = {}
    if out is not None:
        changes["output_dir"] = out
    if seed is not None:
        changes["seed"] = seed
    if mode is not None:
        changes["mode"] = mode
    if generations is not None:
        changes["generations"] = generations
    return cfg.replace(**changes) if changes else cfg


def default_config_dict() -> dict:
    return ExperimentConfig().to_dict()
