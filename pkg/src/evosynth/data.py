"""Datasets: MNIST IDX loading, synthetic blobs, stratified subsampling."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagicError, ConfigError, CountMismatchError, TruncatedFileError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images ``(N, C, H, W)`` in [0, 1], integer labels, named disjoint splits."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if self.images.ndim != 4:
            raise ValueError("images must be (N, C, H, W)")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("labels out of range")
        seen = np.zeros(len(self.labels), dtype=bool)
        for name, idx in self.splits.items():
            if len(idx) == 0:
                raise ValueError(f"split {name!r} is empty")
            if seen[idx].any():
                raise ValueError(f"split {name!r} overlaps another split")
            seen[idx] = True

    @property
    def sample_shape(self) -> tuple:
        return self.images.shape[1:]

    def split(self, name):
        if name not in self.splits:
            raise KeyError(f"dataset has no split {name!r} (available: {sorted(self.splits)})")
        idx = self.splits[name]
        return self.images[idx], self.labels[idx]


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, magic: int, path, ndim: int):
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: truncated IDX header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise TruncatedFileError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx_images(path) -> np.ndarray:
    return _parse_idx(_read(path), IDX_IMAGES_MAGIC, path, 3)


def read_idx_labels(path) -> np.ndarray:
    return _parse_idx(_read(path), IDX_LABELS_MAGIC, path, 1)


def load_idx(images_path, labels_path, split="train", class_count=10) -> Dataset:
    """One split from a pair of IDX files (raw or gzip), pixels scaled by 1/255."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatchError(f"{images_path} holds {len(images)} images but {labels_path} "
                                 f"holds {len(labels)} labels")
    x = (images.astype(np.float32) / np.float32(255.0))[:, None, :, :]
    return Dataset(x, labels.astype(np.int64), class_count, {split: np.arange(len(labels))})


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"MNIST file {stem}[.gz] not found in {directory}")


def load_mnist(directory) -> Dataset:
    """Standard MNIST train + test files from ``directory`` as one dataset."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"MNIST directory {directory} does not exist")
    parts = {name: load_idx(_find(directory, i), _find(directory, l), name)
             for name, (i, l) in MNIST_FILES.items()}
    return concat_splits(parts)


def concat_splits(parts: dict) -> Dataset:
    images, labels, splits, offset = [], [], {}, 0
    class_count = max(d.class_count for d in parts.values())
    for name, d in parts.items():
        x, y = d.split(next(iter(d.splits)))
        images.append(x)
        labels.append(y)
        splits[name] = np.arange(offset, offset + len(y))
        offset += len(y)
    return Dataset(np.concatenate(images), np.concatenate(labels), class_count, splits)


def synthetic_gaussian_blobs(class_count: int, samples: int, seed: int, image_size=8,
                             noise=0.08, test_fraction=0.2) -> Dataset:
    """Class-conditional Gaussian blobs rendered as 1-channel images.

    Each class has a random prototype image; samples are prototype + isotropic
    noise, clipped to [0, 1].  Classes are balanced (the first ``samples %
    class_count`` classes get one extra sample) and split train/test per class.
    """
    if class_count < 2:
        raise ConfigError("dataset.classes", "need at least 2 classes")
    rng = np.random.default_rng(seed)
    protos = rng.uniform(0.0, 1.0, size=(class_count, 1, image_size, image_size))
    counts = [samples // class_count + (c < samples % class_count) for c in range(class_count)]
    labels = np.concatenate([np.full(n, c, dtype=np.int64) for c, n in enumerate(counts)])
    x = protos[labels] + noise * rng.standard_normal((len(labels), 1, image_size, image_size))
    x = np.clip(x, 0.0, 1.0).astype(np.float32)
    train, test = [], []
    for c in range(class_count):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(len(idx) * test_fraction))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    splits = {"train": np.sort(np.concatenate(train)), "test": np.sort(np.concatenate(test))}
    splits = {k: v for k, v in splits.items() if len(v)}
    return Dataset(x, labels, class_count, splits)


def _balanced_pick(labels: np.ndarray, size: int, class_count: int, rng, split_name: str):
    per = [size // class_count + (c < size % class_count) for c in range(class_count)]
    picks = []
    for c in range(class_count):
        pool = np.flatnonzero(labels == c)
        if per[c] > len(pool):
            raise ConfigError(f"dataset.{split_name}_size",
                              f"requested {per[c]} samples of class {c}, only {len(pool)} available")
        picks.append(rng.choice(pool, size=per[c], replace=False))
    return np.sort(np.concatenate(picks))


def subsample(dataset: Dataset, sizes: dict, seed: int) -> Dataset:
    """Class-balanced subset of each named split; unspecified splits are dropped."""
    rng = np.random.default_rng(seed)
    images, labels, splits, offset = [], [], {}, 0
    for name, size in sizes.items():
        if name not in dataset.splits:
            raise ConfigError(f"dataset.{name}_size", f"dataset has no split {name!r}")
        idx = dataset.splits[name]
        if size > len(idx):
            raise ConfigError(f"dataset.{name}_size", f"requested {size} samples, split has {len(idx)}")
        local = _balanced_pick(dataset.labels[idx], size, dataset.class_count, rng, name)
        chosen = idx[local]
        images.append(dataset.images[chosen])
        labels.append(dataset.labels[chosen])
        splits[name] = np.arange(offset, offset + len(chosen))
        offset += len(chosen)
    return Dataset(np.concatenate(images), np.concatenate(labels), dataset.class_count, splits)


def carve_split(dataset: Dataset, source: str, name: str, size: int, seed: int) -> Dataset:
    """Move a class-balanced ``size``-sample subset of ``source`` into a new split ``name``."""
    idx = dataset.splits[source]
    rng = np.random.default_rng(seed)
    local = _balanced_pick(dataset.labels[idx], size, dataset.class_count, rng, name)
    taken = idx[local]
    splits = dict(dataset.splits)
    splits[source] = np.setdiff1d(idx, taken)
    splits[name] = taken
    return Dataset(dataset.images, dataset.labels, dataset.class_count, splits)


def save_cache(dataset: Dataset, path) -> None:
    arrays = {f"split_{k}": v for k, v in dataset.splits.items()}
    with open(path, "wb") as fh:
        np.savez(fh, images=dataset.images, labels=dataset.labels,
                 class_count=np.array(dataset.class_count), **arrays)


def load_cache(path) -> Dataset:
    with np.load(path) as z:
        splits = {k[len("split_"):]: z[k] for k in z.files if k.startswith("split_")}
        return Dataset(z["images"], z["labels"], int(z["class_count"]), splits)


def write_idx(images_u8: np.ndarray, labels_u8: np.ndarray, images_path, labels_path, compress=False) -> None:
    """Write uint8 arrays as IDX files (used for fixtures and exports)."""
    n, h, w = images_u8.shape
    img = struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w) + images_u8.astype(np.uint8).tobytes()
    lab = struct.pack(">II", IDX_LABELS_MAGIC, len(labels_u8)) + labels_u8.astype(np.uint8).tobytes()
    for path, payload in ((images_path, img), (labels_path, lab)):
        if compress:
            payload = gzip.compress(payload, mtime=0)
        with open(path, "wb") as fh:
            fh.write(payload)
