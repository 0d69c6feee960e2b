"""Dataset loading (MNIST IDX, CIFAR-10/100 binary), per-channel
standardization, and seeded shuffled batching. No augmentation anywhere."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, FormatError

MNIST_IMAGE_MAGIC = 2051
MNIST_LABEL_MAGIC = 2049
CIFAR_PIXELS = 3072  # 3 channels x 32 x 32

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class Dataset:
    """Images as floats in [0,1], shaped (N, H, W, C); integer labels."""

    images: np.ndarray
    labels: np.ndarray
    split: str

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError(
                f"image count {self.images.shape[0]} != label count {self.labels.shape[0]}")

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass
class Standardizer:
    """Per-channel affine map fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, images: np.ndarray) -> "Standardizer":
        mean = images.mean(axis=(0, 1, 2), dtype=np.float64)
        std = images.std(axis=(0, 1, 2), dtype=np.float64)
        std = np.maximum(std, 1e-8)
        return cls(mean.astype(np.float32), std.astype(np.float32))

    def apply(self, images: np.ndarray) -> np.ndarray:
        return ((images - self.mean) / self.std).astype(np.float32)

    def inverse(self, images: np.ndarray) -> np.ndarray:
        return (images * self.std + self.mean).astype(np.float32)


def standardize(dataset: Dataset, stats: Standardizer | None = None
                ) -> tuple[Dataset, Standardizer]:
    """Standardize per channel; with ``stats`` absent they are fitted on
    this dataset (the training split). Returns the new dataset and the
    stats used, so the test split can reuse them."""
    if stats is None:
        stats = Standardizer.fit(dataset.images)
    return Dataset(stats.apply(dataset.images), dataset.labels, dataset.split), stats


# ---------------------------------------------------------------------------
# MNIST IDX
# ---------------------------------------------------------------------------

def load_mnist_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Decode the big-endian IDX pair (magics 2051/2049), scaling pixel
    bytes to [0,1]. Every header field is validated and named on error."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    raw = images_path.read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{images_path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != MNIST_IMAGE_MAGIC:
        raise FormatError(
            f"{images_path}: image magic {magic} != {MNIST_IMAGE_MAGIC}")
    if len(raw) != 16 + count * rows * cols:
        raise FormatError(
            f"{images_path}: payload {len(raw) - 16} bytes, "
            f"header count={count} rows={rows} cols={cols} needs {count * rows * cols}")
    images = np.frombuffer(raw, dtype=np.uint8, offset=16)
    images = images.reshape(count, rows, cols, 1).astype(np.float32) / 255.0

    raw = labels_path.read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{labels_path}: truncated IDX header")
    magic, n_labels = struct.unpack(">II", raw[:8])
    if magic != MNIST_LABEL_MAGIC:
        raise FormatError(
            f"{labels_path}: label magic {magic} != {MNIST_LABEL_MAGIC}")
    if len(raw) != 8 + n_labels:
        raise FormatError(
            f"{labels_path}: payload {len(raw) - 8} bytes, header count={n_labels}")
    if n_labels != count:
        raise FormatError(
            f"image count {count} != label count {n_labels}")
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(images, labels, split)


def load_mnist(data_dir, split: str = "train") -> Dataset:
    images_name, labels_name = MNIST_FILES[split]
    data_dir = Path(data_dir)
    return load_mnist_idx(data_dir / images_name, data_dir / labels_name, split)


# ---------------------------------------------------------------------------
# CIFAR binary
# ---------------------------------------------------------------------------

def _decode_cifar_records(path: Path, label_bytes: int, label_index: int):
    record = label_bytes + CIFAR_PIXELS
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if raw.size == 0 or raw.size % record != 0:
        raise FormatError(
            f"{path}: truncated at byte offset {raw.size - raw.size % record} "
            f"(size {raw.size} is not a multiple of the {record}-byte record)")
    rows = raw.reshape(-1, record)
    labels = rows[:, label_index].astype(np.int64)
    pixels = rows[:, label_bytes:].reshape(-1, 3, 32, 32)
    images = pixels.transpose(0, 2, 3, 1).astype(np.float32) / 255.0
    return images, labels


def load_cifar(data_dir, variant: str, split: str = "train") -> Dataset:
    """Read the binary batches for CIFAR-10 (1 label byte + 3072 pixels per
    record) or CIFAR-100 (coarse + fine label bytes; the fine label is
    used)."""
    data_dir = Path(data_dir)
    if variant == "c10":
        names = ([f"data_batch_{i}.bin" for i in range(1, 6)]
                 if split == "train" else ["test_batch.bin"])
        label_bytes, label_index = 1, 0
    elif variant == "c100":
        names = ["train.bin" if split == "train" else "test.bin"]
        label_bytes, label_index = 2, 1
    else:
        raise ConfigError(f"unknown CIFAR variant {variant!r} (want c10 or c100)")
    parts = [_decode_cifar_records(data_dir / n, label_bytes, label_index)
             for n in names]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return Dataset(images, labels, split)


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


def batches(dataset: Dataset, batch_size: int = 128, seed: int = 0,
            shuffle: bool = True):
    """Yield the dataset in batches; a seeded permutation when shuffling,
    the final short batch kept (50,000 / 128 -> 391 batches)."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    n = len(dataset)
    if shuffle:
        order = np.random.default_rng(seed).permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        sel = order[start:start + batch_size]
        yield Batch(dataset.images[sel], dataset.labels[sel], sel)
