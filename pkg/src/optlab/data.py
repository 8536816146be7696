"""Data ingestion: CIFAR-10 binaries, QR random projection, synthetic
anisotropic Gaussians, and deterministic batch iteration.
"""
from __future__ import annotations

import pathlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CorruptDataError, IngestionError
from .linalg import qr_orthonormal

RECORD_BYTES = 3073  # 1 label byte + 3072 pixel bytes (R, G, B planes)
RECORDS_PER_FILE = 10000
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILE = "test_batch.bin"


@dataclass
class Dataset:
    features: np.ndarray  # n x d float64
    labels: np.ndarray  # n int64 in [0, classes)
    split: str  # "train" or "test"

    def __post_init__(self):
        if len(self.features) == 0:
            raise IngestionError("empty dataset")
        if len(self.features) != len(self.labels):
            raise IngestionError("features/labels length mismatch")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _read_batch_file(path: pathlib.Path):
    if not path.is_file():
        raise IngestionError(f"missing CIFAR-10 batch file: {path}")
    raw = path.read_bytes()
    if len(raw) != RECORDS_PER_FILE * RECORD_BYTES:
        raise IngestionError(
            f"{path} has {len(raw)} bytes, expected {RECORDS_PER_FILE * RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(RECORDS_PER_FILE, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.max() >= 10:
        raise CorruptDataError(f"{path} contains a label byte >= 10")
    pixels = records[:, 1:].astype(np.float64) / 255.0
    return pixels, labels


def cifar10_present(directory) -> bool:
    """True when the first training batch file exists under `directory`
    (directly or inside cifar-10-batches-bin)."""
    root = pathlib.Path(directory)
    return (root / TRAIN_FILES[0]).is_file() or (
        root / "cifar-10-batches-bin" / TRAIN_FILES[0]
    ).is_file()


def load_cifar10(directory):
    """Train and test splits from the binary batch distribution.

    Accepts either the directory holding the .bin files or its parent
    containing the standard cifar-10-batches-bin folder.
    """
    root = pathlib.Path(directory)
    if not (root / TRAIN_FILES[0]).is_file() and (root / "cifar-10-batches-bin").is_dir():
        root = root / "cifar-10-batches-bin"
    feats, labs = [], []
    for name in TRAIN_FILES:
        x, y = _read_batch_file(root / name)
        feats.append(x)
        labs.append(y)
    train = Dataset(np.vstack(feats), np.concatenate(labs), "train")
    x, y = _read_batch_file(root / TEST_FILE)
    test = Dataset(x, y, "test")
    return train, test


def jl_project(x: np.ndarray, d_target: int = 256, seed: int = 0):
    """Project rows of x onto a random d_target-dimensional orthonormal basis.

    The basis comes from the QR factorization of a seeded standard Gaussian
    matrix; the same projection must be applied to every split of a dataset.
    Returns (projected rows, projection matrix Q) with Q^T Q = I.
    """
    x = np.asarray(x, dtype=np.float64)
    d_orig = x.shape[1]
    if d_target > d_orig:
        raise ConfigError(f"d_target {d_target} exceeds input dimension {d_orig}")
    rng = np.random.default_rng(seed)
    q = qr_orthonormal(rng.normal(size=(d_orig, d_target)))
    return x @ q, q


_MEAN_SCALE = 0.5  # class-mean spread relative to unit base noise


def synthetic_anisotropic(
    n: int, d: int, classes: int = 10, condition: float = 100.0, seed: int = 0
) -> Dataset:
    """Class-conditional Gaussians sharing one anisotropic covariance.

    The covariance has geometrically spaced eigenvalues spanning the ratio
    `condition` in a seeded random orthonormal basis; labels are balanced
    (counts differ by at most one). Identical seeds give identical datasets.
    """
    if condition < 1:
        raise ConfigError("condition number must be >= 1")
    rng = np.random.default_rng(seed)
    eigs = np.geomspace(1.0, condition, d)
    basis = qr_orthonormal(rng.normal(size=(d, d)))
    sqrt_cov = (basis * np.sqrt(eigs)) @ basis.T
    means = rng.normal(size=(classes, d)) * _MEAN_SCALE
    labels = rng.permutation(np.arange(n) % classes)
    noise = rng.normal(size=(n, d)) @ sqrt_cov
    return Dataset(means[labels] + noise, labels.astype(np.int64), "train")


def batch_iter(dataset: Dataset, batch_size: int, epoch: int, seed: int):
    """Seeded per-epoch permutation of the dataset, final short batch kept.

    The permutation is the unit of "data ordering": replaying the same
    (seed, epoch) yields the identical batch sequence, and distinct epochs
    reshuffle even under a fixed seed.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    rng = np.random.default_rng((seed, epoch))
    perm = rng.permutation(dataset.n)
    for start in range(0, dataset.n, batch_size):
        idx = perm[start : start + batch_size]
        yield dataset.features[idx], dataset.labels[idx]
