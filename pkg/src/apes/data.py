"""Datasets: synthetic class blobs, IDX (MNIST family) files, even user shards."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError

__all__ = [
    "Dataset",
    "IdxFormatError",
    "BadMagicError",
    "TruncatedIdxError",
    "CountMismatchError",
    "LabelRangeError",
    "synth_classification",
    "load_idx",
    "write_idx",
    "partition_even",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


class BadMagicError(IdxFormatError):
    pass


class TruncatedIdxError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class LabelRangeError(IdxFormatError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ParameterError("features must be m x p and labels length m")
        if self.classes < 1:
            raise ParameterError("classes must be positive")
        if y.size and (y.min() < 0 or y.max() >= self.classes):
            raise ParameterError(f"labels must lie in [0, {self.classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.classes)


def synth_classification(m: int, p: int, classes: int, seed=None, noise: float = 1.0,
                         separation: float = 1.0) -> Dataset:
    """Gaussian blobs around random class centroids.

    Centroids are drawn from N(0, separation^2 / p) per coordinate, so their
    pairwise distance is about ``separation * sqrt(2)`` whatever ``p`` is.
    Points are centroid + N(0, noise^2 / p) per coordinate. ``noise = 0``
    gives points sitting exactly on their centroid (linearly separable).
    """
    if m < 1 or p < 1 or classes < 1:
        raise ParameterError("m, p and classes must all be >= 1")
    if noise < 0:
        raise ParameterError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    centroids = rng.normal(0.0, separation / np.sqrt(p), size=(classes, p))
    labels = rng.integers(0, classes, size=m)
    X = centroids[labels] + rng.normal(0.0, noise / np.sqrt(p), size=(m, p))
    return Dataset(X, labels, classes)


def _open(path):
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return path.open("rb")


def _read_idx(path, magic: int, ndim: int):
    with _open(path) as fh:
        raw = fh.read()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedIdxError(
            f"{path}: expected a {header}-byte header, file has {len(raw)} bytes")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = header + int(np.prod(dims))
    if len(raw) < expected:
        raise TruncatedIdxError(
            f"{path}: expected {expected} bytes from header dims {dims}, got {len(raw)}")
    if len(raw) > expected:
        raise CountMismatchError(
            f"{path}: {len(raw) - expected} trailing bytes beyond header dims {dims}")
    data = np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)
    return data


def load_idx(images_path, labels_path, classes: int = 10) -> Dataset:
    """Read an IDX image/label pair (optionally gzip-compressed).

    Pixels are scaled by 1/255; each image is flattened to one feature row.
    """
    images = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() >= classes:
        raise LabelRangeError(f"label {int(labels.max())} outside 0..{classes - 1}")
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(X, labels.astype(np.int64), classes)


def write_idx(path, array: np.ndarray, compress: bool = False) -> None:
    """Write a uint8 array as IDX (3-d arrays as images, 1-d as labels)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = {3: IMAGES_MAGIC, 1: LABELS_MAGIC}.get(array.ndim)
    if magic is None:
        raise ParameterError("only 1-d label and 3-d image arrays are supported")
    payload = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape) + array.tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as fh:
        fh.write(payload)


def partition_even(ds: Dataset, n_users: int, seed=None) -> list[Dataset]:
    """Split rows into n_users disjoint shards whose sizes differ by at most one.

    Rows are permuted with ``seed`` first (``seed=None`` keeps file order).
    """
    m = len(ds)
    if n_users < 1 or n_users > m:
        raise ParameterError(f"cannot split {m} rows among {n_users} users")
    order = np.arange(m) if seed is None else np.random.default_rng(seed).permutation(m)
    return [ds.subset(idx) for idx in np.array_split(order, n_users)]
