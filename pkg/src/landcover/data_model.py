"""Sample containers, file ingestion and reproducible train/test splitting.

Two on-disk formats are supported:

* sample CSV: header ``f1,...,fn,label`` then one row per sample with ``n``
  decimal reals and an integer class label;
* raster: ASCII header ``TCRASTER width height bands`` terminated by a newline,
  followed by ``width*height*bands`` little-endian float32 values stored
  band-sequentially.

All random splitting goes through :func:`numpy.random.default_rng` (PCG64),
whose stream is fixed for a given seed across platforms.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


RASTER_MAGIC = "TCRASTER"


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size == 0:
            raise DataError("sample features must be a non-empty vector")
        if not np.all(np.isfinite(feats)):
            raise DataError("sample features must be finite")
        if int(self.label) < 0:
            raise DataError("labels must be non-negative integers")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class Dataset:
    """Labelled feature vectors stored row-wise.

    ``features`` is an ``(n_samples, dim)`` float64 array and ``labels`` an
    integer vector. Class ids are ``0..n_classes-1``; ids that never occur
    are allowed here and rejected by the trainers that need them.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels)
        if X.ndim != 2:
            raise DataError("features must be a 2-D array (n_samples, dim)")
        if X.shape[1] == 0:
            raise DataError("samples must have at least one feature")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError("labels must be a vector with one entry per sample")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        if y.size and y.min() < 0:
            raise DataError("labels must be non-negative integers")
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X))[0, 0])
            raise DataError(f"non-finite feature value in sample {bad}")
        n_classes = int(y.max()) + 1 if y.size else 0
        names = {int(k): str(v) for k, v in dict(self.class_names).items()}
        n_classes = max(n_classes, max(names, default=-1) + 1)
        for k in range(n_classes):
            names.setdefault(k, f"class_{k}")
        if sorted(names) != list(range(n_classes)):
            raise DataError("class ids must be contiguous from 0")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", names)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample],
                     class_names: Mapping[int, str] | None = None) -> "Dataset":
        if not samples:
            raise DataError("cannot build a dataset from zero samples")
        dims = {s.features.size for s in samples}
        if len(dims) != 1:
            raise DataError(f"samples have inconsistent feature counts {sorted(dims)}")
        X = np.vstack([s.features for s in samples])
        y = np.array([s.label for s in samples], dtype=np.int64)
        return cls(X, y, class_names or {})

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def samples(self) -> list[Sample]:
        return [Sample(x, int(c)) for x, c in zip(self.features, self.labels)]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_names)

    def select_features(self, count: int) -> "Dataset":
        """Keep the first ``count`` features."""
        if not 1 <= count <= self.dim:
            raise DataError(f"feature count {count} outside 1..{self.dim}")
        return Dataset(self.features[:, :count], self.labels, self.class_names)

    def require_populated(self) -> None:
        counts = self.class_counts()
        empty = [self.class_names[k] for k in range(self.n_classes) if counts[k] == 0]
        if empty:
            raise DataError(f"classes without samples: {', '.join(empty)}")


@dataclass(frozen=True)
class RasterCube:
    """Multi-band image; ``data`` has shape ``(bands, height, width)``, float32."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        if arr.ndim != 3 or 0 in arr.shape:
            raise DataError("raster data must have shape (bands, height, width)")
        _check_finite_pixels(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def bands(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    def pixels(self) -> np.ndarray:
        """Per-pixel feature vectors, row-major over (row, col): ``(h*w, bands)``."""
        return self.data.reshape(self.bands, -1).T.astype(np.float64)


def _check_finite_pixels(arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        b, r, c = (int(v) for v in np.argwhere(bad)[0])
        raise DataError(f"non-finite raster value at band {b}, row {r}, col {c}")


def load_samples(path: str | os.PathLike) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2 or header[-1].lower() != "label":
        raise DataError(f"{path}:1: header must be 'f1,...,fn,label'")
    n_fields = len(header)
    X, y = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise DataError(f"{path}:{lineno}: blank line")
        parts = line.split(",")
        if len(parts) != n_fields:
            raise DataError(
                f"{path}:{lineno}: expected {n_fields} fields, found {len(parts)}")
        try:
            row = [float(p) for p in parts[:-1]]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
        if not all(math.isfinite(v) for v in row):
            raise DataError(f"{path}:{lineno}: non-finite feature value")
        try:
            label = int(parts[-1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label must be an integer") from None
        if label < 0:
            raise DataError(f"{path}:{lineno}: label must be non-negative")
        X.append(row)
        y.append(label)
    if not X:
        raise DataError(f"{path}: no samples after the header")
    return Dataset(np.array(X), np.array(y, dtype=np.int64))


def format_samples(ds: Dataset) -> str:
    header = ",".join(f"f{i + 1}" for i in range(ds.dim)) + ",label"
    rows = [header]
    for x, c in zip(ds.features, ds.labels):
        rows.append(",".join(repr(float(v)) for v in x) + f",{int(c)}")
    return "\n".join(rows) + "\n"


def save_samples(ds: Dataset, path: str | os.PathLike) -> None:
    Path(path).write_text(format_samples(ds), encoding="utf-8")


def split_random(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified random split; each class contributes ``round(f * n_c)`` to train.

    The per-class train count is clamped to ``[1, n_c - 1]`` so both parts see
    every class. Within each part samples keep their original order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    counts = ds.class_counts()
    train_idx = []
    for k in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == k)
        if members.size == 0:
            continue
        if members.size < 2:
            raise DataError(f"class {ds.class_names[k]} has a single sample; cannot split")
        n_train = int(math.floor(train_fraction * counts[k] + 0.5))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.append(rng.permutation(members)[:n_train])
    chosen = np.zeros(len(ds), dtype=bool)
    if train_idx:
        chosen[np.concatenate(train_idx)] = True
    return ds.subset(np.flatnonzero(chosen)), ds.subset(np.flatnonzero(~chosen))


def save_raster(cube: RasterCube, path: str | os.PathLike) -> None:
    Path(path).write_bytes(raster_bytes(cube))


def raster_bytes(cube: RasterCube) -> bytes:
    header = f"{RASTER_MAGIC} {cube.width} {cube.height} {cube.bands}\n".encode("ascii")
    return header + np.ascontiguousarray(cube.data, dtype="<f4").tobytes()


def is_raster_file(path: str | os.PathLike) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(RASTER_MAGIC)) == RASTER_MAGIC.encode("ascii")


def load_raster(path: str | os.PathLike) -> RasterCube:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    newline = blob.find(b"\n")
    if newline < 0:
        raise DataError(f"{path}: missing raster header line")
    fields = blob[:newline].decode("ascii", errors="replace").split()
    if len(fields) != 4 or fields[0] != RASTER_MAGIC:
        raise DataError(f"{path}: header must read '{RASTER_MAGIC} width height bands'")
    try:
        width, height, bands = (int(v) for v in fields[1:])
    except ValueError:
        raise DataError(f"{path}: non-integer raster dimensions") from None
    if min(width, height, bands) <= 0:
        raise DataError(f"{path}: raster dimensions must be positive")
    payload = blob[newline + 1:]
    expected = width * height * bands * 4
    if len(payload) != expected:
        raise DataError(
            f"{path}: header declares {width}x{height}x{bands} "
            f"({expected} bytes) but payload holds {len(payload)} bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(bands, height, width)
    return RasterCube(data.astype(np.float32))
