"""Dataset loading, synthesis, pooling, and splitting.

Handles MNIST-style IDX files and CIFAR-10 binary batches bit-exactly,
generates synthetic Gaussian-cluster classification data, and produces
disjoint train/validation/test splits. Pixels are scaled into [0, 1];
the test split is meant for final reporting only and is never consumed
by any search or tuning decision in this package.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataConsistencyError,
    DataFormatError,
    DataIOError,
    DimensionError,
    SizeError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073
CIFAR_CLASSES = 10

# ITU-R BT.601 luma weights for RGB -> grayscale
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class LabeledSet:
    """Feature matrix in [0,1] with integer class labels below num_classes."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {feats.shape}")
        if labels.ndim != 1:
            raise DimensionError("labels must be 1-D")
        if feats.shape[0] != labels.shape[0]:
            raise DataConsistencyError(
                f"{feats.shape[0]} feature rows vs {labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(feats)):
            raise DataFormatError("features contain non-finite values")
        if feats.size and (feats.min() < 0.0 or feats.max() > 1.0):
            raise DataFormatError("features outside [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DataConsistencyError("label outside 0..num_classes-1")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "LabeledSet":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledSet(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class DatasetSplits:
    train: LabeledSet
    val: LabeledSet
    test: LabeledSet


def _read_exact(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc


def load_idx(images_path, labels_path) -> LabeledSet:
    """Load a big-endian IDX image/label file pair, pixels scaled by 1/255."""
    img_raw = _read_exact(images_path)
    lab_raw = _read_exact(labels_path)

    if len(img_raw) < 16:
        raise DataIOError(f"{images_path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", img_raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )
    npix = count * rows * cols
    if len(img_raw) < 16 + npix:
        raise DataIOError(f"{images_path}: expected {npix} pixel bytes, file truncated")

    if len(lab_raw) < 8:
        raise DataIOError(f"{labels_path}: truncated IDX label header")
    lmagic, lcount = struct.unpack(">II", lab_raw[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad label magic 0x{lmagic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )
    if lcount != count:
        raise DataConsistencyError(
            f"{count} images but {lcount} labels ({images_path}, {labels_path})"
        )
    if len(lab_raw) < 8 + lcount:
        raise DataIOError(f"{labels_path}: expected {lcount} label bytes, file truncated")

    pixels = np.frombuffer(img_raw, dtype=np.uint8, count=npix, offset=16)
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lab_raw, dtype=np.uint8, count=lcount, offset=8).astype(
        np.int64
    )
    num_classes = int(labels.max()) + 1 if lcount else 0
    return LabeledSet(features, labels, num_classes)


def load_cifar10(batch_paths) -> LabeledSet:
    """Load CIFAR-10 binary batches, converted to grayscale in [0, 1]."""
    feature_blocks = []
    label_blocks = []
    for path in batch_paths:
        raw = _read_exact(path)
        if len(raw) % CIFAR_RECORD_BYTES != 0:
            raise DataFormatError(
                f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        n = len(raw) // CIFAR_RECORD_BYTES
        if n == 0:
            continue
        records = np.frombuffer(raw, dtype=np.uint8).reshape(n, CIFAR_RECORD_BYTES)
        labels = records[:, 0].astype(np.int64)
        if labels.size and labels.max() >= CIFAR_CLASSES:
            raise DataConsistencyError(f"{path}: label above {CIFAR_CLASSES - 1}")
        planes = records[:, 1:].reshape(n, 3, 1024).astype(np.float64)
        gray = (
            _LUMA[0] * planes[:, 0] + _LUMA[1] * planes[:, 1] + _LUMA[2] * planes[:, 2]
        ) / 255.0
        feature_blocks.append(np.clip(gray, 0.0, 1.0))
        label_blocks.append(labels)
    if not feature_blocks:
        return LabeledSet(np.zeros((0, 1024)), np.zeros(0, dtype=np.int64), CIFAR_CLASSES)
    return LabeledSet(
        np.vstack(feature_blocks), np.concatenate(label_blocks), CIFAR_CLASSES
    )


def make_splits(
    source: LabeledSet, n_train: int, n_val: int, n_test: int, seed: int
) -> DatasetSplits:
    """Disjoint uniformly sampled train/val/test subsets, seed-deterministic."""
    total = n_train + n_val + n_test
    if total > len(source):
        raise SizeError(
            f"requested {total} examples but the source has {len(source)}"
        )
    perm = np.random.default_rng(seed).permutation(len(source))
    return DatasetSplits(
        train=source.take(perm[:n_train]),
        val=source.take(perm[n_train : n_train + n_val]),
        test=source.take(perm[n_train + n_val : total]),
    )


def downsample(dset: LabeledSet, side: int, factor: int) -> LabeledSet:
    """Average-pool square images with factor x factor windows."""
    if side * side != dset.dim:
        raise DimensionError(f"{dset.dim} features is not a {side}x{side} image")
    if factor < 1 or side % factor != 0:
        raise DimensionError(f"pool factor {factor} does not divide side {side}")
    if factor == 1:
        return dset
    out = side // factor
    imgs = dset.features.reshape(len(dset), out, factor, out, factor)
    pooled = imgs.mean(axis=(2, 4)).reshape(len(dset), out * out)
    return LabeledSet(pooled, dset.labels, dset.num_classes)


def synth_gaussians(
    n: int, d: int, num_classes: int, separation: float, seed: int
) -> LabeledSet:
    """Synthetic classification data: one isotropic Gaussian cluster per class.

    Cluster centers sit `separation` away from the origin along
    alternating signed axes (unit noise), so classes are pairwise at
    least `separation` apart; the cloud is then rescaled into [0, 1].
    Labels are balanced to within one example.
    """
    if n < 1 or d < 1 or num_classes < 1:
        raise SizeError("n, d and num_classes must all be >= 1")
    rng = np.random.default_rng(seed)
    means = np.zeros((num_classes, d))
    for k in range(num_classes):
        axis = (k // 2) % d
        sign = 1.0 if k % 2 == 0 else -1.0
        ring = 1 + k // (2 * d)
        means[k, axis] = sign * separation * ring
    labels = (np.arange(n) % num_classes)[rng.permutation(n)]
    feats = means[labels] + rng.standard_normal((n, d))
    lo, hi = feats.min(), feats.max()
    if hi > lo:
        feats = (feats - lo) / (hi - lo)
    else:
        feats = np.full_like(feats, 0.5)
    return LabeledSet(feats, labels, num_classes)


def save_npz(dset: LabeledSet, path) -> None:
    np.savez(
        path,
        features=dset.features,
        labels=dset.labels,
        num_classes=np.int64(dset.num_classes),
    )


def load_npz(path) -> LabeledSet:
    try:
        with np.load(path) as data:
            return LabeledSet(
                data["features"], data["labels"], int(data["num_classes"])
            )
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, (DataFormatError, DataConsistencyError)):
            raise
        raise DataFormatError(f"cannot load dataset from {path}: {exc}") from exc
