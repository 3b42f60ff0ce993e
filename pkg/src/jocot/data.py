"""Dataset ingestion, rebalancing, stratified splitting, synthetic generation.

The on-disk format is a single CSV schema: header ``f0,...,f{d-1},label``,
one sample per row, decimal feature values, integer label (1-based files
are re-indexed to 0-based on load). The canonical skeleton layout has 51
features (17 landmarks x 3 values); other widths are accepted when the
caller does not pin one.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

CANONICAL_FEATURES = 51


@dataclass
class LabeledDataset:
    """Immutable-by-convention feature matrix with 0-based integer labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_names: Optional[list] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be (n, d) and labels (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes - 1}]")
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise ValueError("class_names length must equal num_classes")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.features[idx].copy(), self.labels[idx].copy(),
                              self.num_classes, self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test/validation fractions (must sum to 1) plus a shuffle seed."""

    train_frac: float = 0.8
    test_frac: float = 0.1
    val_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.test_frac, self.val_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError("all split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fracs)}, expected 1")


def _parse_header(header, path):
    if not header or header[-1].strip() != "label":
        raise ValueError(f"{path}:1: schema error, header must end with 'label'")
    d = len(header) - 1
    expected = [f"f{i}" for i in range(d)]
    got = [c.strip() for c in header[:-1]]
    if d < 1 or got != expected:
        raise ValueError(f"{path}:1: schema error, header must read f0,...,f{{d-1}},label")
    return d


def load_csv(path, expected_features: Optional[int] = None) -> LabeledDataset:
    """Parse a feature CSV; errors carry the offending line number.

    With ``expected_features`` set (e.g. 51 for the canonical skeleton
    layout) a differing column count is a schema error; by default the
    width is taken from the header. Files labeled 1..M are shifted to
    0..M-1, detected by the absence of label 0.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        d = _parse_header(header, path)
        if expected_features is not None and d != expected_features:
            raise ValueError(
                f"{path}: schema error, expected {expected_features} feature "
                f"columns, found {d}"
            )
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} columns, got {len(row)}")
            try:
                values = [float(v) for v in row[:-1]]
                label = int(row[-1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed numeric value") from None
            if not all(np.isfinite(values)):
                raise ValueError(f"{path}:{lineno}: non-finite feature value")
            feats.append(values)
            labels.append(label)
    if not feats:
        raise ValueError(f"{path}: no data rows")
    labels_arr = np.array(labels, dtype=np.intp)
    if labels_arr.min() < 0:
        raise ValueError(f"{path}: negative labels")
    if labels_arr.min() >= 1:
        labels_arr = labels_arr - 1  # 1-based file
    return LabeledDataset(np.array(feats), labels_arr, int(labels_arr.max()) + 1)


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write the dataset in the load_csv schema; floats via repr so a
    save/load round trip is bitwise exact."""
    d = dataset.feature_dim
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"f{i}" for i in range(d)] + ["label"]) + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def rebalance(dataset: LabeledDataset, per_class: int, seed) -> LabeledDataset:
    """Sample up to per_class items per class without replacement (seeded).

    Classes with fewer samples are kept whole with a warning; empty
    classes are an error since the class then cannot be learned at all.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    counts = dataset.class_counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"class {int(empty[0])} has no samples")
    kept = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size < per_class:
            warnings.warn(
                f"class {c} has only {members.size} samples, keeping all "
                f"(wanted {per_class})", stacklevel=2)
            kept.append(members)
        else:
            kept.append(np.sort(rng.choice(members, size=per_class, replace=False)))
    return dataset.subset(np.concatenate(kept))


def _largest_remainder_counts(n: int, fracs) -> list:
    exact = [n * f for f in fracs]
    counts = [int(np.floor(e)) for e in exact]
    shortfall = n - sum(counts)
    # distribute leftovers to the largest fractional parts, earlier split
    # winning ties (train, then test, then val)
    order = sorted(range(len(fracs)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:shortfall]:
        counts[i] += 1
    return counts


def split(dataset: LabeledDataset, spec: SplitSpec):
    """Stratified (train, test, val) partition, exact by largest remainder."""
    if len(dataset) < 3:
        raise ValueError("dataset too small to split three ways")
    rng = np.random.default_rng(spec.seed)
    fracs = (spec.train_frac, spec.test_frac, spec.val_frac)
    parts = [[], [], []]
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        counts = _largest_remainder_counts(members.size, fracs)
        start = 0
        for part, count in zip(parts, counts):
            part.append(members[start:start + count])
            start += count
    picks = [np.sort(np.concatenate(p)) if p else np.array([], dtype=np.intp) for p in parts]
    return tuple(dataset.subset(p) for p in picks)


def synthesize(num_classes: int, per_class: int, dim: int = CANONICAL_FEATURES,
               separation: float = 3.0, seed=0) -> LabeledDataset:
    """Isotropic unit-variance Gaussian clusters around random centers.

    Each class center is a seeded random direction scaled to norm
    ``separation``; larger separation means easier classes.
    """
    if num_classes < 2 or dim < 2:
        raise ValueError("need num_classes >= 2 and dim >= 2")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if separation <= 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(num_classes, dim))
    centers = directions / np.linalg.norm(directions, axis=1, keepdims=True) * separation
    features = np.empty((num_classes * per_class, dim))
    labels = np.empty(num_classes * per_class, dtype=np.intp)
    for c in range(num_classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = centers[c] + rng.normal(size=(per_class, dim))
        labels[block] = c
    return LabeledDataset(features, labels, num_classes)


@dataclass
class Standardizer:
    """Per-feature affine transform fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, dataset: LabeledDataset) -> "Standardizer":
        mean = dataset.features.mean(axis=0)
        std = dataset.features.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, dataset: LabeledDataset) -> LabeledDataset:
        return LabeledDataset((dataset.features - self.mean) / self.std,
                              dataset.labels.copy(), dataset.num_classes,
                              dataset.class_names)
