"""Datasets: CSV ingestion, synthetic generation, and non-IID partitioning."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Tabular classification data: features ``X`` (n, m) and labels ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] == 0:
            raise ValueError("dataset must contain at least one sample")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("label count does not match sample count")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset features must be finite")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.y.min() < 0 or self.y.max() >= self.num_classes:
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices], self.num_classes)


@dataclass(frozen=True)
class SynthSpec:
    """Gaussian-cluster stand-in for IIoT-style tabular intrusion data."""

    num_samples: int = 2000
    input_dim: int = 16
    num_classes: int = 2
    cluster_separation: float = 3.0
    label_noise: float = 0.0
    non_iid_skew: float = 1.0  # Dirichlet concentration for node class mixes

    def __post_init__(self) -> None:
        if self.num_samples < self.num_classes:
            raise ValueError("num_samples must cover every class")
        if self.non_iid_skew <= 0:
            raise ValueError("non_iid_skew must be positive")
        if not 0.0 <= self.label_noise < 1.0:
            raise ValueError("label_noise must lie in [0, 1)")


def load_csv(path: str) -> Dataset:
    """Load ``f0..f{m-1},label`` CSV exports (header required).

    Malformed rows raise with the 1-based line number so bad exports are
    easy to locate.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = [f"f{i}" for i in range(len(header) - 1)] + ["label"]
        if header != expected:
            raise ValueError(
                f"{path}: line 1: expected header f0..f{len(header) - 2},label, got {header}"
            )
        m = len(header) - 1
        feats: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != m + 1:
                raise ValueError(f"{path}: line {lineno}: expected {m + 1} fields, got {len(row)}")
            try:
                feats.append([float(v) for v in row[:m]])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric feature value") from None
            try:
                labels.append(int(row[m]))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer label") from None
    if not feats:
        raise ValueError(f"{path}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    if y.min() < 0:
        raise ValueError(f"{path}: negative label")
    return Dataset(np.asarray(feats, dtype=np.float64), y, int(y.max()) + 1)


def make_synthetic(spec: SynthSpec, rng: np.random.Generator) -> Dataset:
    """Sample unit-variance Gaussian clusters, one per class, plus label noise."""
    directions = rng.standard_normal((spec.num_classes, spec.input_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centers = directions * (spec.cluster_separation / 2.0)
    counts = np.full(spec.num_classes, spec.num_samples // spec.num_classes)
    counts[: spec.num_samples % spec.num_classes] += 1
    xs, ys = [], []
    for c in range(spec.num_classes):
        xs.append(centers[c] + rng.standard_normal((counts[c], spec.input_dim)))
        ys.append(np.full(counts[c], c, dtype=np.int64))
    X = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(spec.num_samples)
    X, y = X[order], y[order]
    if spec.label_noise > 0:
        flip = rng.random(spec.num_samples) < spec.label_noise
        y[flip] = rng.integers(0, spec.num_classes, size=int(flip.sum()))
    return Dataset(X, y, spec.num_classes)


def train_test_split(
    ds: Dataset, test_fraction: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    order = rng.permutation(ds.n)
    n_test = max(1, int(round(ds.n * test_fraction)))
    return ds.subset(order[n_test:]), ds.subset(order[:n_test])


def dirichlet_partition(
    ds: Dataset,
    num_nodes: int,
    skew: float,
    rng: np.random.Generator,
    max_attempts: int = 10,
) -> list[np.ndarray]:
    """Split sample indices across nodes with Dirichlet(skew) class mixes.

    Small ``skew`` concentrates classes on few nodes; large ``skew``
    approaches the IID split. Redraws (up to ``max_attempts``) if any node
    would end up empty.
    """
    if num_nodes < 1:
        raise ValueError("need at least one node")
    for attempt in range(max_attempts):
        shards: list[list[int]] = [[] for _ in range(num_nodes)]
        for c in range(ds.num_classes):
            idx = np.flatnonzero(ds.y == c)
            rng.shuffle(idx)
            props = rng.dirichlet(np.full(num_nodes, skew))
            cuts = (np.cumsum(props)[:-1] * len(idx)).astype(int)
            for node, chunk in enumerate(np.split(idx, cuts)):
                shards[node].extend(chunk.tolist())
        if all(shards):
            return [np.asarray(sorted(s), dtype=np.int64) for s in shards]
        logger.warning("dirichlet partition attempt %d left an empty node, redrawing", attempt + 1)
    raise ValueError(f"could not produce non-empty node splits in {max_attempts} attempts")


def feature_box(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature observed [min, max], the clamp box for adversarial inputs."""
    return ds.X.min(axis=0), ds.X.max(axis=0)
