"""Dataset plumbing for the neural engine: CSV ingestion and a synthetic
feature-plus-noise generator.

The synthetic generator embeds the class-feature / point-noise picture into
numeric vectors: each class owns a block of feature coordinates, each included
feature contributes a scaled basis vector, and every point gets its own fresh
noise vector in dedicated trailing coordinates. Memorizing train noise buys
nothing on test points, whose noise is freshly drawn.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .nn import LabeledDataset


@dataclass(frozen=True)
class SyntheticFeatureNoiseSpec:
    num_classes: int
    features_per_class: int
    feature_strength: float
    noise_dims: int
    noise_strength: float
    points_per_chunk: int
    inclusion_probs: tuple[float, ...]  # per feature index, shared across classes

    def __post_init__(self) -> None:
        if self.num_classes < 2 or self.features_per_class < 1:
            raise ValueError("need >= 2 classes and >= 1 feature per class")
        if self.noise_dims < 1 or self.points_per_chunk < 1:
            raise ValueError("noise_dims and points_per_chunk must be positive")
        if self.feature_strength < 0 or self.noise_strength < 0:
            raise ValueError("strengths must be non-negative")
        if len(self.inclusion_probs) != self.features_per_class:
            raise ValueError("need one inclusion probability per feature")

    @property
    def dimension(self) -> int:
        return self.num_classes * self.features_per_class + self.noise_dims


def _sample_points(
    spec: SyntheticFeatureNoiseSpec, count: int, rng: np.random.Generator
) -> LabeledDataset:
    d = spec.dimension
    x = np.zeros((count, d), dtype=np.float32)
    labels = rng.integers(0, spec.num_classes, size=count)
    probs = np.asarray(spec.inclusion_probs)
    feat_block = spec.num_classes * spec.features_per_class
    for i in range(count):
        c = int(labels[i])
        included = rng.random(spec.features_per_class) < probs
        cols = c * spec.features_per_class + np.nonzero(included)[0]
        x[i, cols] = spec.feature_strength
        x[i, feat_block:] = spec.noise_strength * rng.standard_normal(spec.noise_dims)
    return LabeledDataset(x, labels.astype(np.int64))


def gen_feature_noise_dataset(
    spec: SyntheticFeatureNoiseSpec,
    chunk_count: int,
    rng: np.random.Generator,
    test_size: Optional[int] = None,
) -> tuple[list[LabeledDataset], LabeledDataset]:
    """Train chunks plus a held-out test set drawn from the same feature
    distribution with fresh noise."""
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    chunks = [
        _sample_points(spec, spec.points_per_chunk, rng) for _ in range(chunk_count)
    ]
    test = _sample_points(spec, test_size or spec.points_per_chunk * 4, rng)
    return chunks, test


def concat_datasets(parts: Sequence[LabeledDataset]) -> LabeledDataset:
    if not parts:
        raise ValueError("nothing to concatenate")
    return LabeledDataset(
        np.concatenate([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
    )


def load_csv_dataset(path: str) -> LabeledDataset:
    """Load `f0,...,f{d-1},label` rows; decimal features, integer label."""
    rows: list[list[float]] = []
    labels: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise ValueError(f"{path}: expected a header ending in 'label'")
        for row in reader:
            rows.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return LabeledDataset(
        np.asarray(rows, dtype=np.float32), np.asarray(labels, dtype=np.int64)
    )


def split_chunks(data: LabeledDataset, chunk_count: int) -> list[LabeledDataset]:
    """Split a dataset into near-equal contiguous chunks."""
    if chunk_count < 1 or chunk_count > len(data):
        raise ValueError("chunk_count must lie in [1, n]")
    idx = np.array_split(np.arange(len(data)), chunk_count)
    return [LabeledDataset(data.features[i], data.labels[i]) for i in idx]
