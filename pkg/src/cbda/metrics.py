"""Balance and budget-usage metrics for an active label."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActiveLabelStore, DatasetShape
from .errors import ClassIndexError, EmptySelectionError


@dataclass(frozen=True)
class ClassDistribution:
    proportions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.proportions, dtype=np.float64)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("proportions must be a non-empty 1-D sequence")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-9:
            raise ValueError("proportions must be >= 0 and sum to 1")
        object.__setattr__(self, "proportions", p)

    @classmethod
    def from_counts(cls, counts) -> "ClassDistribution":
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise EmptySelectionError("cannot build a class distribution from zero labels")
        return cls(counts / total)

    @property
    def num_classes(self) -> int:
        return len(self.proportions)


@dataclass(frozen=True)
class ImbalanceReport:
    imbalance_score: float
    per_class_counts: np.ndarray
    kl_to_uniform: float

    @property
    def min_class_count(self) -> int:
        return int(self.per_class_counts.min())

    @property
    def max_min_ratio(self) -> float:
        lo = self.per_class_counts.min()
        return math.inf if lo == 0 else float(self.per_class_counts.max() / lo)


def class_distribution(store: ActiveLabelStore, num_classes: int | None = None, mode: str = "ground_truth") -> ClassDistribution:
    """Normalised class counts of the labelled pixels (ground-truth classes by default)."""
    counts = store.class_counts(mode)
    if num_classes is not None and num_classes != len(counts):
        raise ClassIndexError(f"store has {len(counts)} classes, not {num_classes}")
    return ClassDistribution.from_counts(counts)


def kl_to_uniform(dist: ClassDistribution) -> float:
    p = dist.proportions
    C = len(p)
    nz = p[p > 0]
    return float(np.sum(nz * np.log(nz * C)))


def imbalance_score(dist: ClassDistribution) -> float:
    """KL(Q || uniform) divided by the one-hot maximum ln C; lies in [0, 1]."""
    C = dist.num_classes
    if C < 2:
        raise ClassIndexError("imbalance score needs at least two classes")
    return min(max(kl_to_uniform(dist) / math.log(C), 0.0), 1.0)


def imbalance_report(store: ActiveLabelStore, mode: str = "ground_truth") -> ImbalanceReport:
    counts = store.class_counts(mode)
    dist = ClassDistribution.from_counts(counts)
    kl = kl_to_uniform(dist)
    return ImbalanceReport(kl / math.log(dist.num_classes), counts, kl)


def selected_fractions(store: ActiveLabelStore, shape: DatasetShape | None = None) -> np.ndarray:
    """Fraction of each image's pixels that are labelled."""
    shape = shape or store.shape
    return store.per_image_counts() / shape.pixels_per_image


def selection_histogram(store: ActiveLabelStore, shape: DatasetShape | None = None, num_bins: int = 10):
    """Histogram of per-image labelled fractions over [0, 1].

    Bins are right-closed, ``[0, 1/n], (1/n, 2/n], ..., ((n-1)/n, 1]``, so an
    unlabelled image always falls in the first bin.  Returns ``(counts, edges)``.
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    frac = selected_fractions(store, shape)
    idx = np.clip(np.ceil(frac * num_bins).astype(np.int64) - 1, 0, num_bins - 1)
    counts = np.bincount(idx, minlength=num_bins)
    return counts, np.linspace(0.0, 1.0, num_bins + 1)
