"""Domain types and the class budget / class weight arithmetic.

The three formulas used by class-balanced acquisition live here:

* the ideal cumulative budget of a class after AL iteration ``i``
  (total pixels x budget fraction x goal share x i / N),
* the class weight ``max(1 - L_c / B_c, eps)``,
* the weighted score ``score * weight[pseudo_class]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

from .errors import (
    ClassIndexError,
    ConsistencyError,
    DuplicateSelectionError,
    ScheduleError,
    ShapeError,
)

DEFAULT_EPSILON = 1e-6

COUNT_MODES = ("ground_truth", "pseudo")


@dataclass(frozen=True)
class DatasetShape:
    num_images: int
    height: int
    width: int
    num_classes: int

    def __post_init__(self):
        for name in ("num_images", "height", "width", "num_classes"):
            value = getattr(self, name)
            if int(value) != value or value <= 0:
                raise ShapeError(f"{name} must be a positive integer, got {value!r}")
        if self.total_pixels > 2**53:
            raise ShapeError("total pixel count exceeds 2**53")

    @property
    def pixels_per_image(self) -> int:
        return self.height * self.width

    @property
    def total_pixels(self) -> int:
        # python ints, no overflow
        return int(self.num_images) * int(self.height) * int(self.width)


@dataclass(frozen=True)
class BudgetSchedule:
    """Total AL budget split over ``num_al_iterations`` rounds.

    ``goal_distribution`` defaults to uniform over ``num_classes`` when left
    as ``None``; pass ``num_classes`` in that case.
    """

    budget_fraction: float
    num_al_iterations: int
    goal_distribution: tuple[float, ...] | None = None
    epsilon: float = DEFAULT_EPSILON
    num_classes: int | None = None

    def __post_init__(self):
        if not (0.0 < self.budget_fraction <= 1.0):
            raise ScheduleError(f"budget_fraction must be in (0, 1], got {self.budget_fraction}")
        if int(self.num_al_iterations) != self.num_al_iterations or self.num_al_iterations < 1:
            raise ScheduleError(f"num_al_iterations must be >= 1, got {self.num_al_iterations}")
        if not (0.0 < self.epsilon < 1.0):
            raise ScheduleError(f"epsilon must be in (0, 1), got {self.epsilon}")
        goal = self.goal_distribution
        if goal is None:
            if self.num_classes is None:
                raise ScheduleError("either goal_distribution or num_classes is required")
            goal = (1.0 / self.num_classes,) * self.num_classes
        goal = tuple(float(g) for g in goal)
        if len(goal) == 0 or any(g < 0 or not math.isfinite(g) for g in goal):
            raise ScheduleError("goal_distribution entries must be finite and >= 0")
        if abs(math.fsum(goal) - 1.0) > 1e-9:
            raise ScheduleError(f"goal_distribution must sum to 1, sums to {math.fsum(goal)!r}")
        if self.num_classes is not None and len(goal) != self.num_classes:
            raise ScheduleError("goal_distribution length does not match num_classes")
        object.__setattr__(self, "goal_distribution", goal)
        object.__setattr__(self, "num_classes", len(goal))

    def check_iteration(self, iteration: int) -> None:
        if int(iteration) != iteration or not (1 <= iteration <= self.num_al_iterations):
            raise ScheduleError(
                f"iteration must be in 1..{self.num_al_iterations}, got {iteration!r}"
            )

    def cumulative_target(self, shape: DatasetShape, iteration: int) -> int:
        """floor(total_pixels * budget_fraction * i / N), evaluated exactly."""
        self.check_iteration(iteration)
        frac = Fraction(repr(float(self.budget_fraction)))
        return math.floor(shape.total_pixels * frac * iteration / self.num_al_iterations)


@dataclass(frozen=True)
class ScoreMatrix:
    image_id: Hashable
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ShapeError(f"scores must be 2-D, got shape {scores.shape}")
        if not np.all(np.isfinite(scores)):
            raise ValueError(f"image {self.image_id!r}: scores must be finite")
        if np.any(scores < 0):
            raise ValueError(f"image {self.image_id!r}: scores must be non-negative")
        object.__setattr__(self, "scores", scores)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape


@dataclass(frozen=True)
class PseudoLabelMap:
    image_id: Hashable
    labels: np.ndarray
    num_classes: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ShapeError(f"labels must be 2-D, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ClassIndexError("labels must be integer class ids")
        if labels.size and labels.min() < 0:
            raise ClassIndexError("labels must be >= 0")
        if self.num_classes is not None and labels.size and labels.max() >= self.num_classes:
            raise ClassIndexError(f"labels must be < {self.num_classes}")
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


# ---------------------------------------------------------------------------
# Budget and weight arithmetic


def class_budget(shape: DatasetShape, sched: BudgetSchedule, iteration: int, class_id: int) -> float:
    """Ideal cumulative number of labels for ``class_id`` after ``iteration``.

    Returned as a float (not truncated) because it is used as a divisor.
    """
    sched.check_iteration(iteration)
    if int(class_id) != class_id or not (0 <= class_id < sched.num_classes):
        raise ClassIndexError(f"class_id must be in 0..{sched.num_classes - 1}, got {class_id!r}")
    return (
        shape.total_pixels
        * sched.budget_fraction
        * sched.goal_distribution[class_id]
        * iteration
        / sched.num_al_iterations
    )


def class_budgets(shape: DatasetShape, sched: BudgetSchedule, iteration: int) -> np.ndarray:
    return np.array([class_budget(shape, sched, iteration, c) for c in range(sched.num_classes)])


def class_weight(count, budget, epsilon: float = DEFAULT_EPSILON):
    """``max(1 - count / budget, epsilon)``; a zero budget yields ``epsilon``.

    Works elementwise on arrays; scalar inputs give a python float.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    count_arr = np.asarray(count, dtype=np.float64)
    budget_arr = np.asarray(budget, dtype=np.float64)
    if np.any(budget_arr < 0) or np.any(count_arr < 0):
        raise ValueError("count and budget must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = 1.0 - count_arr / budget_arr
    weight = np.where(budget_arr > 0, np.maximum(raw, epsilon), epsilon)
    if weight.ndim == 0:
        return float(weight)
    return weight


def apply_weights(scores, pseudo, weights: Sequence[float]):
    """Multiply each score by the weight of its pseudo class.

    Accepts ``ScoreMatrix``/``PseudoLabelMap`` pairs (returns a ``ScoreMatrix``)
    or plain arrays of equal shape (returns an array).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or np.any(w <= 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a 1-D sequence of values in (0, 1]")
    if isinstance(scores, ScoreMatrix):
        labels = pseudo.labels if isinstance(pseudo, PseudoLabelMap) else np.asarray(pseudo)
        if isinstance(pseudo, PseudoLabelMap) and pseudo.image_id != scores.image_id:
            raise ShapeError(f"image ids differ: {scores.image_id!r} vs {pseudo.image_id!r}")
        return ScoreMatrix(scores.image_id, _weighted(scores.scores, labels, w))
    return _weighted(np.asarray(scores, dtype=np.float64), np.asarray(pseudo), w)


def _weighted(scores: np.ndarray, labels: np.ndarray, w: np.ndarray) -> np.ndarray:
    if scores.shape != labels.shape:
        raise ShapeError(f"score shape {scores.shape} != pseudo label shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= len(w)):
        raise ClassIndexError(f"pseudo labels must be in 0..{len(w) - 1}")
    return scores * w[labels]


# ---------------------------------------------------------------------------
# Active label store and statistics


_RECORD_DTYPE = np.dtype(
    [
        ("image_index", np.int64),
        ("row", np.int64),
        ("col", np.int64),
        ("true_class", np.int64),
        ("al_iteration", np.int64),
        ("pseudo_class", np.int64),
    ]
)


class ActiveLabelStore:
    """Sparse, append-only record of labelled pixels.

    A dense boolean mask per image gives O(1) membership tests; records are
    kept in append order and sorted on demand.
    """

    record_dtype = _RECORD_DTYPE

    def __init__(self, num_images: int, height: int, width: int, num_classes: int):
        self.shape = DatasetShape(num_images, height, width, num_classes)
        self._mask = np.zeros((num_images, height, width), dtype=bool)
        self._chunks: list[np.ndarray] = []
        self._size = 0
        self._per_image = np.zeros(num_images, dtype=np.int64)

    @classmethod
    def for_shape(cls, shape: DatasetShape) -> "ActiveLabelStore":
        return cls(shape.num_images, shape.height, shape.width, shape.num_classes)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, item) -> bool:
        image_index, row, col = item
        return bool(self._mask[image_index, row, col])

    def mask(self, image_index: int) -> np.ndarray:
        view = self._mask[image_index]
        view = view.view()
        view.flags.writeable = False
        return view

    @property
    def masks(self) -> np.ndarray:
        view = self._mask.view()
        view.flags.writeable = False
        return view

    def per_image_counts(self) -> np.ndarray:
        return self._per_image.copy()

    def image_count(self, image_index: int) -> int:
        return int(self._per_image[image_index])

    def add(self, image_index, rows, cols, true_classes, al_iteration: int = 0, pseudo_classes=None) -> None:
        """Append pixels; rejects anything already present or repeated in the batch."""
        image_index = np.atleast_1d(np.asarray(image_index, dtype=np.int64))
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        true_classes = np.atleast_1d(np.asarray(true_classes, dtype=np.int64))
        n = len(rows)
        if len(image_index) == 1 and n != 1:
            image_index = np.full(n, image_index[0])
        if pseudo_classes is None:
            pseudo_classes = np.full(n, -1, dtype=np.int64)
        pseudo_classes = np.atleast_1d(np.asarray(pseudo_classes, dtype=np.int64))
        al_iteration = np.broadcast_to(np.asarray(al_iteration, dtype=np.int64), (n,))
        if not (len(image_index) == len(rows) == len(cols) == len(true_classes) == len(pseudo_classes) == n):
            raise ShapeError("record field lengths differ")
        if n == 0:
            return
        s = self.shape
        if (
            image_index.min() < 0 or image_index.max() >= s.num_images
            or rows.min() < 0 or rows.max() >= s.height
            or cols.min() < 0 or cols.max() >= s.width
        ):
            raise ShapeError("pixel coordinates out of bounds")
        if true_classes.min() < 0 or true_classes.max() >= s.num_classes:
            raise ClassIndexError("true_class out of range")
        if pseudo_classes.max() >= s.num_classes:
            raise ClassIndexError("pseudo_class out of range")
        if self._mask[image_index, rows, cols].any():
            raise DuplicateSelectionError("pixel already present in the active label")
        flat = (image_index * s.height + rows) * s.width + cols
        if len(np.unique(flat)) != n:
            raise DuplicateSelectionError("duplicate pixels within one batch")

        rec = np.empty(n, dtype=_RECORD_DTYPE)
        rec["image_index"] = image_index
        rec["row"] = rows
        rec["col"] = cols
        rec["true_class"] = true_classes
        rec["al_iteration"] = al_iteration
        rec["pseudo_class"] = pseudo_classes
        self._mask[image_index, rows, cols] = True
        self._per_image += np.bincount(image_index, minlength=s.num_images)
        self._chunks.append(rec)
        self._size += n

    def records(self) -> np.ndarray:
        """All records sorted by (image_index, row, col)."""
        if not self._chunks:
            return np.empty(0, dtype=_RECORD_DTYPE)
        if len(self._chunks) > 1:
            self._chunks = [np.concatenate(self._chunks)]
        rec = self._chunks[0]
        order = np.lexsort((rec["col"], rec["row"], rec["image_index"]))
        return rec[order]

    def class_counts(self, mode: str = "ground_truth") -> np.ndarray:
        if mode not in COUNT_MODES:
            raise ValueError(f"count mode must be one of {COUNT_MODES}, got {mode!r}")
        column = "true_class" if mode == "ground_truth" else "pseudo_class"
        C = self.shape.num_classes
        if not self._chunks:
            return np.zeros(C, dtype=np.int64)
        values = np.concatenate([c[column] for c in self._chunks])
        if mode == "pseudo" and values.size and values.min() < 0:
            raise ConsistencyError("store holds records without pseudo classes")
        return np.bincount(values, minlength=C).astype(np.int64)

    def copy(self) -> "ActiveLabelStore":
        other = ActiveLabelStore.for_shape(self.shape)
        other._mask = self._mask.copy()
        other._chunks = [c.copy() for c in self._chunks]
        other._size = self._size
        other._per_image = self._per_image.copy()
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActiveLabelStore):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.records(), other.records())

    def __repr__(self) -> str:
        s = self.shape
        return (
            f"ActiveLabelStore({s.num_images}x{s.height}x{s.width}, C={s.num_classes}, "
            f"{self._size} pixels)"
        )


@dataclass
class ClassStats:
    """Cumulative per-class label counts after ``iteration_index`` AL rounds."""

    cumulative_counts: np.ndarray
    iteration_index: int = 0
    count_mode: str = "ground_truth"
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.cumulative_counts = np.asarray(self.cumulative_counts, dtype=np.int64)
        if np.any(self.cumulative_counts < 0):
            raise ValueError("counts must be non-negative")
        if self.count_mode not in COUNT_MODES:
            raise ValueError(f"count mode must be one of {COUNT_MODES}")

    @classmethod
    def empty(cls, num_classes: int, count_mode: str = "ground_truth") -> "ClassStats":
        return cls(np.zeros(num_classes, dtype=np.int64), 0, count_mode)

    @classmethod
    def from_store(cls, store: ActiveLabelStore, iteration_index: int = 0, count_mode: str = "ground_truth") -> "ClassStats":
        return cls(store.class_counts(count_mode), iteration_index, count_mode)

    @property
    def total(self) -> int:
        return int(self.cumulative_counts.sum())

    def weights(self, shape: DatasetShape, sched: BudgetSchedule, iteration: int) -> np.ndarray:
        """Per-class weights for the upcoming ``iteration``."""
        return class_weight(self.cumulative_counts, class_budgets(shape, sched, iteration), sched.epsilon)

    def update(self, new_counts, iteration: int) -> None:
        new_counts = np.asarray(new_counts, dtype=np.int64)
        if new_counts.shape != self.cumulative_counts.shape or np.any(new_counts < 0):
            raise ValueError("increments must be non-negative and length C")
        if iteration < self.iteration_index:
            raise ScheduleError("iteration index cannot go backwards")
        self.history.append(self.cumulative_counts.copy())
        self.cumulative_counts = self.cumulative_counts + new_counts
        self.iteration_index = iteration

    def check_against(self, store: ActiveLabelStore) -> None:
        actual = store.class_counts(self.count_mode)
        if not np.array_equal(actual, self.cumulative_counts):
            raise ConsistencyError(
                f"class stats {self.cumulative_counts.tolist()} do not match store {actual.tolist()}"
            )
