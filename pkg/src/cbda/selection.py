"""Pixel acquisition: image-wise, per-image (RA), global (DA) and class-balanced.

All pixel selections use one total order: higher score first, ties broken by
ascending ``(image_index, row, col)``.  The global top-k never builds the
stacked score tensor; images are streamed through a bounded candidate buffer
whose k-th best score prunes later images.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import (
    ActiveLabelStore,
    BudgetSchedule,
    ClassStats,
    DatasetShape,
    PseudoLabelMap,
    ScoreMatrix,
)
from .errors import BudgetError, ClassIndexError, ShapeError

STRATEGIES = ("RA", "DA")

_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class PixelRef:
    image_index: int
    row: int
    col: int


@dataclass
class SelectionResult:
    """Pixels picked by one acquisition call, in rank order."""

    image_index: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    requested: int
    per_image_counts: np.ndarray
    true_classes: np.ndarray | None = None
    pseudo_classes: np.ndarray | None = None
    weights: np.ndarray | None = None
    selected_images: tuple[int, ...] | None = None

    @property
    def picked(self) -> list[PixelRef]:
        return [
            PixelRef(int(i), int(r), int(c))
            for i, r, c in zip(self.image_index, self.rows, self.cols)
        ]

    @property
    def iteration_budget_used(self) -> int:
        return int(len(self.image_index))

    @property
    def shortfall(self) -> int:
        return max(0, self.requested - self.iteration_budget_used)

    def as_set(self) -> set[tuple[int, int, int]]:
        return set(zip(self.image_index.tolist(), self.rows.tolist(), self.cols.tolist()))

    def __len__(self) -> int:
        return self.iteration_budget_used


class ScoreStack:
    """Ordered per-image score matrices (and pseudo labels) of the target set.

    ``weights`` is an optional per-class multiplier applied lazily when an
    image's scores are read, so weighting never copies the whole stack.
    """

    def __init__(self, scores: Sequence, pseudo: Sequence | None = None, weights=None, num_classes: int | None = None):
        mats = [s if isinstance(s, ScoreMatrix) else ScoreMatrix(i, s) for i, s in enumerate(scores)]
        if not mats:
            raise ShapeError("a score stack needs at least one image")
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise ShapeError("all score matrices must share H x W")
        ids = [m.image_id for m in mats]
        if len(set(ids)) != len(ids):
            raise ShapeError("image ids must be unique")
        labels = None
        if pseudo is not None:
            labels = [
                p if isinstance(p, PseudoLabelMap) else PseudoLabelMap(ids[i], p, num_classes)
                for i, p in enumerate(pseudo)
            ]
            if len(labels) != len(mats):
                raise ShapeError("pseudo label count differs from score matrix count")
            for m, p in zip(mats, labels):
                if p.shape != shape:
                    raise ShapeError(f"image {m.image_id!r}: pseudo label shape differs")
                if p.image_id != m.image_id:
                    raise ShapeError(f"image ids differ: {m.image_id!r} vs {p.image_id!r}")
        self._scores = mats
        self._pseudo = labels
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights is not None:
            if labels is None:
                raise ShapeError("class weights need pseudo labels")
            top = max(int(p.labels.max()) for p in labels)
            if top >= len(self.weights):
                raise ClassIndexError("pseudo label exceeds number of class weights")

    @classmethod
    def from_arrays(cls, scores: np.ndarray, pseudo: np.ndarray | None = None, num_classes: int | None = None) -> "ScoreStack":
        scores = np.asarray(scores)
        if scores.ndim != 3:
            raise ShapeError("expected an N x H x W score array")
        return cls(list(scores), None if pseudo is None else list(np.asarray(pseudo)), num_classes=num_classes)

    def __len__(self) -> int:
        return len(self._scores)

    @property
    def height(self) -> int:
        return self._scores[0].shape[0]

    @property
    def width(self) -> int:
        return self._scores[0].shape[1]

    @property
    def pixels_per_image(self) -> int:
        return self.height * self.width

    @property
    def image_ids(self) -> list:
        return [m.image_id for m in self._scores]

    @property
    def has_pseudo(self) -> bool:
        return self._pseudo is not None

    def image_scores(self, index: int) -> np.ndarray:
        raw = self._scores[index].scores
        if self.weights is None:
            return raw
        return raw * self.weights[self._pseudo[index].labels]

    def pseudo_labels(self, index: int) -> np.ndarray:
        if self._pseudo is None:
            raise ShapeError("this stack carries no pseudo labels")
        return self._pseudo[index].labels

    def weighted(self, weights) -> "ScoreStack":
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(w <= 0) or np.any(w > 1):
            raise ValueError("weights must lie in (0, 1]")
        out = ScoreStack.__new__(ScoreStack)
        out._scores = self._scores
        out._pseudo = self._pseudo
        if self._pseudo is None:
            raise ShapeError("class weights need pseudo labels")
        out.weights = w if self.weights is None else self.weights * w
        return out


# ---------------------------------------------------------------------------
# exact top-k under (score desc, key asc)


def topk_order(scores: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` best entries, ranked by (score desc, key asc).

    Exact: entries tied with the k-th score are admitted by ascending key.
    """
    n = len(scores)
    if k <= 0 or n == 0:
        return _EMPTY_I
    if k < n:
        thr = np.partition(scores, n - k)[n - k]
        above = np.flatnonzero(scores > thr)
        tied = np.flatnonzero(scores == thr)
        need = k - len(above)
        if need < len(tied):
            tied = tied[np.argpartition(keys[tied], need - 1)[:need]] if need > 0 else tied[:0]
        sel = np.concatenate([above, tied])
    else:
        sel = np.arange(n)
    return sel[np.lexsort((keys[sel], -scores[sel]))]


def _eligible_flat(store: ActiveLabelStore | None, index: int) -> np.ndarray | None:
    if store is None or store.image_count(index) == 0:
        return None
    return np.flatnonzero(~store.mask(index).ravel())


def _image_topk(stack: ScoreStack, store, index: int, k: int, threshold: float | None = None):
    """Exact top-k eligible pixels of one image as (scores, global keys)."""
    s = stack.image_scores(index).ravel()
    flat = _eligible_flat(store, index)
    if flat is not None:
        s = s[flat]
    if threshold is not None:
        keep = np.flatnonzero(s > threshold)
        s = s[keep]
        flat = keep if flat is None else flat[keep]
    if flat is None:
        flat = np.arange(len(s), dtype=np.int64)
    if len(s) > k:
        order = topk_order(s, flat, k)
        s, flat = s[order], flat[order]
    return s, flat + index * stack.pixels_per_image


def _chunks(n: int, size: int) -> Iterator[range]:
    for start in range(0, n, size):
        yield range(start, min(n, start + size))


def _global_topk(stack: ScoreStack, k: int, store, workers: int = 1):
    """Global (score, key) top-k over all images with a bounded buffer."""
    kept_s, kept_k = _EMPTY_F, _EMPTY_I
    pending_s: list[np.ndarray] = []
    pending_k: list[np.ndarray] = []
    pending_n = 0
    threshold = None

    def reduce():
        nonlocal kept_s, kept_k, pending_s, pending_k, pending_n, threshold
        all_s = np.concatenate([kept_s, *pending_s])
        all_k = np.concatenate([kept_k, *pending_k])
        order = topk_order(all_s, all_k, k)
        kept_s, kept_k = all_s[order], all_k[order]
        pending_s, pending_k, pending_n = [], [], 0
        if len(kept_s) == k:
            # later images have larger keys, so a tie with the k-th score loses
            threshold = kept_s[-1]

    def absorb(s, keys):
        nonlocal pending_n
        if len(s):
            pending_s.append(s)
            pending_k.append(keys)
            pending_n += len(s)
        if pending_n >= k:
            reduce()

    if k <= 0:
        return kept_s, kept_k
    if workers <= 1:
        for i in range(len(stack)):
            absorb(*_image_topk(stack, store, i, k, threshold))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for window in _chunks(len(stack), 4 * workers):
                # a threshold from an earlier window is looser than the current one, so still exact
                thr = threshold
                for s, keys in pool.map(lambda i: _image_topk(stack, store, i, k, thr), window):
                    absorb(s, keys)
    if pending_n:
        reduce()
    return kept_s, kept_k


def _result_from_keys(stack: ScoreStack, keys: np.ndarray, requested: int) -> SelectionResult:
    hw, w = stack.pixels_per_image, stack.width
    img = keys // hw
    rem = keys % hw
    return SelectionResult(
        image_index=img.astype(np.int64),
        rows=(rem // w).astype(np.int64),
        cols=(rem % w).astype(np.int64),
        requested=int(requested),
        per_image_counts=np.bincount(img, minlength=len(stack)).astype(np.int64),
    )


def _commit(result: SelectionResult, stack: ScoreStack, store: ActiveLabelStore, ground_truth, al_iteration: int) -> None:
    gt = np.asarray(getattr(ground_truth, "maps", ground_truth))
    if gt.shape != (len(stack), stack.height, stack.width):
        raise ShapeError(f"ground truth shape {gt.shape} does not match the score stack")
    true = gt[result.image_index, result.rows, result.cols].astype(np.int64)
    pseudo = None
    if stack.has_pseudo:
        pseudo = np.empty(len(result), dtype=np.int64)
        for i in np.unique(result.image_index):
            sel = result.image_index == i
            pseudo[sel] = stack.pseudo_labels(int(i))[result.rows[sel], result.cols[sel]]
    store.add(result.image_index, result.rows, result.cols, true, al_iteration, pseudo)
    result.true_classes = true
    result.pseudo_classes = pseudo


def _check_store(stack: ScoreStack, store: ActiveLabelStore | None) -> None:
    if store is None:
        return
    s = store.shape
    if (s.num_images, s.height, s.width) != (len(stack), stack.height, stack.width):
        raise ShapeError("active label store does not match the score stack")


# ---------------------------------------------------------------------------
# acquisition procedures


def iteration_budget(shape: DatasetShape, sched: BudgetSchedule, iteration: int, already_selected: int) -> int:
    """Pixels to pick now so the cumulative total tracks the linear schedule."""
    return max(0, sched.cumulative_target(shape, iteration) - int(already_selected))


def select_image_wise(stack: ScoreStack, budget_images: int, store: ActiveLabelStore | None,
                      ground_truth=None, *, al_iteration: int = 0) -> SelectionResult:
    """Label whole images ranked by mean score (ties: lower index first).

    Only images that still have an unlabelled pixel compete; their remaining
    pixels are all labelled.
    """
    _check_store(stack, store)
    if budget_images < 0:
        raise BudgetError("budget_images must be >= 0")
    hw = stack.pixels_per_image
    counts = np.zeros(len(stack), dtype=np.int64) if store is None else store.per_image_counts()
    candidates = np.flatnonzero(counts < hw)
    if budget_images > len(candidates):
        raise BudgetError(
            f"requested {budget_images} images but only {len(candidates)} are not fully labelled"
        )
    means = np.array([stack.image_scores(int(i)).mean() for i in candidates])
    chosen = candidates[np.lexsort((candidates, -means))[:budget_images]]
    keys = [
        i * hw + (np.arange(hw) if store is None else np.flatnonzero(~store.mask(int(i)).ravel()))
        for i in chosen
    ]
    keys = np.concatenate(keys).astype(np.int64) if keys else _EMPTY_I
    result = _result_from_keys(stack, keys, requested=len(keys))
    result.selected_images = tuple(int(i) for i in chosen)
    if ground_truth is not None and store is not None:
        _commit(result, stack, store, ground_truth, al_iteration)
    return result


def select_region(stack: ScoreStack, per_image_budget: int, store: ActiveLabelStore | None,
                  ground_truth=None, *, al_iteration: int = 0, workers: int = 1) -> SelectionResult:
    """Pick the top ``per_image_budget`` eligible pixels of every image."""
    _check_store(stack, store)
    if per_image_budget < 0:
        raise BudgetError("per_image_budget must be >= 0")
    k = int(per_image_budget)
    if k == 0:
        keys = _EMPTY_I
    else:
        def one(i):
            s, keys = _image_topk(stack, store, i, k)
            return keys[np.lexsort((keys, -s))]
        if workers <= 1:
            parts = [one(i) for i in range(len(stack))]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(one, range(len(stack))))
        keys = np.concatenate(parts)
    result = _result_from_keys(stack, keys, requested=k * len(stack))
    if ground_truth is not None and store is not None:
        _commit(result, stack, store, ground_truth, al_iteration)
    return result


def select_dynamic(stack: ScoreStack, budget: int, store: ActiveLabelStore | None,
                   ground_truth=None, *, al_iteration: int = 0, workers: int = 1) -> SelectionResult:
    """Pick the globally best ``budget`` eligible pixels across all images."""
    _check_store(stack, store)
    if budget < 0:
        raise BudgetError("budget must be >= 0")
    _, keys = _global_topk(stack, int(budget), store, workers)
    result = _result_from_keys(stack, keys, requested=int(budget))
    if ground_truth is not None and store is not None:
        _commit(result, stack, store, ground_truth, al_iteration)
    return result


def run_cbda_iteration(stack: ScoreStack, shape: DatasetShape, sched: BudgetSchedule, iteration: int,
                       stats: ClassStats, store: ActiveLabelStore, ground_truth, strategy: str = "DA",
                       *, weight_override=None, workers: int = 1) -> SelectionResult:
    """One class-balanced AL round.

    Recounts the store (must agree with ``stats``), derives class weights
    from the budgets of this iteration, weights the scores by pseudo class and
    selects with the dynamic (``"DA"``) or per-image (``"RA"``) strategy.
    The picks are appended to ``store`` and ``stats`` is updated in place.
    """
    strategy = strategy.upper()
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    sched.check_iteration(iteration)
    stats.check_against(store)

    if weight_override is None:
        weights = stats.weights(shape, sched, iteration)
    else:
        weights = np.broadcast_to(np.asarray(weight_override, dtype=np.float64), (shape.num_classes,)).copy()
    weighted = stack.weighted(weights)

    budget = iteration_budget(shape, sched, iteration, len(store))
    if strategy == "DA":
        result = select_dynamic(weighted, budget, store, ground_truth, al_iteration=iteration, workers=workers)
    else:
        result = select_region(weighted, budget // len(stack), store, ground_truth,
                               al_iteration=iteration, workers=workers)
        result.requested = budget

    picked_classes = result.true_classes if stats.count_mode == "ground_truth" else result.pseudo_classes
    stats.update(np.bincount(picked_classes, minlength=shape.num_classes), iteration)
    result.weights = weights
    return result
