"""Synthetic imbalanced segmentation scenarios and the multi-round AL loop.

A trained segmenter is replaced by a surrogate: at AL round ``i`` each pixel's
class probabilities are ``(1 - lam_i) * onehot(true class) + lam_i * d`` with
``d`` drawn uniformly from the simplex.  Lower ``lam`` stands in for a better
converged model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ActiveLabelStore, BudgetSchedule, ClassStats, DatasetShape
from .errors import ConfigError
from .heuristics import HEURISTICS, compute_scores, pseudo_label
from .metrics import ClassDistribution, imbalance_score, selection_histogram
from .selection import (
    ScoreStack,
    SelectionResult,
    iteration_budget,
    run_cbda_iteration,
    select_dynamic,
    select_image_wise,
    select_region,
)

LOOP_STRATEGIES = ("IMAGE", "RA", "DA", "CBRA", "CBDA")

# seed stream ids, kept stable so reports stay reproducible
_STREAM_GT = 0
_STREAM_PROBS = 1
_STREAM_RANDOM = 2


def default_noise_schedule(num_iterations: int, start: float = 0.8, stop: float = 0.4) -> tuple[float, ...]:
    if num_iterations == 1:
        return (start,)
    return tuple(round(float(x), 12) for x in np.linspace(start, stop, num_iterations))


@dataclass(frozen=True)
class ScenarioConfig:
    shape: DatasetShape
    class_frequencies: tuple[float, ...]
    spatial_granularity: int = 8
    noise_schedule: tuple[float, ...] = (0.8, 0.7, 0.6, 0.5, 0.4)
    seed: int = 0

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.class_frequencies)
        if len(freqs) != self.shape.num_classes:
            raise ConfigError("class_frequencies length must equal num_classes", "scenario.class_frequencies")
        if any(f < 0 or not math.isfinite(f) for f in freqs) or abs(math.fsum(freqs) - 1.0) > 1e-9:
            raise ConfigError("class_frequencies must be >= 0 and sum to 1", "scenario.class_frequencies")
        g = self.spatial_granularity
        if int(g) != g or g < 1:
            raise ConfigError("spatial_granularity must be a positive integer", "scenario.spatial_granularity")
        if g > min(self.shape.height, self.shape.width):
            raise ConfigError(
                f"spatial_granularity {g} exceeds min(H, W) = {min(self.shape.height, self.shape.width)}",
                "scenario.spatial_granularity",
            )
        noise = tuple(float(x) for x in self.noise_schedule)
        if not noise or any(not (0.0 <= x <= 1.0) for x in noise):
            raise ConfigError("noise_schedule entries must lie in [0, 1]", "scenario.noise_schedule")
        if any(b > a for a, b in zip(noise, noise[1:])):
            raise ConfigError("noise_schedule must be non-increasing", "scenario.noise_schedule")
        object.__setattr__(self, "class_frequencies", freqs)
        object.__setattr__(self, "noise_schedule", noise)

    @property
    def num_al_iterations(self) -> int:
        return len(self.noise_schedule)


@dataclass(frozen=True)
class GroundTruth:
    maps: np.ndarray  # (N, H, W) class ids

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.maps.shape

    def class_frequencies(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.maps.ravel(), minlength=num_classes) / self.maps.size


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *stream]))


def generate_ground_truth(cfg: ScenarioConfig) -> GroundTruth:
    """Tile each image with ``spatial_granularity`` squares of sampled classes."""
    s, g = cfg.shape, cfg.spatial_granularity
    tiles_r, tiles_c = -(-s.height // g), -(-s.width // g)
    rng = _rng(cfg.seed, _STREAM_GT)
    tiles = rng.choice(s.num_classes, size=(s.num_images, tiles_r, tiles_c), p=np.asarray(cfg.class_frequencies))
    maps = np.repeat(np.repeat(tiles, g, axis=1), g, axis=2)[:, : s.height, : s.width]
    dtype = np.uint8 if s.num_classes <= 256 else np.int32
    return GroundTruth(np.ascontiguousarray(maps, dtype=dtype))


def surrogate_probabilities(gt: GroundTruth, lam: float, seed, num_classes: int | None = None) -> np.ndarray:
    """Blend one-hot ground truth with uniform simplex noise; returns (N, H, W, C)."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    maps = gt.maps
    C = int(maps.max()) + 1 if num_classes is None else num_classes
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noise = rng.standard_exponential(size=maps.shape + (C,))
    noise /= noise.sum(axis=-1, keepdims=True)
    probs = noise
    probs *= lam
    onehot = (maps[..., None] == np.arange(C)).astype(np.float64)
    probs += (1.0 - lam) * onehot
    return probs


@dataclass
class IterationRecord:
    iteration: int
    noise_level: float
    budget_requested: int
    budget_used: int
    cumulative_selected: int
    cumulative_counts: list[int]
    weights: list[float] | None
    imbalance_score: float | None
    pseudo_accuracy: float
    histogram: list[int]
    per_image_counts: list[int] = field(repr=False, default_factory=list)


@dataclass
class LoopReport:
    strategy: str
    heuristic: str
    count_mode: str
    noise_schedule: tuple[float, ...]
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]


def run_loop(cfg: ScenarioConfig, sched: BudgetSchedule, strategy: str = "CBDA", heuristic: str = "entropy", *,
             count_mode: str = "ground_truth", pin_weights: bool = False, histogram_bins: int = 10,
             radius: int = 1, workers: int = 1, ground_truth: GroundTruth | None = None):
    """Run ``sched.num_al_iterations`` AL rounds; returns ``(report, store)``."""
    strategy = strategy.upper()
    if strategy not in LOOP_STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; valid: {', '.join(LOOP_STRATEGIES)}", "strategy")
    if heuristic not in HEURISTICS:
        raise ConfigError(f"unknown heuristic {heuristic!r}; valid: {', '.join(HEURISTICS)}", "heuristic")
    if sched.num_al_iterations != cfg.num_al_iterations:
        raise ConfigError("noise_schedule length must equal num_al_iterations", "scenario.noise_schedule")
    if sched.num_classes != cfg.shape.num_classes:
        raise ConfigError("goal distribution length must equal num_classes", "schedule.goal_distribution")

    shape = cfg.shape
    gt = ground_truth if ground_truth is not None else generate_ground_truth(cfg)
    store = ActiveLabelStore.for_shape(shape)
    stats = ClassStats.empty(shape.num_classes, count_mode)
    report = LoopReport(strategy, heuristic, count_mode, cfg.noise_schedule)

    for i in range(1, sched.num_al_iterations + 1):
        lam = cfg.noise_schedule[i - 1]
        probs = surrogate_probabilities(gt, lam, _rng(cfg.seed, _STREAM_PROBS, i), shape.num_classes)
        pseudo = pseudo_label(probs)
        scores = compute_scores(heuristic, probs, rng=_rng(cfg.seed, _STREAM_RANDOM, i), radius=radius, pseudo=pseudo)
        del probs
        stack = ScoreStack.from_arrays(scores, pseudo, num_classes=shape.num_classes)
        budget = iteration_budget(shape, sched, i, len(store))

        weights = None
        if strategy in ("CBRA", "CBDA"):
            result = run_cbda_iteration(
                stack, shape, sched, i, stats, store, gt, strategy[2:],
                weight_override=1.0 if pin_weights else None, workers=workers,
            )
            weights = result.weights
        else:
            result = _plain_iteration(strategy, stack, budget, store, gt, i, workers)
            picked = result.true_classes if count_mode == "ground_truth" else result.pseudo_classes
            stats.update(np.bincount(picked, minlength=shape.num_classes), i)

        counts = store.class_counts("ground_truth")
        score = imbalance_score(ClassDistribution.from_counts(counts)) if counts.sum() else None
        hist, _ = selection_histogram(store, shape, histogram_bins)
        report.iterations.append(IterationRecord(
            iteration=i,
            noise_level=lam,
            budget_requested=result.requested,
            budget_used=result.iteration_budget_used,
            cumulative_selected=len(store),
            cumulative_counts=counts.tolist(),
            weights=None if weights is None else [float(w) for w in weights],
            imbalance_score=score,
            pseudo_accuracy=float(np.mean(pseudo == gt.maps)),
            histogram=hist.tolist(),
            per_image_counts=result.per_image_counts.tolist(),
        ))
    return report, store


def _plain_iteration(strategy: str, stack: ScoreStack, budget: int, store: ActiveLabelStore, gt: GroundTruth,
                     iteration: int, workers: int) -> SelectionResult:
    if strategy == "DA":
        return select_dynamic(stack, budget, store, gt, al_iteration=iteration, workers=workers)
    if strategy == "RA":
        result = select_region(stack, budget // len(stack), store, gt, al_iteration=iteration, workers=workers)
        result.requested = budget
        return result
    # IMAGE: whole images, as many as fit in the pixel budget
    available = int(np.sum(store.per_image_counts() < stack.pixels_per_image))
    n_images = min(budget // stack.pixels_per_image, available)
    result = select_image_wise(stack, n_images, store, gt, al_iteration=iteration)
    result.requested = budget
    return result


def run_many(cfg: ScenarioConfig, sched: BudgetSchedule, strategies: Sequence[str], seeds: Sequence[int],
             heuristic: str = "entropy", **kwargs) -> dict[str, list]:
    """Paired runs: every strategy sees the same ground truth per seed."""
    from dataclasses import replace

    out: dict[str, list] = {s: [] for s in strategies}
    for seed in seeds:
        seeded = replace(cfg, seed=int(seed))
        gt = generate_ground_truth(seeded)
        for s in strategies:
            out[s].append(run_loop(seeded, sched, s, heuristic, ground_truth=gt, **kwargs))
    return out
