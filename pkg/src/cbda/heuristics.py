"""Pixel scoring heuristics.

Every heuristic maps class probabilities (or pseudo labels) of shape
``(..., H, W, C)`` to non-negative scores of shape ``(..., H, W)``; leading
batch dimensions are allowed so a whole dataset can be scored at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .errors import ClassIndexError, ConfigError

HEURISTICS = ("entropy", "margin", "region-impurity", "random")


@dataclass(frozen=True)
class ProbabilityMap:
    image_id: Hashable
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        validate_probabilities(probs)
        object.__setattr__(self, "probs", probs)


def validate_probabilities(probs: np.ndarray, atol: float = 1e-6) -> None:
    if probs.ndim < 3:
        raise ValueError("probabilities need shape (..., H, W, C)")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and >= 0")
    if not np.allclose(probs.sum(axis=-1), 1.0, rtol=0, atol=atol):
        raise ValueError("per-pixel probabilities must sum to 1")


def _probs(p) -> np.ndarray:
    return p.probs if isinstance(p, ProbabilityMap) else np.asarray(p, dtype=np.float64)


def pseudo_label(probs) -> np.ndarray:
    """Per-pixel argmax; ties go to the lowest class id."""
    return np.argmax(_probs(probs), axis=-1)


def score_entropy(probs) -> np.ndarray:
    """Shannon entropy in nats with 0 ln 0 = 0."""
    p = _probs(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    # -0.0 and rounding noise must not produce negative scores
    return np.maximum(-terms.sum(axis=-1), 0.0)


def score_margin(probs) -> np.ndarray:
    """``1 - (p_top1 - p_top2)``; 0 for confident pixels, 1 for a tie."""
    p = _probs(probs)
    if p.shape[-1] < 2:
        raise ClassIndexError("margin scoring needs at least two classes")
    top2 = np.partition(p, p.shape[-1] - 2, axis=-1)[..., -2:]
    return np.clip(1.0 - (top2[..., 1] - top2[..., 0]), 0.0, 1.0)


def score_region_impurity(pseudo, radius: int = 1, num_classes: int | None = None) -> np.ndarray:
    """Entropy of the class histogram in the (2r+1)^2 window around each pixel.

    A stand-in neighbourhood-diversity score.  Windows are clipped at the
    image border and their histograms renormalised over the pixels inside.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    labels = np.asarray(pseudo)
    if labels.ndim < 2:
        raise ValueError("pseudo labels need shape (..., H, W)")
    C = int(labels.max()) + 1 if num_classes is None else num_classes
    inside = _window_sums(np.ones(labels.shape, dtype=np.int64), radius)
    entropy = np.zeros(labels.shape)
    for c in range(C):
        counts = _window_sums((labels == c).astype(np.int64), radius)
        frac = counts / inside
        with np.errstate(divide="ignore", invalid="ignore"):
            entropy -= np.where(counts > 0, frac * np.log(frac), 0.0)
    return np.maximum(entropy, 0.0)


def _window_sums(x: np.ndarray, r: int) -> np.ndarray:
    """Exact integer sums over clipped (2r+1)^2 windows on the last two axes."""
    H, W = x.shape[-2:]
    pad = [(0, 0)] * (x.ndim - 2) + [(1, 0), (1, 0)]
    integral = np.pad(x.cumsum(-2).cumsum(-1), pad)
    lo_r = np.clip(np.arange(H) - r, 0, H)
    hi_r = np.clip(np.arange(H) + r + 1, 0, H)
    lo_c = np.clip(np.arange(W) - r, 0, W)
    hi_c = np.clip(np.arange(W) + r + 1, 0, W)
    return (
        integral[..., hi_r[:, None], hi_c[None, :]]
        - integral[..., lo_r[:, None], hi_c[None, :]]
        - integral[..., hi_r[:, None], lo_c[None, :]]
        + integral[..., lo_r[:, None], lo_c[None, :]]
    )


def score_random(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.random(shape)


def compute_scores(name: str, probs, *, rng: np.random.Generator | None = None, radius: int = 1,
                   pseudo: np.ndarray | None = None) -> np.ndarray:
    """Dispatch a heuristic by name."""
    p = _probs(probs)
    if name == "entropy":
        return score_entropy(p)
    if name == "margin":
        return score_margin(p)
    if name == "region-impurity":
        labels = pseudo_label(p) if pseudo is None else pseudo
        return score_region_impurity(labels, radius, num_classes=p.shape[-1])
    if name == "random":
        if rng is None:
            raise ValueError("the random heuristic needs a seeded generator")
        return score_random(p.shape[:-1], rng)
    raise ConfigError(f"unknown heuristic {name!r}; valid: {', '.join(HEURISTICS)}", "heuristic")
