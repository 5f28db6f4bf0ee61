import numpy as np
import pytest

from cbda import ActiveLabelStore, ScoreStack


def brute_force_dynamic(scores, budget, masks=None):
    """Full sort of every eligible pixel by (-score, image, row, col)."""
    n, h, w = scores.shape
    items = []
    for i in range(n):
        for r in range(h):
            for c in range(w):
                if masks is not None and masks[i, r, c]:
                    continue
                items.append((-float(scores[i, r, c]), i, r, c))
    items.sort()
    return {(i, r, c) for _, i, r, c in items[:budget]}


def brute_force_region(scores, per_image, masks=None):
    picked = set()
    for i in range(scores.shape[0]):
        sub = scores[i : i + 1]
        m = None if masks is None else masks[i : i + 1]
        picked |= {(i, r, c) for _, r, c in brute_force_dynamic(sub, per_image, m)}
    return picked


def random_instance(rng, n=10, h=32, w=32, C=8, ties=True):
    if ties:
        # coarse grid of values forces many exact ties
        scores = rng.integers(0, 20, size=(n, h, w)).astype(np.float64) / 4
    else:
        scores = rng.random((n, h, w))
    pseudo = rng.integers(0, C, size=(n, h, w))
    gt = rng.integers(0, C, size=(n, h, w))
    return scores, pseudo, gt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance(rng):
    scores, pseudo, gt = random_instance(rng, n=4, h=6, w=5, C=3)
    stack = ScoreStack.from_arrays(scores, pseudo, num_classes=3)
    store = ActiveLabelStore(4, 6, 5, 3)
    return scores, pseudo, gt, stack, store
