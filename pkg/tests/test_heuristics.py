import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cbda import ProbabilityMap, compute_scores, pseudo_label, score_entropy, score_margin, score_region_impurity
from cbda.errors import ClassIndexError, ConfigError


def px(*p):
    return np.array(p, dtype=np.float64).reshape(1, 1, -1)


class TestPseudoLabel:
    def test_one_hot(self):
        assert pseudo_label(px(0, 0, 1, 0))[0, 0] == 2

    def test_uniform_goes_to_zero(self):
        assert pseudo_label(np.full((3, 3, 4), 0.25)).max() == 0

    def test_argmax(self):
        assert pseudo_label(px(0.2, 0.5, 0.3))[0, 0] == 1

    @given(st.integers(0, 2**31))
    def test_invariant_under_monotone_rescaling(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(5), size=(4, 4))
        q = np.sqrt(p) * 3 + 1
        assert np.array_equal(pseudo_label(p), pseudo_label(q))


class TestEntropy:
    def test_one_hot(self):
        assert score_entropy(px(0, 1, 0, 0))[0, 0] == 0.0

    def test_uniform(self):
        assert score_entropy(np.full((1, 1, 4), 0.25))[0, 0] == pytest.approx(math.log(4), abs=1e-12)

    def test_half_half(self):
        assert score_entropy(px(0.5, 0.5, 0, 0))[0, 0] == pytest.approx(math.log(2), abs=1e-12)

    def test_accepts_probability_map(self):
        pm = ProbabilityMap("img", np.full((2, 3, 2), 0.5))
        assert score_entropy(pm).shape == (2, 3)


class TestMargin:
    def test_one_hot(self):
        assert score_margin(px(1, 0, 0))[0, 0] == 0.0

    def test_uniform(self):
        assert score_margin(np.full((1, 1, 3), 1 / 3))[0, 0] == pytest.approx(1.0)

    def test_example(self):
        assert score_margin(px(0.7, 0.2, 0.1))[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_needs_two_classes(self):
        with pytest.raises(ClassIndexError):
            score_margin(px(1.0))


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.integers(2, 8))
def test_permutation_equivariance(seed, C):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(C), size=(3, 5))
    perm = rng.permutation(C)
    np.testing.assert_allclose(score_entropy(p), score_entropy(p[..., perm]), atol=1e-12)
    np.testing.assert_allclose(score_margin(p), score_margin(p[..., perm]), atol=1e-12)


@settings(max_examples=50)
@given(arrays(np.float64, (3, 4, 3), elements=st.floats(0, 1)))
def test_scores_finite_non_negative(raw):
    raw = raw + 1e-9
    p = raw / raw.sum(axis=-1, keepdims=True)
    for s in (score_entropy(p), score_margin(p)):
        assert np.all(np.isfinite(s)) and np.all(s >= 0)


def hist_entropy(window):
    _, counts = np.unique(window, return_counts=True)
    f = counts / counts.sum()
    return float(-(f * np.log(f)).sum())


class TestRegionImpurity:
    def test_constant_image(self):
        assert np.all(score_region_impurity(np.full((6, 6), 3), radius=2) == 0)

    def test_half_and_half(self):
        labels = np.zeros((4, 6), int)
        labels[:, 3:] = 1
        s = score_region_impurity(labels[:, 1:5], radius=2)
        # at (1, 1) the clipped window covers rows 0..3, cols 0..3 -> 8 zeros, 8 ones
        assert s[1, 1] == pytest.approx(math.log(2), abs=1e-12)
        checker = score_region_impurity(np.array([[0, 1], [1, 0]]), radius=1)
        assert np.allclose(checker, math.log(2), atol=1e-12)

    def test_whole_image_radius(self, rng):
        labels = rng.integers(0, 4, (5, 7))
        s = score_region_impurity(labels, radius=10)
        assert np.all(s == s[0, 0])
        assert s[0, 0] == pytest.approx(hist_entropy(labels), abs=1e-12)

    @pytest.mark.parametrize("radius", [1, 2])
    def test_matches_window_oracle(self, rng, radius):
        labels = rng.integers(0, 3, (6, 5))
        s = score_region_impurity(labels, radius=radius)
        for r in range(6):
            for c in range(5):
                win = labels[max(r - radius, 0): r + radius + 1, max(c - radius, 0): c + radius + 1]
                assert s[r, c] == pytest.approx(hist_entropy(win), abs=1e-12)

    def test_batched(self, rng):
        labels = rng.integers(0, 3, (2, 6, 5))
        s = score_region_impurity(labels, radius=1)
        np.testing.assert_array_equal(s[1], score_region_impurity(labels[1], radius=1))

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            score_region_impurity(np.zeros((2, 2), int), radius=0)


class TestDispatch:
    def test_by_name(self, rng):
        p = rng.dirichlet(np.ones(3), size=(2, 4, 4))
        np.testing.assert_array_equal(compute_scores("entropy", p), score_entropy(p))
        np.testing.assert_array_equal(compute_scores("margin", p), score_margin(p))
        assert compute_scores("region-impurity", p).shape == (2, 4, 4)

    def test_random_is_seeded(self):
        p = np.full((2, 3, 3, 2), 0.5)
        a = compute_scores("random", p, rng=np.random.default_rng(1))
        b = compute_scores("random", p, rng=np.random.default_rng(1))
        assert np.array_equal(a, b) and a.shape == (2, 3, 3)

    def test_unknown(self):
        with pytest.raises(ConfigError, match="entropy"):
            compute_scores("nope", np.full((1, 1, 2), 0.5))
