import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbda import (
    ActiveLabelStore,
    BudgetSchedule,
    ClassStats,
    DatasetShape,
    PseudoLabelMap,
    ScoreMatrix,
    apply_weights,
    class_budget,
    class_budgets,
    class_weight,
)
from cbda.errors import (
    ClassIndexError,
    ConsistencyError,
    DuplicateSelectionError,
    ScheduleError,
    ShapeError,
)

SHAPE = DatasetShape(10, 10, 10, 5)
SCHED = BudgetSchedule(0.05, 5, num_classes=5)


class TestDatasetShape:
    def test_total_pixels(self):
        assert SHAPE.total_pixels == 1000

    @pytest.mark.parametrize("field", ["num_images", "height", "width", "num_classes"])
    def test_rejects_non_positive(self, field):
        kwargs = dict(num_images=1, height=1, width=1, num_classes=1)
        kwargs[field] = 0
        with pytest.raises(ShapeError):
            DatasetShape(**kwargs)

    def test_large_totals_are_exact(self):
        s = DatasetShape(2**20, 2**16, 2**17, 2)
        assert s.total_pixels == 2**53


class TestBudgetSchedule:
    def test_uniform_default(self):
        assert SCHED.goal_distribution == (0.2,) * 5

    @pytest.mark.parametrize("frac", [0.0, -0.1, 1.5])
    def test_budget_fraction_range(self, frac):
        with pytest.raises(ScheduleError):
            BudgetSchedule(frac, 5, num_classes=5)

    def test_goal_must_sum_to_one(self):
        with pytest.raises(ScheduleError):
            BudgetSchedule(0.1, 2, goal_distribution=(0.5, 0.4))

    @pytest.mark.parametrize("eps", [0.0, 1.0, -1e-6])
    def test_epsilon_range(self, eps):
        with pytest.raises(ScheduleError):
            BudgetSchedule(0.1, 2, epsilon=eps, num_classes=2)

    def test_cumulative_target_is_exact(self):
        shape = DatasetShape(100, 80, 80, 5)
        assert [SCHED.cumulative_target(shape, i) for i in range(1, 6)] == [6400, 12800, 19200, 25600, 32000]


class TestClassBudget:
    def test_first_iteration_example(self):
        # 1000 * 0.05 * (1/5) * (1/5)
        assert class_budget(SHAPE, SCHED, 1, 3) == pytest.approx(2.0, rel=1e-12)

    def test_last_iteration_uniform(self):
        assert class_budget(SHAPE, SCHED, 5, 0) == pytest.approx(1000 * 0.05 / 5, rel=1e-12)

    def test_one_hot_goal(self):
        sched = BudgetSchedule(0.05, 5, goal_distribution=(1, 0, 0, 0, 0))
        b = class_budgets(SHAPE, sched, 5)
        assert b[0] == pytest.approx(50.0)
        assert np.all(b[1:] == 0)

    @pytest.mark.parametrize("iteration", [0, 6, 2.5])
    def test_iteration_out_of_range(self, iteration):
        with pytest.raises(ScheduleError):
            class_budget(SHAPE, SCHED, iteration, 0)

    @pytest.mark.parametrize("class_id", [-1, 5])
    def test_class_out_of_range(self, class_id):
        with pytest.raises(ClassIndexError):
            class_budget(SHAPE, SCHED, 1, class_id)

    def test_linear_in_iteration(self):
        b1 = class_budget(SHAPE, SCHED, 1, 2)
        for i in range(1, 6):
            assert class_budget(SHAPE, SCHED, i, 2) == pytest.approx(i * b1, rel=1e-12)

    @given(
        st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8),
        st.floats(0.001, 1.0),
        st.integers(1, 20),
    )
    def test_goal_sum_conservation(self, raw_goal, frac, n_iter):
        goal = np.array(raw_goal) / math.fsum(raw_goal)
        goal[-1] = 1.0 - goal[:-1].sum()
        sched = BudgetSchedule(frac, n_iter, goal_distribution=tuple(goal))
        shape = DatasetShape(7, 13, 11, len(goal))
        total = class_budgets(shape, sched, n_iter).sum()
        assert total == pytest.approx(shape.total_pixels * frac, rel=1e-6)


class TestClassWeight:
    def test_untouched_class(self):
        assert class_weight(0, 100) == 1.0

    def test_exactly_filled(self):
        assert class_weight(100, 100, 1e-6) == 1e-6

    def test_overfilled(self):
        assert class_weight(150, 100, 1e-6) == 1e-6

    def test_partial(self):
        assert class_weight(25, 100) == 0.75

    def test_zero_budget_gives_epsilon(self):
        assert class_weight(0, 0, 1e-3) == 1e-3
        assert class_weight(5, 0, 1e-3) == 1e-3

    def test_vectorised(self):
        w = class_weight(np.array([0, 25, 100, 150]), np.array([100, 100, 100, 100]), 1e-6)
        np.testing.assert_array_equal(w, [1.0, 0.75, 1e-6, 1e-6])

    @given(st.floats(0, 1e6), st.floats(1e-3, 1e6), st.floats(1e-9, 0.5))
    def test_range(self, count, budget, eps):
        w = class_weight(count, budget, eps)
        assert eps <= w <= 1.0

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1.0, 1e4), st.floats(1e-9, 0.5))
    def test_monotone_in_count(self, a, b, budget, eps):
        lo, hi = sorted((a, b))
        assert class_weight(hi, budget, eps) <= class_weight(lo, budget, eps)

    @given(st.floats(1.0, 1e5), st.floats(1e-9, 0.5), st.floats(0, 10))
    def test_constant_above_threshold(self, budget, eps, extra):
        count = budget * (1 - eps) * (1 + 1e-9) + extra
        assert class_weight(count, budget, eps) == eps


class TestApplyWeights:
    def test_example(self):
        out = apply_weights(np.array([[4.0, 3.0], [2.0, 1.0]]), np.array([[0, 1], [0, 1]]), [0.5, 1.0])
        np.testing.assert_array_equal(out, [[2.0, 3.0], [1.0, 1.0]])

    def test_identity(self, rng):
        s = rng.random((5, 7))
        out = apply_weights(ScoreMatrix("a", s), PseudoLabelMap("a", rng.integers(0, 3, (5, 7))), [1.0] * 3)
        assert np.array_equal(out.scores, s)

    def test_zero_fixpoint(self, rng):
        out = apply_weights(np.zeros((3, 3)), rng.integers(0, 2, (3, 3)), [0.1, 0.9])
        assert np.all(out == 0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            apply_weights(np.zeros((2, 2)), np.zeros((2, 3), dtype=int), [1.0])

    def test_image_id_mismatch(self):
        with pytest.raises(ShapeError):
            apply_weights(ScoreMatrix("a", np.zeros((2, 2))), PseudoLabelMap("b", np.zeros((2, 2), int)), [1.0])

    @given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1.0))
    @settings(max_examples=50)
    def test_rank_preserved_within_class(self, seed, weight):
        rng = np.random.default_rng(seed)
        s = rng.random((4, 4))
        pseudo = rng.integers(0, 2, (4, 4))
        out = apply_weights(s, pseudo, [weight, 1.0])
        for c in (0, 1):
            sel = pseudo == c
            a, b = s[sel], out[sel]
            assert np.array_equal(np.sign(a[:, None] - a[None, :]), np.sign(b[:, None] - b[None, :]))


class TestScoreMatrix:
    @pytest.mark.parametrize("bad", [-0.1, np.nan, np.inf])
    def test_rejects_bad_scores(self, bad):
        with pytest.raises(ValueError):
            ScoreMatrix(0, np.array([[0.0, bad]]))

    def test_pseudo_range(self):
        with pytest.raises(ClassIndexError):
            PseudoLabelMap(0, np.array([[0, 3]]), num_classes=3)


class TestActiveLabelStore:
    def test_add_and_membership(self):
        store = ActiveLabelStore(2, 3, 3, 4)
        store.add(1, [0, 2], [1, 2], [3, 0], al_iteration=1)
        assert len(store) == 2
        assert (1, 0, 1) in store and (0, 0, 1) not in store
        np.testing.assert_array_equal(store.per_image_counts(), [0, 2])
        np.testing.assert_array_equal(store.class_counts(), [1, 0, 0, 1])

    def test_rejects_reselection(self):
        store = ActiveLabelStore(1, 2, 2, 2)
        store.add(0, [0], [0], [1])
        with pytest.raises(DuplicateSelectionError):
            store.add(0, [0], [0], [1])
        with pytest.raises(DuplicateSelectionError):
            store.add(0, [1, 1], [1, 1], [0, 0])
        assert len(store) == 1

    def test_bounds(self):
        store = ActiveLabelStore(1, 2, 2, 2)
        with pytest.raises(ShapeError):
            store.add(0, [2], [0], [0])
        with pytest.raises(ClassIndexError):
            store.add(0, [0], [0], [2])

    def test_records_sorted(self):
        store = ActiveLabelStore(2, 2, 2, 2)
        store.add(1, [1], [1], [0], 1)
        store.add(0, [1, 0], [0, 1], [1, 1], 2)
        rec = store.records()
        assert [tuple(r)[:3] for r in rec] == [(0, 0, 1), (0, 1, 0), (1, 1, 1)]

    def test_mask_is_read_only(self):
        store = ActiveLabelStore(1, 2, 2, 2)
        with pytest.raises(ValueError):
            store.mask(0)[0, 0] = True

    def test_equality_and_copy(self):
        a = ActiveLabelStore(1, 2, 2, 2)
        a.add(0, [0], [1], [1], 3)
        b = a.copy()
        assert a == b
        b.add(0, [1], [1], [0], 4)
        assert a != b


class TestClassStats:
    def test_from_store_and_check(self):
        store = ActiveLabelStore(1, 3, 3, 3)
        store.add(0, [0, 1, 2], [0, 0, 0], [2, 2, 0], 1, [2, 1, 0])
        stats = ClassStats.from_store(store, 1)
        np.testing.assert_array_equal(stats.cumulative_counts, [1, 0, 2])
        stats.check_against(store)
        pseudo = ClassStats.from_store(store, 1, "pseudo")
        np.testing.assert_array_equal(pseudo.cumulative_counts, [1, 1, 1])

    def test_mismatch(self):
        store = ActiveLabelStore(1, 3, 3, 3)
        store.add(0, [0], [0], [2])
        with pytest.raises(ConsistencyError):
            ClassStats.empty(3).check_against(store)

    def test_update_monotone(self):
        stats = ClassStats.empty(2)
        stats.update([3, 1], 1)
        stats.update([0, 2], 2)
        np.testing.assert_array_equal(stats.cumulative_counts, [3, 3])
        with pytest.raises(ValueError):
            stats.update([-1, 0], 3)
        with pytest.raises(ScheduleError):
            stats.update([0, 0], 1)
