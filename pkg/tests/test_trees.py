import numpy as np
import pytest

from imputekit.errors import FitError
from imputekit.rng import seed_tree
from imputekit.trees import (
    draw_cart,
    draw_cart_many,
    draw_forest,
    draw_forest_many,
    fit_cart,
    fit_forest,
    leaves_of,
    predict_cart_many,
    predict_forest_many,
)


def brute_force_best_threshold(x, y, min_leaf):
    """Independent oracle: scan every midpoint, computing child SSE directly."""
    best = (np.inf, None)
    xs = np.unique(x)
    for a, b in zip(xs[:-1], xs[1:]):
        thr = (a + b) / 2
        left = y[x <= thr]
        right = y[x > thr]
        if len(left) < min_leaf or len(right) < min_leaf:
            continue
        sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        if sse < best[0]:
            best = (sse, thr)
    return best[1]


class TestFitCart:
    def test_perfect_split(self):
        x = np.concatenate([np.linspace(-1, -0.01, 50), np.linspace(0.01, 1, 50)])
        y = (x >= 0).astype(float)
        tree = fit_cart(x[:, None], y, min_leaf=5)
        assert tree.n_nodes == 3  # one split, two leaves
        left, right = tree.left[0], tree.right[0]
        assert set(tree.donor_pool(left)) == {0.0}
        assert set(tree.donor_pool(right)) == {1.0}
        assert len(tree.donor_pool(left)) == 50

    def test_constant_target_single_leaf(self):
        tree = fit_cart(np.arange(40.0)[:, None], np.full(40, 3.3))
        assert tree.n_nodes == 1
        assert len(tree.donor_pool(0)) == 40

    def test_step_function_threshold_matches_oracle(self):
        rng = seed_tree(8)
        x = rng.random(500)
        y = (x > 0.5).astype(float) + rng.standard_normal(500) * 0.1
        tree = fit_cart(x[:, None], y, min_leaf=5)
        oracle_thr = brute_force_best_threshold(x, y, 5)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == pytest.approx(oracle_thr, abs=1e-12)
        assert abs(tree.threshold[0] - 0.5) < 0.05

    def test_empty_fit_set(self):
        with pytest.raises(FitError, match="empty"):
            fit_cart(np.empty((0, 1)), np.empty(0))

    def test_max_depth_cap(self):
        rng = seed_tree(3)
        x = rng.random(200)
        tree = fit_cart(x[:, None], rng.standard_normal(200), min_leaf=2, max_depth=1)
        assert tree.n_nodes <= 3

    def test_categorical_predictor_subset_split(self):
        # y determined by level membership {a, c} vs {b}: the split must
        # recover exactly that level subset
        rng = seed_tree(4)
        codes = rng.integers(0, 3, 120).astype(float)
        y = np.where(np.isin(codes, [0, 2]), 1.0, 5.0) + rng.standard_normal(120) * 0.01
        tree = fit_cart(
            codes[:, None], y,
            pred_is_cat=np.array([True]), pred_levels=[3], min_leaf=5,
        )
        assert tree.cat_left[0] is not None
        assert sorted(tree.cat_left[0].tolist()) in ([0, 2], [1])

    def test_categorical_target_gini(self):
        x = np.concatenate([np.zeros(30), np.ones(30)])
        y = np.concatenate([np.zeros(30), np.full(30, 2.0)])  # level codes
        tree = fit_cart(x[:, None], y, target_is_cat=True, n_classes=3, min_leaf=5)
        assert tree.n_nodes == 3
        assert set(tree.donor_pool(tree.left[0])) == {0.0}
        assert set(tree.donor_pool(tree.right[0])) == {2.0}


class TestDrawCart:
    def test_single_leaf_constant_pool(self):
        tree = fit_cart(np.arange(6.0)[:, None], np.full(6, 3.0), min_leaf=5)
        assert draw_cart(tree, np.array([2.0]), seed_tree(0)) == 3.0

    def test_routing_draws_from_correct_pool(self):
        x = np.concatenate([np.linspace(-1, -0.01, 50), np.linspace(0.01, 1, 50)])
        y = (x >= 0).astype(float)
        tree = fit_cart(x[:, None], y, min_leaf=5)
        draws = draw_cart_many(tree, np.full((200, 1), -1.0), seed_tree(1))
        assert set(draws) == {0.0}

    def test_leaf_draw_frequencies(self):
        # binomial oracle: pool {0, 0, 1} drawn uniformly -> P(1) = 1/3
        tree = fit_cart(np.ones((3, 1)), np.array([0.0, 0.0, 1.0]), min_leaf=1)
        assert tree.n_nodes == 1
        draws = draw_cart_many(tree, np.ones((10_000, 1)), seed_tree(2))
        assert abs((draws == 1.0).mean() - 1 / 3) < 0.02

    def test_draw_reproducibility(self):
        rng_data = seed_tree(5)
        x = rng_data.random(100)
        y = rng_data.standard_normal(100)
        tree = fit_cart(x[:, None], y)
        a = draw_cart_many(tree, x[:20, None], seed_tree(7))
        b = draw_cart_many(tree, x[:20, None], seed_tree(7))
        assert np.array_equal(a, b)


class TestForest:
    def _data(self, n=200, seed=6):
        rng = seed_tree(seed)
        X = rng.random((n, 3))
        y = X[:, 0] * 2 + rng.standard_normal(n) * 0.2
        return X, y

    def test_single_tree_degenerate_forest(self):
        X, y = self._data()
        forest = fit_forest(X, y, rng=seed_tree(1), n_trees=1)
        assert forest.n_trees == 1
        draws = draw_forest_many(forest, X[:50], seed_tree(2))
        assert all(v in set(y) for v in draws)

    def test_constant_target(self):
        X, _ = self._data()
        forest = fit_forest(X, np.full(200, 7.0), rng=seed_tree(1), n_trees=5)
        draws = draw_forest_many(forest, X[:30], seed_tree(3))
        assert set(draws) == {7.0}

    def test_membership_closure(self):
        # donor-draw closure over 1e4 draws
        X, y = self._data()
        forest = fit_forest(X, y, rng=seed_tree(4), n_trees=10)
        pool = set(y)
        draws = draw_forest_many(forest, np.repeat(X[:1], 10_000, axis=0), seed_tree(5))
        assert all(v in pool for v in draws)

    def test_scalar_draw(self):
        X, y = self._data()
        forest = fit_forest(X, y, rng=seed_tree(4), n_trees=3)
        v = draw_forest(forest, X[0], seed_tree(6))
        assert v in set(y)

    def test_forest_rng_reproducible(self):
        X, y = self._data()
        f1 = fit_forest(X, y, rng=seed_tree(9), n_trees=4)
        f2 = fit_forest(X, y, rng=seed_tree(9), n_trees=4)
        for t1, t2 in zip(f1.trees, f2.trees):
            assert np.array_equal(t1.threshold, t2.threshold)
            assert np.array_equal(t1.order, t2.order)


class TestPredict:
    def test_leaf_means(self):
        x = np.concatenate([np.zeros(10), np.ones(10)])
        y = np.concatenate([np.full(10, 2.0), np.full(10, 8.0)])
        tree = fit_cart(x[:, None], y, min_leaf=5)
        pred = predict_cart_many(tree, np.array([[0.0], [1.0]]))
        assert pred.tolist() == [2.0, 8.0]

    def test_majority_vote_tie_lowest_code(self):
        # single leaf with pool {0, 1}: tie resolves to code 0
        tree = fit_cart(
            np.ones((2, 1)), np.array([1.0, 0.0]),
            target_is_cat=True, n_classes=2, min_leaf=1,
        )
        pred = predict_cart_many(tree, np.ones((1, 1)))
        assert pred[0] == 0.0

    def test_forest_prediction_aggregates(self):
        X, y = TestForest()._data(seed=11)
        forest = fit_forest(X, y, rng=seed_tree(12), n_trees=5)
        pred = predict_forest_many(forest, X[:4])
        manual = np.mean([predict_cart_many(t, X[:4]) for t in forest.trees], axis=0)
        assert pred == pytest.approx(manual, rel=1e-12)

    def test_routing_consistency_with_training_partition(self):
        rng = seed_tree(13)
        X = rng.random((300, 2))
        y = rng.standard_normal(300)
        tree = fit_cart(X, y, min_leaf=5)
        leaves = leaves_of(tree, X)
        for node in range(tree.n_nodes):
            s, e = tree.leaf_start[node], tree.leaf_end[node]
            if s < 0:
                continue
            assert np.array_equal(np.sort(np.flatnonzero(leaves == node)), np.sort(tree.order[s:e]))
