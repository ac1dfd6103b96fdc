"""CART donor trees and donor forests.

Trees store donor pools (the training targets routed to each leaf) so draws
return observed values only; no invented numeric values and no invented
category levels.  All-numeric predictor matrices take the fast kernel path;
datasets with categorical predictors use a slower generic builder that also
searches level-subset splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import FitError
from .kernels import _numpy as _ref

MIN_LEAF = 5
MIN_GAIN_FRAC = 1e-4  # of root impurity
MAX_CAT_EXHAUSTIVE = 12  # exhaustive level-subset scan up to this many levels


@dataclass
class CartTree:
    feature: np.ndarray
    threshold: np.ndarray
    cat_left: tuple  # per node: sorted level codes routed left, or None
    left: np.ndarray
    right: np.ndarray
    leaf_start: np.ndarray
    leaf_end: np.ndarray
    order: np.ndarray
    y_fit: np.ndarray
    target_is_cat: bool
    n_classes: int
    _leaf_value: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def has_cat_split(self) -> bool:
        return any(c is not None for c in self.cat_left)

    def donor_pool(self, node: int) -> np.ndarray:
        s, e = self.leaf_start[node], self.leaf_end[node]
        if s < 0:
            raise ValueError(f"node {node} is not a leaf")
        return self.y_fit[self.order[s:e]]

    def leaf_values(self) -> np.ndarray:
        """Per-node aggregation of donor pools (mean, or majority code)."""
        if self._leaf_value is None:
            vals = np.full(self.n_nodes, np.nan)
            for node in range(self.n_nodes):
                if self.leaf_start[node] < 0:
                    continue
                pool = self.donor_pool(node)
                if self.target_is_cat:
                    counts = np.bincount(pool.astype(np.int64), minlength=self.n_classes)
                    vals[node] = float(np.argmax(counts))
                else:
                    vals[node] = float(np.mean(pool))
            self._leaf_value = vals
        return self._leaf_value


@dataclass
class DonorForest:
    trees: list[CartTree]
    target_is_cat: bool
    n_classes: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _max_nodes(n: int, min_leaf: int) -> int:
    return 2 * max(1, n // max(1, min_leaf)) + 1


def _cat_split_numeric_y(codes, y, n_levels, min_leaf):
    """Best level-subset split for a categorical predictor, SSE criterion.

    Returns (childsum, left_levels) or (inf, None).
    """
    m = y.size
    cnt = np.bincount(codes, minlength=n_levels).astype(np.int64)
    s1 = np.bincount(codes, weights=y, minlength=n_levels)
    s2 = np.bincount(codes, weights=y * y, minlength=n_levels)
    present = np.flatnonzero(cnt)
    if present.size < 2:
        return np.inf, None
    t1 = float(s1.sum())
    t2 = float(s2.sum())

    def childsum_for(left_levels):
        cl = int(cnt[left_levels].sum())
        if cl < min_leaf or m - cl < min_leaf:
            return np.inf
        l1 = float(s1[left_levels].sum())
        l2 = float(s2[left_levels].sum())
        left_sse = l2 - l1 * l1 / cl
        r1 = t1 - l1
        r2 = t2 - l2
        right_sse = r2 - r1 * r1 / (m - cl)
        return left_sse + right_sse

    best_cs = np.inf
    best_left = None
    if present.size <= MAX_CAT_EXHAUSTIVE:
        rest = present[1:]
        for bits in range(2 ** rest.size):
            sel = [present[0]]
            for b in range(rest.size):
                if bits >> b & 1:
                    sel.append(rest[b])
            if len(sel) == present.size:
                continue
            left_levels = np.array(sorted(sel), dtype=np.int64)
            cs = childsum_for(left_levels)
            if cs < best_cs:
                best_cs = cs
                best_left = left_levels
    else:
        means = s1[present] / cnt[present]
        ordering = present[np.argsort(means, kind="stable")]
        for t in range(1, ordering.size):
            left_levels = np.array(sorted(ordering[:t]), dtype=np.int64)
            cs = childsum_for(left_levels)
            if cs < best_cs:
                best_cs = cs
                best_left = left_levels
    return best_cs, best_left


def _cat_split_gini(codes, ycodes, n_levels, n_classes, min_leaf):
    """Best level-subset split for a categorical predictor, Gini criterion."""
    m = ycodes.size
    mat = np.zeros((n_levels, n_classes), dtype=np.int64)
    np.add.at(mat, (codes, ycodes), 1)
    cnt = mat.sum(axis=1)
    present = np.flatnonzero(cnt)
    if present.size < 2:
        return np.inf, None
    total = mat.sum(axis=0)

    def childsum_for(left_levels):
        cl = int(cnt[left_levels].sum())
        if cl < min_leaf or m - cl < min_leaf:
            return np.inf
        lcnt = mat[left_levels].sum(axis=0)
        rcnt = total - lcnt
        sl = int((lcnt * lcnt).sum())
        sr = int((rcnt * rcnt).sum())
        return (cl - sl / cl) + ((m - cl) - sr / (m - cl))

    best_cs = np.inf
    best_left = None
    if present.size <= MAX_CAT_EXHAUSTIVE:
        rest = present[1:]
        for bits in range(2 ** rest.size):
            sel = [present[0]]
            for b in range(rest.size):
                if bits >> b & 1:
                    sel.append(rest[b])
            if len(sel) == present.size:
                continue
            left_levels = np.array(sorted(sel), dtype=np.int64)
            cs = childsum_for(left_levels)
            if cs < best_cs:
                best_cs = cs
                best_left = left_levels
    else:
        rate_col = 1 if n_classes > 1 else 0
        rates = mat[present, rate_col] / cnt[present]
        ordering = present[np.argsort(rates, kind="stable")]
        for t in range(1, ordering.size):
            left_levels = np.array(sorted(ordering[:t]), dtype=np.int64)
            cs = childsum_for(left_levels)
            if cs < best_cs:
                best_cs = cs
                best_left = left_levels
    return best_cs, best_left


def _fit_generic(X, pred_is_cat, pred_levels, yf, ycodes, criterion, n_classes,
                 min_leaf, min_gain_frac, max_depth, mtry, rng):
    """Iterative CART builder handling categorical predictors (cold path)."""
    n, p = X.shape
    feature: list[int] = []
    threshold: list[float] = []
    cat_left: list = []
    left: list[int] = []
    right: list[int] = []
    leaf_start: list[int] = []
    leaf_end: list[int] = []
    pending: list[tuple[int, int, int]] = []  # (start, end, depth) per node id

    order = np.arange(n, dtype=np.int64)
    if criterion == 0:
        root_imp = _ref.node_impurity_sse(yf)
    else:
        root_imp = _ref.node_impurity_gini(ycodes, n_classes)
    min_gain = min_gain_frac * root_imp

    def new_node(s, e, depth):
        feature.append(-1)
        threshold.append(0.0)
        cat_left.append(None)
        left.append(-1)
        right.append(-1)
        leaf_start.append(-1)
        leaf_end.append(-1)
        pending.append((s, e, depth))
        return len(feature) - 1

    new_node(0, n, 0)
    node = 0
    while node < len(feature):
        s, e, depth = pending[node]
        m = e - s
        rows = order[s:e]
        if criterion == 0:
            imp = _ref.node_impurity_sse(yf[rows])
        else:
            imp = _ref.node_impurity_gini(ycodes[rows], n_classes)
        splittable = m >= 2 * min_leaf and imp > 0.0 and (max_depth < 0 or depth < max_depth)
        best = None  # (childsum, feature, thr_or_None, left_levels_or_None)
        if splittable:
            if mtry < p:
                prio = np.argsort(rng.random(p), kind="stable")[:mtry]
                feats = np.sort(prio)
            else:
                feats = np.arange(p)
            for f in feats:
                if pred_is_cat[f]:
                    codes = X[rows, f].astype(np.int64)
                    if criterion == 0:
                        cs, left_levels = _cat_split_numeric_y(codes, yf[rows], pred_levels[f], min_leaf)
                    else:
                        cs, left_levels = _cat_split_gini(codes, ycodes[rows], pred_levels[f], n_classes, min_leaf)
                    if left_levels is not None and (best is None or cs < best[0]):
                        best = (cs, int(f), None, left_levels)
                else:
                    xs = X[rows, f]
                    srt = np.argsort(xs, kind="stable")
                    xs_s = xs[srt]
                    if criterion == 0:
                        pos, cs = _ref.scan_split_sse(xs_s, yf[rows][srt], min_leaf)
                    else:
                        pos, cs = _ref.scan_split_gini(xs_s, ycodes[rows][srt], n_classes, min_leaf)
                    if pos >= 0 and (best is None or cs < best[0]):
                        thr = _ref._pick_threshold(xs_s[pos - 1], xs_s[pos])
                        best = (cs, int(f), thr, None)
        if best is not None and (imp - best[0]) > min_gain:
            cs, f, thr, left_levels = best
            if left_levels is None:
                go_left = X[rows, f] <= thr
            else:
                go_left = np.isin(X[rows, f].astype(np.int64), left_levels)
            order[s:e] = np.concatenate([rows[go_left], rows[~go_left]])
            n_left = int(np.count_nonzero(go_left))
            feature[node] = f
            threshold[node] = thr if thr is not None else 0.0
            cat_left[node] = left_levels
            left[node] = new_node(s, s + n_left, depth + 1)
            right[node] = new_node(s + n_left, e, depth + 1)
        else:
            leaf_start[node] = s
            leaf_end[node] = e
        node += 1

    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        tuple(cat_left),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(leaf_start, dtype=np.int64),
        np.array(leaf_end, dtype=np.int64),
        order,
    )


def _fit_tree(X, pred_is_cat, pred_levels, y, target_is_cat, n_classes,
              min_leaf, min_gain_frac, max_depth, mtry, rng, feat_rand=None):
    n, p = X.shape
    if n == 0:
        raise FitError("empty fit set")
    criterion = 1 if target_is_cat else 0
    yf = np.ascontiguousarray(y, dtype=np.float64)
    ycodes = yf.astype(np.int64) if target_is_cat else np.zeros(0, dtype=np.int64)
    depth_arg = -1 if max_depth is None else int(max_depth)
    if not pred_is_cat.any():
        if mtry < p and feat_rand is None:
            feat_rand = rng.random((_max_nodes(n, min_leaf), p))
        if feat_rand is None:
            feat_rand = np.zeros((1, 1), dtype=np.float64)
        (feat, thr, lc, rc, ls, le, order, n_nodes) = kernels.build_tree(
            np.ascontiguousarray(X, dtype=np.float64),
            yf,
            ycodes,
            criterion,
            max(1, n_classes),
            int(min_leaf),
            float(min_gain_frac),
            depth_arg,
            feat_rand,
            int(mtry),
        )
        cat_left = tuple([None] * n_nodes)
    else:
        (feat, thr, cat_left, lc, rc, ls, le, order) = _fit_generic(
            X, pred_is_cat, pred_levels, yf, ycodes, criterion, max(1, n_classes),
            int(min_leaf), float(min_gain_frac), depth_arg, int(mtry), rng,
        )
    return CartTree(
        feature=feat, threshold=thr, cat_left=cat_left, left=lc, right=rc,
        leaf_start=ls, leaf_end=le, order=order, y_fit=yf,
        target_is_cat=target_is_cat, n_classes=n_classes,
    )


def fit_cart(
    X: np.ndarray,
    y: np.ndarray,
    pred_is_cat: Optional[np.ndarray] = None,
    pred_levels: Optional[Sequence[int]] = None,
    target_is_cat: bool = False,
    n_classes: int = 0,
    min_leaf: int = MIN_LEAF,
    max_depth: Optional[int] = None,
    min_gain_frac: float = MIN_GAIN_FRAC,
) -> CartTree:
    """Grow a greedy binary donor tree.

    Splits minimize child SSE (numeric target) or child Gini impurity
    (categorical target); leaves keep their training targets as donor pools.
    Growth stops when no split leaves ``min_leaf`` rows on both sides, when
    ``max_depth`` is hit, or when the best improvement falls below
    ``min_gain_frac`` times the root impurity.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FitError("predictor matrix must be 2-D")
    if pred_is_cat is None:
        pred_is_cat = np.zeros(X.shape[1], dtype=bool)
    if pred_levels is None:
        pred_levels = [0] * X.shape[1]
    return _fit_tree(
        X, np.asarray(pred_is_cat, dtype=bool), list(pred_levels),
        y, target_is_cat, n_classes, min_leaf, min_gain_frac, max_depth,
        mtry=X.shape[1], rng=None,
    )


def leaves_of(tree: CartTree, X: np.ndarray) -> np.ndarray:
    """Leaf node id for each row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if not tree.has_cat_split:
        return kernels.route_rows(X, tree.feature, tree.threshold, tree.left, tree.right)
    n = X.shape[0]
    nodes = np.zeros(n, dtype=np.int64)
    active = tree.feature[nodes] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        for r in idx:
            node = nodes[r]
            f = tree.feature[node]
            if tree.cat_left[node] is not None:
                goes_left = np.int64(X[r, f]) in tree.cat_left[node]
            else:
                goes_left = X[r, f] <= tree.threshold[node]
            nodes[r] = tree.left[node] if goes_left else tree.right[node]
        active = tree.feature[nodes] >= 0
    return nodes


def draw_cart_many(tree: CartTree, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform donor draw per row of ``X``."""
    leaves = leaves_of(tree, X)
    starts = tree.leaf_start[leaves]
    ends = tree.leaf_end[leaves]
    idx = rng.integers(starts, ends)
    return tree.y_fit[tree.order[idx]]


def draw_cart(tree: CartTree, x_row: np.ndarray, rng: np.random.Generator) -> float:
    """Route one predictor row to its leaf and draw one donor."""
    return float(draw_cart_many(tree, np.asarray(x_row, dtype=np.float64)[None, :], rng)[0])


def predict_cart_many(tree: CartTree, X: np.ndarray) -> np.ndarray:
    """Deterministic leaf aggregate (mean, or majority level code) per row."""
    leaves = leaves_of(tree, X)
    return tree.leaf_values()[leaves]


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    pred_is_cat: Optional[np.ndarray] = None,
    pred_levels: Optional[Sequence[int]] = None,
    target_is_cat: bool = False,
    n_classes: int = 0,
    n_trees: int = 10,
    mtry: Optional[int] = None,
    min_leaf: int = MIN_LEAF,
    max_depth: Optional[int] = None,
    min_gain_frac: float = MIN_GAIN_FRAC,
) -> DonorForest:
    """Fit ``n_trees`` donor trees on bootstrap row resamples with ``mtry``
    features considered per split (default ceil(sqrt(p)))."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise FitError("empty fit set")
    if pred_is_cat is None:
        pred_is_cat = np.zeros(p, dtype=bool)
    pred_is_cat = np.asarray(pred_is_cat, dtype=bool)
    if pred_levels is None:
        pred_levels = [0] * p
    if n_trees < 1:
        raise FitError("forest needs at least one tree")
    if mtry is None:
        mtry = int(math.ceil(math.sqrt(p)))
    mtry = max(1, min(int(mtry), p))
    y = np.asarray(y, dtype=np.float64)
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        feat_rand = rng.random((_max_nodes(n, min_leaf), p)) if mtry < p else None
        trees.append(
            _fit_tree(
                X[boot], pred_is_cat, list(pred_levels), y[boot], target_is_cat,
                n_classes, min_leaf, min_gain_frac, max_depth, mtry, rng,
                feat_rand=feat_rand,
            )
        )
    return DonorForest(trees=trees, target_is_cat=target_is_cat, n_classes=n_classes)


def draw_forest_many(forest: DonorForest, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per row: pick one tree uniformly, route, draw one donor from its leaf."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    pick = rng.integers(0, forest.n_trees, size=n)
    out = np.empty(n, dtype=np.float64)
    for t in range(forest.n_trees):
        rows = np.flatnonzero(pick == t)
        if rows.size == 0:
            continue
        out[rows] = draw_cart_many(forest.trees[t], X[rows], rng)
    return out


def draw_forest(forest: DonorForest, x_row: np.ndarray, rng: np.random.Generator) -> float:
    return float(draw_forest_many(forest, np.asarray(x_row, dtype=np.float64)[None, :], rng)[0])


def predict_forest_many(forest: DonorForest, X: np.ndarray) -> np.ndarray:
    """Aggregate prediction: mean of tree means, or majority vote of tree
    majorities (ties to the lowest level code)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if forest.target_is_cat:
        votes = np.zeros((n, forest.n_classes), dtype=np.int64)
        for tree in forest.trees:
            pred = predict_cart_many(tree, X).astype(np.int64)
            votes[np.arange(n), pred] += 1
        return np.argmax(votes, axis=1).astype(np.float64)
    acc = np.zeros(n, dtype=np.float64)
    for tree in forest.trees:
        acc += predict_cart_many(tree, X)
    return acc / forest.n_trees
