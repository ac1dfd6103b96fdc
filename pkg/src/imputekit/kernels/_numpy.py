"""Pure-numpy implementations of the hot kernels.

These are the reference implementations; ``_numba.py`` mirrors them loop for
loop.  Both paths must produce bit-identical outputs: accumulations run in the
same sequential order (``np.cumsum`` / explicit running sums), sorts are
stable, and ties resolve to the first candidate.
"""

from __future__ import annotations

import numpy as np

# Split positions i mean: left child = sorted rows [0, i), right = [i, m).
# A position is valid only when both children have >= min_leaf rows and the
# sorted feature values actually differ across the boundary.


def scan_split_sse(xs: np.ndarray, ys: np.ndarray, min_leaf: int) -> tuple[int, float]:
    """Best SSE split of ``ys`` along pre-sorted ``xs``.

    Returns ``(pos, child_sse_sum)``; ``pos == -1`` when no valid split exists.
    """
    m = xs.size
    if m < 2 * min_leaf:
        return -1, np.inf
    cs1 = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    total = cs1[-1]
    total2 = cs2[-1]
    i = np.arange(1, m, dtype=np.int64)
    run = cs1[:-1]
    run2 = cs2[:-1]
    left_sse = run2 - run * run / i
    rs = total - run
    rs2 = total2 - run2
    right_sse = rs2 - rs * rs / (m - i)
    childsum = left_sse + right_sse
    valid = (i >= min_leaf) & ((m - i) >= min_leaf) & (xs[:-1] < xs[1:])
    if not valid.any():
        return -1, np.inf
    childsum = np.where(valid, childsum, np.inf)
    best = int(np.argmin(childsum))
    return best + 1, float(childsum[best])


def scan_split_gini(
    xs: np.ndarray, codes: np.ndarray, n_classes: int, min_leaf: int
) -> tuple[int, float]:
    """Best Gini split (impurity in count units) along pre-sorted ``xs``."""
    m = xs.size
    if m < 2 * min_leaf:
        return -1, np.inf
    counts = np.zeros((m, n_classes), dtype=np.int64)
    counts[np.arange(m), codes] = 1
    cum = np.cumsum(counts, axis=0)
    total = cum[-1]
    i = np.arange(1, m, dtype=np.int64)
    left = cum[:-1]
    right = total[None, :] - left
    # sum of squared class counts, accumulated class by class (exact ints)
    sl = np.zeros(m - 1, dtype=np.int64)
    sr = np.zeros(m - 1, dtype=np.int64)
    for k in range(n_classes):
        sl += left[:, k] * left[:, k]
        sr += right[:, k] * right[:, k]
    childsum = (i - sl / i) + ((m - i) - sr / (m - i))
    valid = (i >= min_leaf) & ((m - i) >= min_leaf) & (xs[:-1] < xs[1:])
    if not valid.any():
        return -1, np.inf
    childsum = np.where(valid, childsum, np.inf)
    best = int(np.argmin(childsum))
    return best + 1, float(childsum[best])


def node_impurity_sse(ys: np.ndarray) -> float:
    cs1 = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    return float(cs2[-1] - cs1[-1] * cs1[-1] / ys.size)


def node_impurity_gini(codes: np.ndarray, n_classes: int) -> float:
    m = codes.size
    cnt = np.bincount(codes, minlength=n_classes).astype(np.int64)
    s = np.int64(0)
    for k in range(n_classes):
        s += cnt[k] * cnt[k]
    return float(m - s / m)


def _pick_threshold(a: float, b: float) -> float:
    # midpoint of adjacent distinct values; never allow rounding up to b,
    # so the routing rule (x <= thr goes left) reproduces the scan partition
    thr = 0.5 * (a + b)
    if thr >= b:
        thr = a
    return thr


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    codes: np.ndarray,
    criterion: int,
    n_classes: int,
    min_leaf: int,
    min_gain_frac: float,
    max_depth: int,
    feat_rand: np.ndarray,
    mtry: int,
):
    """Grow a CART tree on all-numeric predictors.

    Parameters mirror the numba kernel: ``criterion`` 0 = SSE (``y`` used),
    1 = Gini (``codes`` used); ``max_depth < 0`` means unbounded;
    ``feat_rand[node]`` supplies per-split feature priorities when
    ``mtry < p`` (forest mode).

    Returns ``(feature, threshold, left, right, leaf_start, leaf_end, order,
    n_nodes)`` where ``order`` is the final row permutation and leaves own the
    slice ``order[leaf_start:leaf_end]``.
    """
    n, p = X.shape
    max_nodes = 2 * max(1, n // max(1, min_leaf)) + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    leaf_start = np.full(max_nodes, -1, dtype=np.int64)
    leaf_end = np.full(max_nodes, -1, dtype=np.int64)
    node_s = np.zeros(max_nodes, dtype=np.int64)
    node_e = np.zeros(max_nodes, dtype=np.int64)
    node_d = np.zeros(max_nodes, dtype=np.int64)

    order = np.arange(n, dtype=np.int64)
    if criterion == 0:
        root_imp = node_impurity_sse(y)
    else:
        root_imp = node_impurity_gini(codes, n_classes)
    min_gain = min_gain_frac * root_imp

    node_s[0] = 0
    node_e[0] = n
    node_d[0] = 0
    n_nodes = 1
    node = 0
    while node < n_nodes:
        s = node_s[node]
        e = node_e[node]
        depth = node_d[node]
        m = e - s
        rows = order[s:e]
        if criterion == 0:
            imp = node_impurity_sse(y[rows])
        else:
            imp = node_impurity_gini(codes[rows], n_classes)
        splittable = (
            m >= 2 * min_leaf
            and imp > 0.0
            and (max_depth < 0 or depth < max_depth)
            and n_nodes + 2 <= max_nodes
        )
        best_feat = -1
        best_pos = -1
        best_cs = np.inf
        best_thr = 0.0
        if splittable:
            if mtry < p:
                prio = np.argsort(feat_rand[node], kind="stable")[:mtry]
                feats = np.sort(prio)
            else:
                feats = np.arange(p, dtype=np.int64)
            for f in feats:
                xs = X[rows, f]
                srt = np.argsort(xs, kind="stable")
                xs_s = xs[srt]
                if criterion == 0:
                    pos, cs = scan_split_sse(xs_s, y[rows][srt], min_leaf)
                else:
                    pos, cs = scan_split_gini(xs_s, codes[rows][srt], n_classes, min_leaf)
                if pos >= 0 and cs < best_cs:
                    best_cs = cs
                    best_pos = pos
                    best_feat = int(f)
                    best_thr = _pick_threshold(xs_s[pos - 1], xs_s[pos])
        if best_feat >= 0 and (imp - best_cs) > min_gain:
            go_left = X[rows, best_feat] <= best_thr
            order[s:e] = np.concatenate([rows[go_left], rows[~go_left]])
            n_left = int(np.count_nonzero(go_left))
            feature[node] = best_feat
            threshold[node] = best_thr
            lc = n_nodes
            rc = n_nodes + 1
            n_nodes += 2
            left[node] = lc
            right[node] = rc
            node_s[lc] = s
            node_e[lc] = s + n_left
            node_d[lc] = depth + 1
            node_s[rc] = s + n_left
            node_e[rc] = e
            node_d[rc] = depth + 1
        else:
            leaf_start[node] = s
            leaf_end[node] = e
        node += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        leaf_start[:n_nodes].copy(),
        leaf_end[:n_nodes].copy(),
        order,
        n_nodes,
    )


def route_rows(
    X: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
) -> np.ndarray:
    """Leaf node id for every row of ``X`` (numeric-split trees only)."""
    n = X.shape[0]
    nodes = np.zeros(n, dtype=np.int64)
    active = feature[nodes] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        cur = nodes[idx]
        f = feature[cur]
        goes_left = X[idx, f] <= threshold[cur]
        nodes[idx] = np.where(goes_left, left[cur], right[cur])
        active = feature[nodes] >= 0
    return nodes


def knn_distances(
    values: np.ndarray,
    query_rows: np.ndarray,
    scale: np.ndarray,
    is_cat: np.ndarray,
) -> np.ndarray:
    """Row-to-row distances over mutually observed coordinates.

    ``values`` holds NaN at missing cells; numeric coordinates are divided by
    ``scale``, categorical ones contribute 0/1 mismatch.  The distance is the
    root of the mean squared contribution; +inf when no coordinate is shared.
    """
    n, d = values.shape
    out = np.empty((query_rows.size, n), dtype=np.float64)
    obs = ~np.isnan(values)
    for qi, i in enumerate(query_rows):
        acc = np.zeros(n, dtype=np.float64)
        cnt = np.zeros(n, dtype=np.int64)
        for c in range(d):
            a = values[i, c]
            if np.isnan(a):
                continue
            both = obs[:, c]
            if is_cat[c]:
                contrib = (values[:, c] != a).astype(np.float64)
            else:
                diff = (a - values[:, c]) / scale[c]
                contrib = diff * diff
            acc += np.where(both, contrib, 0.0)
            cnt += both
        with np.errstate(invalid="ignore"):
            dist = np.sqrt(acc / cnt)
        dist[cnt == 0] = np.inf
        out[qi] = dist
    return out
