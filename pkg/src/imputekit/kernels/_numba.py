"""Numba-jitted hot kernels.

Loop-for-loop mirror of ``_numpy.py``: same accumulation order, same stable
sorts, same tie-breaking, so both backends emit bit-identical trees, routes,
and distances.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _scan_sse(xs, ys, min_leaf):
    m = xs.size
    if m < 2 * min_leaf:
        return -1, np.inf
    total = 0.0
    total2 = 0.0
    for i in range(m):
        total += ys[i]
        total2 += ys[i] * ys[i]
    best_pos = -1
    best_cs = np.inf
    run = 0.0
    run2 = 0.0
    for i in range(1, m):
        v = ys[i - 1]
        run += v
        run2 += v * v
        if i < min_leaf or m - i < min_leaf:
            continue
        if not (xs[i - 1] < xs[i]):
            continue
        left_sse = run2 - run * run / i
        rs = total - run
        rs2 = total2 - run2
        right_sse = rs2 - rs * rs / (m - i)
        cs = left_sse + right_sse
        if cs < best_cs:
            best_cs = cs
            best_pos = i
    return best_pos, best_cs


@njit(cache=True)
def _scan_gini(xs, codes, n_classes, min_leaf):
    m = xs.size
    if m < 2 * min_leaf:
        return -1, np.inf
    total_cnt = np.zeros(n_classes, dtype=np.int64)
    for i in range(m):
        total_cnt[codes[i]] += 1
    st = np.int64(0)
    for k in range(n_classes):
        st += total_cnt[k] * total_cnt[k]
    run_cnt = np.zeros(n_classes, dtype=np.int64)
    sl = np.int64(0)  # sum of squared left counts, updated incrementally
    best_pos = -1
    best_cs = np.inf
    for i in range(1, m):
        c = codes[i - 1]
        sl += 2 * run_cnt[c] + 1
        run_cnt[c] += 1
        if i < min_leaf or m - i < min_leaf:
            continue
        if not (xs[i - 1] < xs[i]):
            continue
        sr = np.int64(0)
        for k in range(n_classes):
            rc = total_cnt[k] - run_cnt[k]
            sr += rc * rc
        cs = (i - sl / i) + ((m - i) - sr / (m - i))
        if cs < best_cs:
            best_cs = cs
            best_pos = i
    return best_pos, best_cs


@njit(cache=True)
def _impurity_sse(ys):
    total = 0.0
    total2 = 0.0
    for i in range(ys.size):
        total += ys[i]
        total2 += ys[i] * ys[i]
    return total2 - total * total / ys.size


@njit(cache=True)
def _impurity_gini(codes, n_classes):
    m = codes.size
    cnt = np.zeros(n_classes, dtype=np.int64)
    for i in range(m):
        cnt[codes[i]] += 1
    s = np.int64(0)
    for k in range(n_classes):
        s += cnt[k] * cnt[k]
    return m - s / m


def scan_split_sse(xs, ys, min_leaf):
    pos, cs = _scan_sse(xs, ys, min_leaf)
    return int(pos), float(cs)


def scan_split_gini(xs, codes, n_classes, min_leaf):
    pos, cs = _scan_gini(xs, codes, n_classes, min_leaf)
    return int(pos), float(cs)


@njit(cache=True)
def _build_tree(X, y, codes, criterion, n_classes, min_leaf, min_gain_frac, max_depth, feat_rand, mtry):
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

    order = np.arange(n)
    if criterion == 0:
        root_imp = _impurity_sse(y)
    else:
        root_imp = _impurity_gini(codes, n_classes)
    min_gain = min_gain_frac * root_imp

    node_s[0] = 0
    node_e[0] = n
    node_d[0] = 0
    n_nodes = 1
    node = 0
    xs = np.empty(n, dtype=np.float64)
    ysub = np.empty(n, dtype=np.float64)
    csub = np.empty(n, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    while node < n_nodes:
        s = node_s[node]
        e = node_e[node]
        depth = node_d[node]
        m = e - s
        if criterion == 0:
            for ii in range(m):
                ysub[ii] = y[order[s + ii]]
            imp = _impurity_sse(ysub[:m])
        else:
            for ii in range(m):
                csub[ii] = codes[order[s + ii]]
            imp = _impurity_gini(csub[:m], n_classes)
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
                prio = np.argsort(feat_rand[node], kind="mergesort")[:mtry]
                feats = np.sort(prio)
            else:
                feats = np.arange(p)
            for fi in range(feats.size):
                f = feats[fi]
                for ii in range(m):
                    xs[ii] = X[order[s + ii], f]
                srt = np.argsort(xs[:m], kind="mergesort")
                xs_s = xs[:m][srt]
                if criterion == 0:
                    ys_s = ysub[:m][srt]
                    pos, cs = _scan_sse(xs_s, ys_s, min_leaf)
                else:
                    cs_s = csub[:m][srt]
                    pos, cs = _scan_gini(xs_s, cs_s, n_classes, min_leaf)
                if pos >= 0 and cs < best_cs:
                    best_cs = cs
                    best_pos = pos
                    best_feat = f
                    a = xs_s[pos - 1]
                    b = xs_s[pos]
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr
        if best_feat >= 0 and (imp - best_cs) > min_gain:
            cl = 0
            for ii in range(m):
                r = order[s + ii]
                if X[r, best_feat] <= best_thr:
                    tmp[cl] = r
                    cl += 1
            cr = cl
            for ii in range(m):
                r = order[s + ii]
                if not (X[r, best_feat] <= best_thr):
                    tmp[cr] = r
                    cr += 1
            for ii in range(m):
                order[s + ii] = tmp[ii]
            n_left = cl
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


def build_tree(X, y, codes, criterion, n_classes, min_leaf, min_gain_frac, max_depth, feat_rand, mtry):
    out = _build_tree(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(codes, dtype=np.int64),
        criterion,
        n_classes,
        min_leaf,
        min_gain_frac,
        max_depth,
        np.ascontiguousarray(feat_rand, dtype=np.float64),
        mtry,
    )
    return out[:7] + (int(out[7]),)


@njit(cache=True)
def _route_rows(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


def route_rows(X, feature, threshold, left, right):
    return _route_rows(np.ascontiguousarray(X, dtype=np.float64), feature, threshold, left, right)


@njit(cache=True)
def _knn_distances(values, query_rows, scale, is_cat):
    n, d = values.shape
    out = np.empty((query_rows.size, n), dtype=np.float64)
    for qi in range(query_rows.size):
        i = query_rows[qi]
        for j in range(n):
            acc = 0.0
            cnt = 0
            for c in range(d):
                a = values[i, c]
                b = values[j, c]
                if np.isnan(a) or np.isnan(b):
                    continue
                if is_cat[c]:
                    contrib = 0.0 if a == b else 1.0
                else:
                    diff = (a - b) / scale[c]
                    contrib = diff * diff
                acc += contrib
                cnt += 1
            if cnt == 0:
                out[qi, j] = np.inf
            else:
                out[qi, j] = np.sqrt(acc / cnt)
    return out


def knn_distances(values, query_rows, scale, is_cat):
    return _knn_distances(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(query_rows, dtype=np.int64),
        np.ascontiguousarray(scale, dtype=np.float64),
        np.ascontiguousarray(is_cat, dtype=np.bool_),
    )
