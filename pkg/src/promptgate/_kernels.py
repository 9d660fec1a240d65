"""Hot inner loops for forest training and prediction.

Two interchangeable backends:

* a scalar-loop implementation compiled with numba ``@njit`` (default), and
* a vectorized pure-numpy fallback, selected by setting the environment
  variable ``PROMPTGATE_NO_NUMBA=1`` (or automatically when numba is
  unavailable).

Both backends are written to produce bit-identical results: reductions over
class counts accumulate in the same order, gains share one expression tree,
and split thresholds use the same midpoint arithmetic, so a forest trained on
either path serializes to the same bytes. ``benchmarks/bench_forest.py``
compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("PROMPTGATE_NO_NUMBA", "").lower() in {"1", "true", "yes"}

try:  # pragma: no cover - absence of numba is environment-specific
    if _DISABLED:
        raise ImportError("numba disabled via PROMPTGATE_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    HAVE_NUMBA = False


def _best_split_scalar(X, y, idx, candidates, n_classes):
    """Best Gini split for the node holding rows ``idx``.

    Scans candidate features in array order and boundaries in ascending
    value order; ties keep the first strictly better split. Returns
    ``(feature, threshold, gain)`` with feature -1 when no split improves
    on the parent impurity.
    """
    m = idx.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    if m < 2:
        return best_feat, best_thr, best_gain

    total = np.zeros(n_classes, dtype=np.float64)
    for i in range(m):
        total[y[idx[i]]] += 1.0
    nf = float(m)
    sq = 0.0
    for c in range(n_classes):
        p = total[c] / nf
        sq += p * p
    gini_parent = 1.0 - sq

    vals = np.empty(m, dtype=np.float64)
    cls = np.empty(m, dtype=np.int64)
    left = np.empty(n_classes, dtype=np.float64)

    for ci in range(candidates.shape[0]):
        f = candidates[ci]
        for i in range(m):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        for i in range(m):
            cls[i] = y[idx[order[i]]]
        for c in range(n_classes):
            left[c] = 0.0
        nl = 0.0
        for i in range(m - 1):
            left[cls[i]] += 1.0
            nl += 1.0
            v_lo = vals[order[i]]
            v_hi = vals[order[i + 1]]
            if v_hi > v_lo:
                nr = nf - nl
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    pl = left[c] / nl
                    sl += pl * pl
                    pr = (total[c] - left[c]) / nr
                    sr += pr * pr
                gain = gini_parent - (nl / nf) * (1.0 - sl) - (nr / nf) * (1.0 - sr)
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (v_lo + v_hi)
    return best_feat, best_thr, best_gain


def _best_split_vector(X, y, idx, candidates, n_classes):
    """Vectorized twin of :func:`_best_split_scalar` (same results, bit for bit)."""
    m = idx.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    if m < 2:
        return best_feat, best_thr, best_gain

    yc = y[idx]
    total = np.bincount(yc, minlength=n_classes).astype(np.float64)
    nf = float(m)
    sq = 0.0
    for c in range(n_classes):
        p = total[c] / nf
        sq += p * p
    gini_parent = 1.0 - sq

    nl = np.arange(1, m, dtype=np.float64)
    nr = nf - nl

    for f in candidates:
        vals = X[idx, f]
        order = np.argsort(vals, kind="mergesort")
        vs = vals[order]
        valid = vs[1:] > vs[:-1]
        if not valid.any():
            continue
        onehot = np.zeros((m, n_classes), dtype=np.float64)
        onehot[np.arange(m), yc[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        # Accumulate the class reduction in index order to mirror the scalar loop.
        sl = np.zeros(m - 1, dtype=np.float64)
        sr = np.zeros(m - 1, dtype=np.float64)
        for c in range(n_classes):
            pl = left[:, c] / nl
            sl += pl * pl
            pr = (total[c] - left[:, c]) / nr
            sr += pr * pr
        gains = gini_parent - (nl / nf) * (1.0 - sl) - (nr / nf) * (1.0 - sr)
        feat_best = gains[valid].max()
        if feat_best > best_gain:
            i = int(np.nonzero(valid & (gains == feat_best))[0][0])
            best_gain = float(feat_best)
            best_feat = int(f)
            best_thr = 0.5 * (vs[i] + vs[i + 1])
    return best_feat, best_thr, best_gain


def _predict_leaf_scalar(feature, threshold, left, right, X):
    """Leaf index reached by each row of X; internal nodes route on x <= thr."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _predict_leaf_vector(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        nxt = np.where(go_left, left[nd], right[nd])
        node[rows] = nxt
        active[rows] = feature[nxt] >= 0
    return node


if HAVE_NUMBA:
    best_split = njit(cache=True)(_best_split_scalar)
    predict_leaf = njit(cache=True)(_predict_leaf_scalar)
    USING_NUMBA = True
else:
    best_split = _best_split_vector
    predict_leaf = _predict_leaf_vector
    USING_NUMBA = False
