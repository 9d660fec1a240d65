"""Feature-correlation analysis and redundancy pruning for the router.

Spearman rank correlation identifies multicollinear features; agglomerative
Ward clustering over the distance 1 - |rho| groups them, and one
representative per cluster below a distance cut is kept. Negatively
correlated pairs carry the same information, hence the absolute value in
the distance transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MergeStep:
    cluster_a: int
    cluster_b: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Ordered agglomerative merges; leaves are 0..n-1, merge i creates id n+i."""

    n_leaves: int
    steps: tuple[MergeStep, ...]


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1 with ties assigned the average of their positions."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_matrix(columns: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Pairwise Spearman rho with midrank tie handling.

    Constant columns have rho defined as 0 against every other column;
    the diagonal is always 1.
    """
    cols = [np.asarray(c, dtype=np.float64) for c in columns]
    if any(len(c) != len(cols[0]) for c in cols):
        raise ValueError("all columns must have equal length")
    if len(cols[0]) < 2:
        raise ValueError("need at least 2 observations per column")

    d = len(cols)
    ranks = [_midranks(c) for c in cols]
    constant = [bool(np.all(c == c[0])) for c in cols]
    out = np.eye(d, dtype=np.float64)
    for i in range(d):
        for j in range(i + 1, d):
            if constant[i] or constant[j]:
                rho = 0.0
            else:
                ri = ranks[i] - ranks[i].mean()
                rj = ranks[j] - ranks[j].mean()
                rho = float(np.dot(ri, rj) / math.sqrt(np.dot(ri, ri) * np.dot(rj, rj)))
            out[i, j] = out[j, i] = rho
    return out


def ward_cluster(correlations: np.ndarray) -> Dendrogram:
    """Ward-linkage agglomeration over the distance matrix 1 - |rho|.

    Cluster distances follow the Lance-Williams recurrence on squared
    distances; candidate-merge ties break on the lowest (a, b) id pair.
    """
    corr = np.asarray(correlations, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")

    n = corr.shape[0]
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = 1.0 - abs(corr[i, j])

    sizes: dict[int, int] = {i: 1 for i in range(n)}
    active = set(range(n))
    steps: list[MergeStep] = []
    next_id = n

    def d(a: int, b: int) -> float:
        return dist[(a, b) if a < b else (b, a)]

    while len(active) > 1:
        best_pair = None
        best_dist = math.inf
        for a in sorted(active):
            for b in sorted(active):
                if b <= a:
                    continue
                dd = d(a, b)
                if dd < best_dist:
                    best_dist = dd
                    best_pair = (a, b)
        a, b = best_pair
        new = next_id
        next_id += 1
        na, nb = sizes[a], sizes[b]
        sizes[new] = na + nb
        for k in active:
            if k in (a, b):
                continue
            nk = sizes[k]
            dak, dbk, dab = d(a, k), d(b, k), best_dist
            t = na + nb + nk
            sq = ((na + nk) * dak * dak + (nb + nk) * dbk * dbk - nk * dab * dab) / t
            dist[(min(k, new), max(k, new))] = math.sqrt(max(sq, 0.0))
        active.discard(a)
        active.discard(b)
        active.add(new)
        steps.append(MergeStep(a, b, best_dist, sizes[new]))

    return Dendrogram(n_leaves=n, steps=tuple(steps))


def select_representatives(
    dendrogram: Dendrogram, cut_distance: float, feature_names: Sequence[str]
) -> list[str]:
    """One feature per cluster at the cut; merges above the cut are discarded.

    The representative is the cluster member appearing earliest in
    ``feature_names``, and the result preserves ``feature_names`` order.
    """
    if cut_distance < 0:
        raise ValueError("cut_distance must be >= 0")
    n = dendrogram.n_leaves
    if len(feature_names) != n:
        raise ValueError("feature_names length must match dendrogram leaves")

    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, step in enumerate(dendrogram.steps):
        if step.distance <= cut_distance:
            new = n + i
            parent[find(step.cluster_a)] = new
            parent[find(step.cluster_b)] = new

    seen_roots: set[int] = set()
    kept: list[str] = []
    for leaf in range(n):
        root = find(leaf)
        if root not in seen_roots:
            seen_roots.add(root)
            kept.append(feature_names[leaf])
    return kept


def prune_features(
    X: np.ndarray, feature_names: Sequence[str], cut_distance: float = 0.7
) -> list[str]:
    """Full pipeline: Spearman matrix -> Ward dendrogram -> representatives."""
    corr = spearman_matrix(np.asarray(X, dtype=np.float64).T)
    dendro = ward_cluster(corr)
    return select_representatives(dendro, cut_distance, feature_names)
