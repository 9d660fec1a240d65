"""From-scratch random-forest classifier used as the prompt router.

CART trees grown on bootstrap resamples with Gini-impurity splits over a
random feature subset per node. Training is deterministic: tree ``i`` draws
everything from a generator seeded with ``config.seed + i``, so identical
inputs produce bit-identical forests regardless of the kernel backend.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from promptgate import _kernels
from promptgate.features import FEATURE_NAMES, FeatureVector

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters; defaults are standard random-forest settings."""

    tree_count: int = 100
    max_depth: int | None = 16
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 1:
            raise ValueError("min_samples_split must be >= 1")
        if not (0.0 < self.bootstrap_fraction <= 1.0):
            raise ValueError("bootstrap_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "tree_count": self.tree_count,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "features_per_split": self.features_per_split,
            "bootstrap_fraction": self.bootstrap_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestConfig":
        return cls(**data)


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray  # int64 (n_nodes,)
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    n_samples: np.ndarray  # int64, samples reaching the node
    gain: np.ndarray  # float64, Gini decrease at the split (0 for leaves)
    counts: np.ndarray  # float64 (n_nodes, n_classes) class histogram


@dataclass
class Forest:
    config: ForestConfig
    feature_names: tuple[str, ...]
    class_labels: tuple[str, ...]
    trees: list[Tree] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    config: ForestConfig,
    tree_index: int,
) -> Tree:
    rng = np.random.default_rng(config.seed + tree_index)
    n_total, d = X.shape
    m = max(1, int(round(config.bootstrap_fraction * n_total)))
    sample_idx = rng.integers(0, n_total, size=m, dtype=np.int64)

    fps = config.features_per_split or math.ceil(math.sqrt(d))
    fps = min(fps, d)
    max_depth = config.max_depth if config.max_depth is not None else np.iinfo(np.int64).max

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    n_samples: list[int] = []
    gain: list[float] = []
    counts: list[np.ndarray] = []

    def new_node(idx: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_samples.append(int(idx.size))
        gain.append(0.0)
        counts.append(np.bincount(y[idx], minlength=n_classes).astype(np.float64))
        return node

    root = new_node(sample_idx)
    # LIFO stack, right child pushed first so the left subtree is grown first.
    stack: list[tuple[int, np.ndarray, int]] = [(root, sample_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        node_counts = counts[node]
        if (
            idx.size < config.min_samples_split
            or depth >= max_depth
            or np.count_nonzero(node_counts) <= 1
        ):
            continue
        cand = rng.choice(d, size=fps, replace=False).astype(np.int64)
        feat, thr, split_gain = _kernels.best_split(X, y, idx, cand, n_classes)
        if feat < 0:
            continue
        mask = X[idx, feat] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        feature[node] = int(feat)
        threshold[node] = float(thr)
        gain[node] = float(split_gain)
        left_node = new_node(left_idx)
        right_node = new_node(right_idx)
        left[node] = left_node
        right[node] = right_node
        stack.append((right_node, right_idx, depth + 1))
        stack.append((left_node, left_idx, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        gain=np.asarray(gain, dtype=np.float64),
        counts=np.vstack(counts),
    )


def train_forest_arrays(
    X: np.ndarray,
    labels: Sequence[str],
    feature_names: Sequence[str],
    config: ForestConfig | None = None,
) -> Forest:
    """Train on a prepared (n, d) matrix with one class label per row."""
    config = config or ForestConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("X must be (n, d) with one label per row")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if X.shape[1] != len(feature_names):
        raise ValueError("feature_names must match the feature dimension")
    if config.features_per_split is not None and config.features_per_split > X.shape[1]:
        raise ValueError("features_per_split exceeds the feature dimension")

    class_labels = tuple(sorted(set(labels)))
    code = {label: i for i, label in enumerate(class_labels)}
    y = np.asarray([code[label] for label in labels], dtype=np.int64)

    forest = Forest(config=config, feature_names=tuple(feature_names), class_labels=class_labels)
    for t in range(config.tree_count):
        forest.trees.append(_grow_tree(X, y, len(class_labels), config, t))
    return forest


def train_forest(
    samples: Iterable[tuple[FeatureVector, str]],
    config: ForestConfig | None = None,
    feature_names: Sequence[str] = FEATURE_NAMES,
) -> Forest:
    """Train from (FeatureVector, dataset-class) pairs on the named features."""
    pairs = list(samples)
    if not pairs:
        raise ValueError("empty sample set")
    X = np.vstack([fv.as_array(feature_names) for fv, _ in pairs])
    labels = [label for _, label in pairs]
    return train_forest_arrays(X, labels, feature_names, config)


def predict_proba_matrix(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean of per-tree leaf class frequencies, shape (n, n_classes)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(
            f"expected feature dimension {forest.n_features}, got {X.shape[1] if X.ndim == 2 else X.shape}"
        )
    acc = np.zeros((X.shape[0], len(forest.class_labels)), dtype=np.float64)
    for tree in forest.trees:
        leaves = _kernels.predict_leaf(tree.feature, tree.threshold, tree.left, tree.right, X)
        leaf_counts = tree.counts[leaves]
        acc += leaf_counts / leaf_counts.sum(axis=1, keepdims=True)
    return acc / len(forest.trees)


def _as_row(forest: Forest, fv: FeatureVector | np.ndarray | Sequence[float]) -> np.ndarray:
    if isinstance(fv, FeatureVector):
        return fv.as_array(forest.feature_names).reshape(1, -1)
    arr = np.asarray(fv, dtype=np.float64).reshape(1, -1)
    return arr


def predict(forest: Forest, fv: FeatureVector | np.ndarray | Sequence[float]) -> tuple[str, dict[str, float]]:
    """Predicted class plus the full class distribution; argmax ties go to the lowest class index."""
    proba = predict_proba_matrix(forest, _as_row(forest, fv))[0]
    winner = forest.class_labels[int(np.argmax(proba))]
    return winner, {label: float(p) for label, p in zip(forest.class_labels, proba)}


def predict_classes(forest: Forest, X: np.ndarray) -> list[str]:
    proba = predict_proba_matrix(forest, X)
    return [forest.class_labels[i] for i in np.argmax(proba, axis=1)]


def accuracy(forest: Forest, X: np.ndarray, labels: Sequence[str]) -> float:
    if len(labels) == 0:
        return 0.0
    predicted = predict_classes(forest, X)
    return sum(p == t for p, t in zip(predicted, labels)) / len(labels)


def feature_importance(forest: Forest) -> dict[str, float]:
    """Gini-decrease importance weighted by node sample counts, normalized to 1."""
    raw = np.zeros(forest.n_features, dtype=np.float64)
    for tree in forest.trees:
        root_n = float(tree.n_samples[0])
        split_nodes = np.nonzero(tree.feature >= 0)[0]
        for node in split_nodes:
            raw[tree.feature[node]] += (tree.n_samples[node] / root_n) * tree.gain[node]
    total = raw.sum()
    if total > 0:
        raw = raw / total
    return {name: float(v) for name, v in zip(forest.feature_names, raw)}


def forest_to_dict(forest: Forest) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": forest.config.to_dict(),
        "feature_names": list(forest.feature_names),
        "class_labels": list(forest.class_labels),
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "n_samples": tree.n_samples.tolist(),
                "gain": tree.gain.tolist(),
                "counts": tree.counts.tolist(),
            }
            for tree in forest.trees
        ],
    }


def forest_from_dict(data: dict) -> Forest:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported forest schema version: {version!r}")
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            n_samples=np.asarray(t["n_samples"], dtype=np.int64),
            gain=np.asarray(t["gain"], dtype=np.float64),
            counts=np.asarray(t["counts"], dtype=np.float64),
        )
        for t in data["trees"]
    ]
    return Forest(
        config=ForestConfig.from_dict(data["config"]),
        feature_names=tuple(data["feature_names"]),
        class_labels=tuple(data["class_labels"]),
        trees=trees,
    )


def save_forest(forest: Forest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(forest_to_dict(forest)), encoding="utf-8")


def load_forest(path: str | Path) -> Forest:
    return forest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
