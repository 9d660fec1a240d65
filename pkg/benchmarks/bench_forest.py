"""Benchmark the forest's numba kernels against the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_forest.py [--samples 4000] [--trees 60]

Runs forest training and batch prediction through both kernel backends and
checks that they produce bit-identical forests. Setting PROMPTGATE_NO_NUMBA=1
(or missing numba) limits the run to the numpy path, matching what the
library itself would use.
"""

from __future__ import annotations

import argparse
import json
import time


import promptgate._kernels as kernels
from promptgate.corpus import generate_synthetic_corpus
from promptgate.features import features_matrix
from promptgate.forest import ForestConfig, forest_to_dict, predict_proba_matrix, train_forest_arrays

PROFILES = ("digits", "symbols", "prose", "code", "shouty", "airy")


def build_dataset(samples: int, seed: int = 0):
    per_tag = max(1, samples // len(PROFILES))
    spec = {
        f"d{i}": {"count": per_tag, "label_ratio": 0.5, "structural_profile": p}
        for i, p in enumerate(PROFILES)
    }
    corpus = generate_synthetic_corpus(spec, seed=seed)
    X = features_matrix([p.prompt for p in corpus])
    labels = [p.dataset_tag for p in corpus]
    return X, labels


def time_backend(X, labels, config, repeat: int = 3):
    names = tuple(f"f{i}" for i in range(X.shape[1]))
    train_times = []
    predict_times = []
    forest = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        forest = train_forest_arrays(X, labels, names, config)
        train_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        predict_proba_matrix(forest, X)
        predict_times.append(time.perf_counter() - t0)
    return min(train_times), min(predict_times), forest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=4000)
    parser.add_argument("--trees", type=int, default=60)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    X, labels = build_dataset(args.samples)
    config = ForestConfig(tree_count=args.trees, seed=7)
    print(f"dataset: {X.shape[0]} samples x {X.shape[1]} features, {args.trees} trees")

    results = {}
    if kernels.HAVE_NUMBA:
        # warm the JIT before timing
        train_forest_arrays(X[:200], labels[:200], tuple(f"f{i}" for i in range(X.shape[1])), ForestConfig(tree_count=2, seed=0))
        train, predict, numba_forest = time_backend(X, labels, config, args.repeat)
        results["numba"] = (train, predict)
        print(f"numba   : train {train:8.3f}s   predict {predict:8.3f}s")
    else:
        numba_forest = None
        print("numba   : unavailable (PROMPTGATE_NO_NUMBA set or numba missing)")

    saved_split, saved_leaf = kernels.best_split, kernels.predict_leaf
    kernels.best_split = kernels._best_split_vector
    kernels.predict_leaf = kernels._predict_leaf_vector
    try:
        train, predict, numpy_forest = time_backend(X, labels, config, args.repeat)
    finally:
        kernels.best_split, kernels.predict_leaf = saved_split, saved_leaf
    results["numpy"] = (train, predict)
    print(f"numpy   : train {train:8.3f}s   predict {predict:8.3f}s")

    if "numba" in results:
        speedup_train = results["numpy"][0] / results["numba"][0]
        speedup_pred = results["numpy"][1] / results["numba"][1]
        print(f"speedup : train {speedup_train:7.2f}x   predict {speedup_pred:7.2f}x")
        identical = json.dumps(forest_to_dict(numba_forest)) == json.dumps(forest_to_dict(numpy_forest))
        print(f"backends produce bit-identical forests: {identical}")
        if not identical:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
