"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance is pinned here; none are calibrated at runtime.
"""

import json
import math
import threading
import time

import numpy as np
import pytest

from promptgate.backends import specialist_profile
from promptgate.calibration import calibrate_threshold
from promptgate.cluster import prune_features
from promptgate.corpus import generate_synthetic_corpus, write_corpus
from promptgate.ensemble import select_subset
from promptgate.evaluation import ConfusionMatrix, metrics, run_adaptability_sweep
from promptgate.experiments import StubSpec, assemble_system, build_arrivals, run_selection_experiment
from promptgate.features import FEATURE_NAMES, extract_features, features_matrix
from promptgate.forest import ForestConfig, accuracy, train_forest_arrays
from promptgate.gateway import GatewayService, load_config


from oracles import brute_force_features, brute_force_metrics, exhaustive_best_f1_fast, gen_unimodal_scoreset

NINE_PROFILES = ("digits", "symbols", "prose", "code", "shouty", "airy", "terse", "longwords", "lowent")


def _report(criterion: int, message: str) -> None:
    print(f"\n[criterion {criterion}] PASS  {message}")


# -- 1. feature oracle -------------------------------------------------------

_ALPHABETS = (
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "0123456789",
    " \t\n\r\u00a0\u2003\u2028",
    "!@#$%^&*()[]{}<>~`'\"\\|/.,;:-_=+",
    "äöüßéñçøπλΩ漢字日本語한국어",
    "🎉🚀💥🤖🙂",
)


def _random_string(rng: np.random.Generator) -> str:
    length = int(rng.integers(0, 300))
    chars = []
    for _ in range(length):
        pool = _ALPHABETS[int(rng.integers(0, len(_ALPHABETS)))]
        chars.append(pool[int(rng.integers(0, len(pool)))])
    return "".join(chars)


def test_criterion_1_feature_oracle():
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    int_fields = ("prompt_length", "code_keyword_count", "nl_word_count")
    for _ in range(1000):
        text = _random_string(rng)
        got = extract_features(text).to_dict()
        want = brute_force_features(text)
        for name in FEATURE_NAMES:
            if name in int_fields:
                assert got[name] == want[name], (name, text)
            else:
                assert got[name] == pytest.approx(want[name], abs=1e-12), (name, text)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _report(1, f"1000 random strings match the brute-force oracle exactly ({elapsed:.2f}s < 5s)")


# -- 2. calibration oracle ---------------------------------------------------


def test_criterion_2_calibration_oracle():
    started = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        pairs = gen_unimodal_scoreset(seed)
        assert 50 <= len(pairs) <= 5000
        report = calibrate_threshold(pairs)
        assert report.evaluation_count == 20
        _, brute = exhaustive_best_f1_fast(pairs, step=0.001)
        deficit = brute - report.best_f1
        worst = max(worst, deficit)
        assert deficit <= 0.005, (seed, deficit)
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    _report(2, f"200 unimodal sets: two-stage F1 within 0.005 of exhaustive search "
               f"(worst deficit {worst:.4f}), 20 evaluations each ({elapsed:.2f}s < 30s)")


# -- 3. metrics --------------------------------------------------------------


def test_criterion_3_metrics_oracle():
    rng = np.random.default_rng(3003)
    for _ in range(1000):
        tp = int(rng.integers(1, 200))  # tp + fn >= 1 keeps asr + recall defined
        fn = int(rng.integers(0, 200))
        fp = int(rng.integers(0, 200))
        tn = int(rng.integers(0, 200))
        asr, fpr, f1, precision, recall = metrics(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
        want = brute_force_metrics(tp, fp, tn, fn)
        assert (asr, fpr, f1, precision, recall) == (
            want["asr"], want["fpr"], want["f1"], want["precision"], want["recall"],
        )
        assert asr + recall == 1.0
    _report(3, "1000 random confusion matrices match direct formula recomputation; asr + recall = 1")


# -- shared k=9 stub system ---------------------------------------------------


@pytest.fixture(scope="module")
def nine_system():
    tags = tuple(f"d{i+1}" for i in range(9))
    datasets = {
        tag: {"count": 240, "label_ratio": 0.5, "structural_profile": profile}
        for tag, profile in zip(tags, NINE_PROFILES)
    }
    stub = StubSpec(noise_sigma=0.1, seed=11)
    arrivals = build_arrivals(datasets, stub, seed=11)
    state, globals_ = assemble_system(arrivals, ForestConfig(tree_count=50, seed=11), selection_size=5, seed=11)
    return state, globals_, datasets


# -- 4. selection contract ----------------------------------------------------


def test_criterion_4_selection_contract(nine_system):
    state, globals_, _ = nine_system
    assert state.k == 9
    n = 5
    probes = [extract_features(p.prompt) for p in globals_.calibration[:10]]

    from promptgate.ensemble import route

    routed = [route(state, fv) for fv in probes]
    draws = 10_000
    counts = {m.id: 0 for m in state.members}
    for i in range(draws):
        fv = probes[i % len(probes)]
        subset = select_subset(state, fv, strategy="router", request_seed=i, n=n)
        ids = [m.id for m in subset]
        assert len(ids) == n and len(set(ids)) == n
        assert any(m.dataset_tag == routed[i % len(probes)] for m in subset)

        subset = select_subset(state, fv, strategy="random", request_seed=i, n=n)
        ids = [m.id for m in subset]
        assert len(ids) == n and len(set(ids)) == n
        for member_id in ids:
            counts[member_id] += 1

    p = n / state.k
    sigma = math.sqrt(draws * p * (1 - p))
    deviations = {mid: abs(c - draws * p) / sigma for mid, c in counts.items()}
    assert max(deviations.values()) <= 3.0, deviations
    _report(4, f"10,000 draws at (k=9, n=5): subsets valid, router member always included, "
               f"random frequencies within {max(deviations.values()):.2f}σ of n/k (limit 3σ)")


# -- 5. router learnability + pruning -----------------------------------------


def test_criterion_5_router_learnability_and_pruning():
    spec = {
        tag: {"count": 500, "label_ratio": 0.5, "structural_profile": profile}
        for tag, profile in (("d1", "digits"), ("d2", "symbols"), ("d3", "prose"), ("d4", "code"))
    }
    corpus = generate_synthetic_corpus(spec, seed=31)
    assert len(corpus) == 2000
    labels = [p.dataset_tag for p in corpus]
    X9 = features_matrix([p.prompt for p in corpus])

    rng = np.random.default_rng(31)
    order = rng.permutation(len(corpus))
    train, test = order[:1500], order[1500:]
    config = ForestConfig(tree_count=60, seed=31)

    base = train_forest_arrays(X9[train], [labels[i] for i in train], FEATURE_NAMES, config)
    base_accuracy = accuracy(base, X9[test], [labels[i] for i in test])
    assert base_accuracy >= 0.95

    names11 = FEATURE_NAMES + ("prompt_length_dup", "shannon_entropy_dup")
    X11 = np.column_stack([X9, X9[:, 0], X9[:, 8]])
    full = train_forest_arrays(X11[train], [labels[i] for i in train], names11, config)
    full_accuracy = accuracy(full, X11[test], [labels[i] for i in test])

    kept = prune_features(X11[train], names11, cut_distance=0.7)
    # Each exact-duplicate pair collapses to a single representative (which
    # may itself be pruned away when its whole cluster keeps another feature).
    assert not ("prompt_length" in kept and "prompt_length_dup" in kept)
    assert not ("shannon_entropy" in kept and "shannon_entropy_dup" in kept)
    assert len(kept) <= len(FEATURE_NAMES)

    idx = [names11.index(name) for name in kept]
    pruned = train_forest_arrays(X11[train][:, idx], [labels[i] for i in train], tuple(kept), config)
    pruned_accuracy = accuracy(pruned, X11[test][:, idx], [labels[i] for i in test])
    assert full_accuracy - pruned_accuracy <= 0.03
    _report(5, f"4-class router accuracy {base_accuracy:.3f} >= 0.95; pruning 11 -> {len(kept)} features "
               f"collapses duplicates, accuracy drop {full_accuracy - pruned_accuracy:.4f} <= 0.03")


# -- 6. selection-efficiency analogue -----------------------------------------


def test_criterion_6_selection_sweep_analogue(nine_system):
    _, _, datasets = nine_system
    started = time.perf_counter()
    spec = {
        "datasets": datasets,
        "stub": {"own_malicious": 0.95, "cross_malicious": 0.6, "own_benign": 0.1,
                 "cross_benign": 0.3, "noise_sigma": 0.1, "seed": 11},
        "forest": {"tree_count": 50, "seed": 11},
        "seed": 11,
        "selection_size": 5,
        "strategies": ["router", "ideal"],
    }
    records = run_selection_experiment(spec)
    by = {(r.strategy, r.n): r for r in records}
    for n in range(1, 10):
        diff = abs(by[("router", n)].f1 - by[("ideal", n)].f1)
        assert diff <= 0.03, (n, diff)
    saturation = abs(by[("router", 5)].f1 - by[("router", 9)].f1)
    assert saturation <= 0.02
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    _report(6, f"router F1 within 0.03 of ideal at every n in 1..9; |F1(n=5) - F1(n=9)| = "
               f"{saturation:.4f} <= 0.02 ({elapsed:.1f}s < 120s)")


# -- 7. adaptability analogue --------------------------------------------------


def test_criterion_7_adaptability_sweep_analogue():
    tags = tuple(f"d{i+1}" for i in range(9))
    datasets = {
        tag: {"count": 200, "label_ratio": 0.5, "structural_profile": profile}
        for tag, profile in zip(tags, NINE_PROFILES)
    }
    arrivals = build_arrivals(datasets, StubSpec(noise_sigma=0.1, seed=21), seed=21)
    records = run_adaptability_sweep(
        arrivals,
        initial_k=3,
        n_values=lambda k: [min(5, k)],
        forest_config=ForestConfig(tree_count=50, seed=21),
        calibration_n=lambda k: min(5, k),
        seed=21,
    )
    assert [r.k for r in records] == list(range(3, 10))
    worst = min(r.f1 for r in records)
    for r in records:
        assert r.n == min(5, r.k)
        assert r.f1 >= 0.90, (r.k, r.f1)
    _report(7, f"k=3..9 with per-step recalibration: F1 at n=min(5,k) stays >= 0.90 (worst {worst:.4f})")


# -- 8. update atomicity --------------------------------------------------------


def test_criterion_8_update_atomicity(tmp_path):
    tags = ("d1", "d2", "d3")
    all_tags = tags + ("d4",)
    profiles = dict(zip(all_tags, ("digits", "symbols", "prose", "code")))
    spec = {t: {"count": 600, "label_ratio": 0.5, "structural_profile": profiles[t]} for t in all_tags}
    corpus = generate_synthetic_corpus(spec, seed=41)
    corpus_paths = []
    for tag in all_tags:
        path = tmp_path / f"{tag}.jsonl"
        write_corpus([p for p in corpus if p.dataset_tag == tag], path)
        corpus_paths.append(path.name)
    members = []
    for i, tag in enumerate(tags):
        profile = specialist_profile(tag, all_tags, noise_sigma=0.0, seed=41 + i)
        members.append({
            "id": f"cop-{tag}", "dataset_tag": tag,
            "backend": {"kind": "stub", "profile": profile.to_dict(), "corpus_paths": corpus_paths},
        })
    config_path = tmp_path / "gateway.json"
    config_path.write_text(json.dumps({
        "seed": 41,
        "selection_size": 2,
        "strategy": "router",
        "forest": {"tree_count": 30, "seed": 41},
        "members": members,
        "datasets": [{"tag": t, "path": f"{t}.jsonl"} for t in tags],
    }), encoding="utf-8")
    service = GatewayService(load_config(config_path), base_dir=tmp_path)

    old_threshold = service.health()["threshold"]
    prompts = [p.prompt for p in corpus if p.dataset_tag in tags][:64]
    workers = 8
    barrier = threading.Barrier(workers + 1)
    update_done = threading.Event()
    results = []
    lock = threading.Lock()

    def hammer(worker: int):
        barrier.wait()
        local = []
        i = 0
        after_update = 0
        while after_update < 10:  # keep going until well past the swap
            t0 = time.perf_counter()
            r = service.classify_request(prompts[(worker + i) % len(prompts)], request_seed=i)
            local.append((t0, time.perf_counter(), r))
            i += 1
            if update_done.is_set():
                after_update += 1
        with lock:
            results.extend(local)

    update_window = {}

    def updater():
        barrier.wait()
        time.sleep(0.05)
        update_window["start"] = time.perf_counter()
        # d4 scores cross-dataset benign prompts higher, moving the threshold
        profile = specialist_profile("d4", all_tags, cross_benign=0.55, noise_sigma=0.0, seed=99)
        update_window["result"] = service.handle_update(
            "d4.jsonl", "d4",
            {"kind": "stub", "profile": profile.to_dict(), "corpus_paths": corpus_paths},
        )
        update_window["end"] = time.perf_counter()
        update_done.set()

    threads = [threading.Thread(target=hammer, args=(w,)) for w in range(workers)]
    update_thread = threading.Thread(target=updater)
    for t in threads + [update_thread]:
        t.start()
    for t in threads + [update_thread]:
        t.join()

    new_threshold = update_window["result"]["threshold"]
    assert new_threshold != old_threshold

    overlapping = [r for t0, t1, r in results if t1 >= update_window["start"] and t0 <= update_window["end"]]
    assert len(overlapping) >= 1000, f"only {len(overlapping)} requests overlapped the update"
    mixed = 0
    for _, _, r in results:
        assert r["threshold"] in (old_threshold, new_threshold)
        if r["threshold"] == old_threshold and "cop-d4" in r["selected"]:
            mixed += 1
    assert mixed == 0
    seen = {r["threshold"] for _, _, r in results}
    assert seen == {old_threshold, new_threshold}, "no overlap: concurrency check was vacuous"
    _report(8, f"{len(overlapping)} concurrent classifications during the update "
               f"({len(results)} total): 0 mixed-state responses; both snapshots observed")
