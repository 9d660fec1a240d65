import numpy as np
import pytest

from promptgate.backends import StubBackend, specialist_profile
from promptgate.corpus import GlobalSets, generate_synthetic_corpus, partition_dataset, update_global_sets
from promptgate.ensemble import EnsembleState, PromptCop
from promptgate.evaluation import (
    CSV_HEADER,
    ConfusionMatrix,
    DatasetArrival,
    SweepRecord,
    emit_report,
    evaluate_on,
    metrics,
    parse_report,
    run_adaptability_sweep,
    run_selection_sweep,
)
from promptgate.forest import ForestConfig
from promptgate.calibration import recalibrate

from oracles import brute_force_metrics


def test_metrics_hand_example():
    asr, fpr, f1, precision, recall = metrics(ConfusionMatrix(tp=9, fn=1, fp=2, tn=8))
    assert asr == pytest.approx(0.1)
    assert fpr == pytest.approx(0.2)
    assert f1 == pytest.approx(18 / 21)
    assert precision == pytest.approx(9 / 11)
    assert recall == pytest.approx(0.9)


def test_metrics_perfect_and_degenerate():
    assert metrics(ConfusionMatrix(tp=5))[:3] == (0.0, 0.0, 1.0)
    assert metrics(ConfusionMatrix()) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_metrics_match_brute_force_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(300):
        tp, fp, tn, fn = (int(x) for x in rng.integers(0, 50, size=4))
        got = metrics(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
        want = brute_force_metrics(tp, fp, tn, fn)
        assert got == (want["asr"], want["fpr"], want["f1"], want["precision"], want["recall"])
        if tp + fn > 0:
            assert got[0] + got[4] == pytest.approx(1.0)


def test_confusion_matrix_rejects_negatives():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


# --- end-to-end evaluation over a stub system ------------------------------

TAGS = ("d1", "d2", "d3")
PROFILES = {"d1": "digits", "d2": "symbols", "d3": "prose"}


def _build_system(noise=0.0, count=90, seed=5, cross_mal=0.6, cross_ben=0.3):
    spec = {t: {"count": count, "label_ratio": 0.5, "structural_profile": PROFILES[t]} for t in TAGS}
    corpus = generate_synthetic_corpus(spec, seed=seed)
    globals_ = GlobalSets()
    arrivals = []
    for i, tag in enumerate(TAGS):
        subset = [p for p in corpus if p.dataset_tag == tag]
        globals_ = update_global_sets(globals_, partition_dataset(subset, seed=seed + i), tag)
        profile = specialist_profile(
            tag, TAGS, cross_malicious=cross_mal, cross_benign=cross_ben, noise_sigma=noise, seed=seed + i
        )
        arrivals.append(DatasetArrival(tag=tag, prompts=tuple(subset), backend=StubBackend(profile, corpus)))
    members = tuple(PromptCop(f"cop-{a.tag}", a.tag, a.backend) for a in arrivals)
    provisional = EnsembleState(members=members, selection_size=2, threshold=0.5, router=None, seed=seed)
    state, _ = recalibrate(provisional, globals_, ForestConfig(tree_count=30, seed=seed))
    return state, globals_, arrivals


@pytest.fixture(scope="module")
def system():
    return _build_system()


def test_evaluate_on_perfect_stubs(system):
    state, globals_, _ = system
    cm, record = evaluate_on(state, globals_.test, strategy="router", n=2, base_seed=3)
    assert record.f1 == 1.0
    assert cm.total == len(globals_.test)
    assert record.router_accuracy is not None and record.router_accuracy > 0.8


def test_evaluate_on_empty_list(system):
    state, _, _ = system
    cm, record = evaluate_on(state, [], strategy="router", n=1, base_seed=0)
    assert cm == ConfusionMatrix()
    assert record.router_accuracy is None


def test_evaluate_on_deterministic(system):
    state, globals_, _ = system
    _, a = evaluate_on(state, globals_.test, strategy="random", n=2, base_seed=17)
    _, b = evaluate_on(state, globals_.test, strategy="random", n=2, base_seed=17)
    assert a == b


def test_selection_sweep_cardinality_and_full_ensemble_degeneracy(system):
    state, globals_, _ = system
    records = run_selection_sweep(state, globals_.test, base_seed=2)
    assert len(records) == 3 * state.k
    at_k = [r for r in records if r.n == state.k]
    assert len(at_k) == 3
    reference = at_k[0]
    for r in at_k[1:]:
        assert (r.asr, r.fpr, r.f1) == (reference.asr, reference.fpr, reference.f1)


def test_selection_sweep_rejects_oversized_n(system):
    state, globals_, _ = system
    with pytest.raises(ValueError):
        run_selection_sweep(state, globals_.test, n_values=[99], base_seed=0)


def test_ideal_beats_random_at_n1_with_planted_specialists():
    state, globals_, _ = _build_system(noise=0.15, count=240, seed=9)
    _, ideal = evaluate_on(state, globals_.test, strategy="ideal", n=1, base_seed=4)
    _, rand = evaluate_on(state, globals_.test, strategy="random", n=1, base_seed=4)
    assert ideal.fpr < rand.fpr


def test_router_strategy_at_least_matches_random_when_router_is_accurate():
    # statistical property at ~2000 test prompts: epsilon 0.02
    state, globals_, _ = _build_system(noise=0.15, count=3400, seed=13)
    assert len(globals_.test) >= 2000
    _, router = evaluate_on(state, globals_.test, strategy="router", n=1, base_seed=7)
    assert router.router_accuracy >= 0.95
    _, rand = evaluate_on(state, globals_.test, strategy="random", n=1, base_seed=7)
    assert router.f1 >= rand.f1 - 0.02


def test_adaptability_sweep_minimal_run():
    _, _, arrivals = _build_system(count=60)
    records = run_adaptability_sweep(
        arrivals, initial_k=3, forest_config=ForestConfig(tree_count=15, seed=0), seed=0
    )
    assert {r.k for r in records} == {3}
    assert sorted(r.n for r in records) == [1, 2, 3]
    test_size = sum(len(partition_dataset(list(a.prompts), 0).test) for a in arrivals)
    assert test_size > 0  # sanity on the growth bookkeeping below
    for r in records:
        assert 0.0 <= r.f1 <= 1.0
        assert r.threshold > 0.0


def test_adaptability_sweep_requires_three_datasets():
    _, _, arrivals = _build_system(count=60)
    with pytest.raises(ValueError):
        run_adaptability_sweep(arrivals[:2], initial_k=3)


def test_emit_report_round_trip(tmp_path, system):
    state, globals_, _ = system
    records = run_selection_sweep(state, globals_.test, strategies=("router",), n_values=[1, 2], base_seed=1)
    path = tmp_path / "report.csv"
    emit_report(records, path)
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    parsed = parse_report(path)
    assert parsed == sorted(records, key=lambda r: (r.k, r.strategy, r.n))
    assert (tmp_path / "report.summary.json").exists()


def test_emit_report_empty_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], path)
    assert path.read_text(encoding="utf-8").strip() == ",".join(CSV_HEADER)
    assert parse_report(path) == []


def test_emit_report_missing_router_accuracy_serializes_empty(tmp_path):
    record = SweepRecord(k=3, n=1, strategy="random", asr=0.25, fpr=0.125, f1=0.8, threshold=0.4, router_accuracy=None)
    path = tmp_path / "r.csv"
    emit_report([record], path)
    row = path.read_text(encoding="utf-8").strip().split("\n")[1]
    assert row.endswith(",")
    assert parse_report(path)[0] == record
