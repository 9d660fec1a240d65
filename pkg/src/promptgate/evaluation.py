"""Detection metrics and the sweep harnesses for ensemble experiments.

ASR is the false-negative rate over malicious prompts (attacks that slip
through); FPR the fraction of benign prompts flagged. Degenerate 0/0 ratios
evaluate to 0 so sweeps stay total. The two harnesses reproduce the standard
protocols: a selection-size sweep at fixed ensemble size, and an
adaptability sweep that grows the ensemble one dataset at a time with full
recalibration between steps.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from promptgate.backends import ScorerBackend
from promptgate.calibration import CalibrationReport, recalibrate
from promptgate.corpus import CorpusSplit, GlobalSets, LabeledPrompt, partition_dataset, update_global_sets
from promptgate.ensemble import EnsembleState, PromptCop, Verdict, classify
from promptgate.forest import ForestConfig
from promptgate.seeding import request_seed_for, stable_u64

CSV_HEADER = ("k", "n", "strategy", "asr", "fpr", "f1", "threshold", "router_accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion matrix entries must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class SweepRecord:
    k: int
    n: int
    strategy: str
    asr: float
    fpr: float
    f1: float
    threshold: float
    router_accuracy: float | None = None


def metrics(cm: ConfusionMatrix) -> tuple[float, float, float, float, float]:
    """(asr, fpr, f1, precision, recall) with 0/0 -> 0."""
    asr = cm.fn / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else 0.0
    fpr = cm.fp / (cm.fp + cm.tn) if (cm.fp + cm.tn) > 0 else 0.0
    f1 = 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn) if (2 * cm.tp + cm.fp + cm.fn) > 0 else 0.0
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else 0.0
    return asr, fpr, f1, precision, recall


def evaluate_on(
    state: EnsembleState,
    prompts: Sequence[LabeledPrompt],
    strategy: str = "router",
    n: int | None = None,
    base_seed: int = 0,
) -> tuple[ConfusionMatrix, SweepRecord]:
    """Classify every prompt and tally the confusion counts.

    Per-prompt request seeds derive from (base_seed, prompt id) so records
    are reproducible and independent of evaluation order.
    """
    n = state.selection_size if n is None else n
    tp = fp = tn = fn = 0
    router_hits = 0
    for prompt in prompts:
        verdict: Verdict = classify(
            state,
            prompt.prompt,
            strategy=strategy,
            request_seed=request_seed_for(base_seed, prompt.id),
            ideal_tag=prompt.dataset_tag if strategy == "ideal" else None,
            n=n,
        )
        if verdict.router_class == prompt.dataset_tag:
            router_hits += 1
        if prompt.label == "malicious":
            if verdict.label == "malicious":
                tp += 1
            else:
                fn += 1
        else:
            if verdict.label == "malicious":
                fp += 1
            else:
                tn += 1
    cm = ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)
    asr, fpr, f1, _, _ = metrics(cm)
    record = SweepRecord(
        k=state.k,
        n=n,
        strategy=strategy,
        asr=asr,
        fpr=fpr,
        f1=f1,
        threshold=state.threshold,
        router_accuracy=router_hits / len(prompts) if prompts else None,
    )
    return cm, record


def run_selection_sweep(
    state: EnsembleState,
    test_set: Sequence[LabeledPrompt],
    strategies: Sequence[str] = ("router", "random", "ideal"),
    n_values: Sequence[int] | None = None,
    base_seed: int = 0,
) -> list[SweepRecord]:
    """One record per (strategy, n) on a fixed ensemble."""
    n_values = list(n_values) if n_values is not None else list(range(1, state.k + 1))
    if n_values and max(n_values) > state.k:
        raise ValueError("n exceeds ensemble size")
    records = []
    for strategy in strategies:
        for n in n_values:
            _, record = evaluate_on(state, test_set, strategy=strategy, n=n, base_seed=base_seed)
            records.append(record)
    return records


@dataclass(frozen=True)
class DatasetArrival:
    """A dataset joining the system together with its specialist's backend."""

    tag: str
    prompts: tuple[LabeledPrompt, ...]
    backend: ScorerBackend


def run_adaptability_sweep(
    arrivals: Sequence[DatasetArrival],
    *,
    initial_k: int = 3,
    n_values: Callable[[int], Sequence[int]] | None = None,
    forest_config: ForestConfig | None = None,
    strategy: str = "router",
    calibration_n: Callable[[int], int] | None = None,
    seed: int = 0,
) -> list[SweepRecord]:
    """Grow the ensemble one dataset at a time, recalibrating at each step.

    Evaluation starts once `initial_k` datasets are in. For each step k the
    updated cumulative test set is swept over `n_values(k)` using a state
    recalibrated (router + threshold) at selection size `calibration_n(k)`.
    """
    if len(arrivals) < initial_k:
        raise ValueError(f"need at least {initial_k} datasets")
    n_values = n_values or (lambda k: range(1, k + 1))
    calibration_n = calibration_n or (lambda k: min(5, k))

    globals_ = GlobalSets()
    members: list[PromptCop] = []
    records: list[SweepRecord] = []
    for arrival in arrivals:
        split: CorpusSplit = partition_dataset(arrival.prompts, seed=stable_u64(seed, arrival.tag))
        globals_ = update_global_sets(globals_, split, arrival.tag)
        members.append(PromptCop(id=f"cop-{arrival.tag}", dataset_tag=arrival.tag, backend=arrival.backend))
        k = len(members)
        if k < initial_k:
            continue
        state, _ = _build_recalibrated_state(
            members, globals_, forest_config, strategy, calibration_n(k), seed
        )
        for n in n_values(k):
            _, record = evaluate_on(state, globals_.test, strategy=strategy, n=n, base_seed=seed)
            records.append(record)
    return records


def _build_recalibrated_state(
    members: Sequence[PromptCop],
    globals_: GlobalSets,
    forest_config: ForestConfig | None,
    strategy: str,
    n: int,
    seed: int,
) -> tuple[EnsembleState, CalibrationReport]:
    """Fresh state from the cumulative calibration set: router + threshold."""
    provisional = EnsembleState(
        members=tuple(members),
        selection_size=n,
        threshold=0.5,
        router=None,
        seed=seed,
    )
    return recalibrate(provisional, globals_, forest_config, strategy=strategy, n=n)


def emit_report(records: Iterable[SweepRecord], path: str | Path) -> Path:
    """Write records as plot-ready CSV plus a JSON summary alongside.

    Rows are ordered by (k, strategy, n); a missing router_accuracy
    serializes as an empty field. Returns the CSV path.
    """
    path = Path(path)
    ordered = sorted(records, key=lambda r: (r.k, r.strategy, r.n))
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for r in ordered:
            writer.writerow(
                [
                    r.k,
                    r.n,
                    r.strategy,
                    repr(r.asr),
                    repr(r.fpr),
                    repr(r.f1),
                    repr(r.threshold),
                    "" if r.router_accuracy is None else repr(r.router_accuracy),
                ]
            )
    summary = {
        "records": len(ordered),
        "k_values": sorted({r.k for r in ordered}),
        "strategies": sorted({r.strategy for r in ordered}),
        "best_f1": max((r.f1 for r in ordered), default=None),
    }
    path.with_suffix(".summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return path


def parse_report(path: str | Path) -> list[SweepRecord]:
    """Inverse of emit_report for the CSV part."""
    records = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        for row in reader:
            records.append(
                SweepRecord(
                    k=int(row[0]),
                    n=int(row[1]),
                    strategy=row[2],
                    asr=float(row[3]),
                    fpr=float(row[4]),
                    f1=float(row[5]),
                    threshold=float(row[6]),
                    router_accuracy=None if row[7] == "" else float(row[7]),
                )
            )
    return records
