"""Two-stage decision-threshold calibration and full ensemble recalibration.

Stage 1 sweeps the coarse grid 0.10..0.90 (step 0.10); stage 2 refines
around the coarse argmax at +-0.05 (step 0.01). That is exactly 20 F1
evaluations per run. Thresholds are handled as integer hundredths so grid
points and tie-breaks are exact. F1 uses the same strict score > threshold
rule the classifier deploys, and equal-F1 ties resolve to the lowest
threshold in both stages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from promptgate.corpus import GlobalSets, LabeledPrompt
from promptgate.ensemble import EnsembleState, classify
from promptgate.features import features_matrix
from promptgate.forest import ForestConfig, train_forest_arrays
from promptgate.seeding import request_seed_for

EVALUATIONS_PER_RUN = 20


@dataclass(frozen=True)
class CalibrationReport:
    best_threshold: float
    best_f1: float
    evaluations: tuple[tuple[float, float], ...]  # (threshold, f1) in evaluation order

    @property
    def evaluation_count(self) -> int:
        return len(self.evaluations)

    def to_dict(self) -> dict:
        return {
            "best_threshold": self.best_threshold,
            "best_f1": self.best_f1,
            "evaluation_count": self.evaluation_count,
            "evaluations": [{"threshold": t, "f1": f} for t, f in self.evaluations],
        }


def f1_at_threshold(scores: np.ndarray, malicious: np.ndarray, threshold: float) -> float:
    """F1 under the strict > rule with the 0/0 -> 0 convention."""
    flagged = scores > threshold
    tp = int(np.count_nonzero(flagged & malicious))
    fp = int(np.count_nonzero(flagged & ~malicious))
    fn = int(np.count_nonzero(~flagged & malicious))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def calibrate_threshold(scored_calibration: Sequence[tuple[float, str]]) -> CalibrationReport:
    """Coarse-to-fine search for the F1-maximizing threshold."""
    if not scored_calibration:
        raise ValueError("calibration set is empty")
    scores = np.asarray([s for s, _ in scored_calibration], dtype=np.float64)
    malicious = np.asarray([label == "malicious" for _, label in scored_calibration], dtype=bool)
    if not malicious.any():
        raise ValueError("calibration set has no malicious prompts; F1 is undefined")

    evaluations: list[tuple[float, float]] = []

    def evaluate(hundredths: int) -> float:
        tau = hundredths / 100.0
        f1 = f1_at_threshold(scores, malicious, tau)
        evaluations.append((tau, f1))
        return f1

    coarse_best_h = None
    coarse_best_f1 = -1.0
    for h in range(10, 91, 10):
        f1 = evaluate(h)
        if f1 > coarse_best_f1:
            coarse_best_f1 = f1
            coarse_best_h = h

    fine_best_h = None
    fine_best_f1 = -1.0
    for h in range(coarse_best_h - 5, coarse_best_h + 6):
        f1 = evaluate(h)
        if f1 > fine_best_f1:
            fine_best_f1 = f1
            fine_best_h = h

    # Overall argmax with ties resolved to the lowest threshold.
    best_f1 = max(f1 for _, f1 in evaluations)
    best_threshold = min(t for t, f1 in evaluations if f1 == best_f1)
    assert len(evaluations) == EVALUATIONS_PER_RUN
    return CalibrationReport(
        best_threshold=best_threshold, best_f1=best_f1, evaluations=tuple(evaluations)
    )


def score_calibration_set(
    state: EnsembleState,
    prompts: Sequence[LabeledPrompt],
    strategy: str = "router",
    n: int | None = None,
) -> list[tuple[float, str]]:
    """Aggregate score per calibration prompt, computed once and reused by
    every threshold evaluation."""
    pairs = []
    for prompt in prompts:
        verdict = classify(
            state,
            prompt.prompt,
            strategy=strategy,
            request_seed=request_seed_for(state.seed, prompt.id),
            ideal_tag=prompt.dataset_tag if strategy == "ideal" else None,
            n=n,
        )
        pairs.append((verdict.score, prompt.label))
    return pairs


def recalibrate(
    state: EnsembleState,
    global_cal: GlobalSets | Sequence[LabeledPrompt],
    forest_config: ForestConfig | None = None,
    strategy: str = "router",
    n: int | None = None,
) -> tuple[EnsembleState, CalibrationReport]:
    """Retrain the router on the cumulative calibration set and re-tune the
    threshold; returns the updated state and the calibration report."""
    prompts = global_cal.calibration if isinstance(global_cal, GlobalSets) else list(global_cal)
    if not prompts:
        raise ValueError("cumulative calibration set is empty")

    X = features_matrix([p.prompt for p in prompts], names=state.feature_names)
    labels = [p.dataset_tag for p in prompts]
    router = train_forest_arrays(X, labels, state.feature_names, forest_config)

    routed_state = replace(state, router=router)
    pairs = score_calibration_set(routed_state, prompts, strategy=strategy, n=n)
    report = calibrate_threshold(pairs)
    return replace(routed_state, threshold=report.best_threshold), report
