"""Promptcop ensemble: member registry, subset selection, and the verdict.

A classification runs feature extraction, routes through the forest to the
most suitable member, selects a stochastic subset of the ensemble, averages
the members' probability scores, and compares the mean strictly against the
calibrated threshold: a prompt is malicious iff mean > threshold.

All per-request randomness derives from (ensemble seed, request seed), so a
replayed request seed reproduces the exact selection and verdict when the
backends are deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from promptgate.backends import ScorerBackend, ScorerError
from promptgate.features import FEATURE_NAMES, FeatureVector, extract_features
from promptgate.forest import Forest, predict
from promptgate.seeding import pair_rng

STRATEGIES = ("router", "random", "ideal")


class BackendError(RuntimeError):
    """A member's scorer failed; carries the failing member id."""

    def __init__(self, member_id: str, message: str):
        super().__init__(f"backend of promptcop {member_id!r} failed: {message}")
        self.member_id = member_id


@dataclass(frozen=True)
class PromptCop:
    """One ensemble member: a scorer specialized on one dataset class."""

    id: str
    dataset_tag: str
    backend: ScorerBackend


@dataclass(frozen=True)
class EnsembleState:
    """Immutable snapshot of the deployed ensemble configuration."""

    members: tuple[PromptCop, ...]
    selection_size: int
    threshold: float
    router: Forest | None  # None only transiently, before the first recalibration
    feature_names: tuple[str, ...] = FEATURE_NAMES
    feature_set: str = "full9"
    seed: int = 0

    def __post_init__(self) -> None:
        ids = [m.id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("promptcop ids must be unique")
        if not (1 <= self.selection_size <= len(self.members)):
            raise ValueError(
                f"selection_size must be in [1, {len(self.members)}], got {self.selection_size}"
            )
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")
        member_tags = {m.dataset_tag for m in self.members}
        if self.router is not None and not set(self.router.class_labels) <= member_tags:
            raise ValueError("router class labels must be covered by member dataset tags")

    @property
    def k(self) -> int:
        return len(self.members)

    def member_by_tag(self, tag: str) -> PromptCop:
        for member in self.members:
            if member.dataset_tag == tag:
                return member
        raise ValueError(f"no promptcop with dataset tag {tag!r}")


@dataclass(frozen=True)
class Verdict:
    label: str  # "malicious" | "benign"
    score: float
    threshold: float
    selected_ids: tuple[str, ...]
    router_class: str
    per_member_scores: dict[str, float]


def route(state: EnsembleState, fv: FeatureVector) -> str:
    """Router-predicted dataset class for a feature vector."""
    if state.router is None:
        raise ValueError("ensemble has no trained router")
    label, _ = predict(state.router, fv.as_array(state.feature_names))
    return label


def select_subset(
    state: EnsembleState,
    fv: FeatureVector,
    strategy: str = "router",
    request_seed: int = 0,
    ideal_tag: str | None = None,
    n: int | None = None,
) -> list[PromptCop]:
    """Pick the n members to score, per the configured strategy.

    router: the router-predicted member plus n-1 drawn uniformly without
    replacement from the rest; random: n uniform draws; ideal: the member
    with `ideal_tag` plus n-1 draws. Output preserves ensemble order.
    """
    n = state.selection_size if n is None else n
    k = state.k
    if n > k:
        raise ValueError(f"selection size {n} exceeds ensemble size {k}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")

    rng = pair_rng(state.seed, request_seed)
    if strategy == "random":
        chosen = sorted(int(i) for i in rng.choice(k, size=n, replace=False))
        return [state.members[i] for i in chosen]

    if strategy == "router":
        anchor_tag = route(state, fv)
    else:
        if ideal_tag is None:
            raise ValueError("ideal strategy requires ideal_tag")
        anchor_tag = ideal_tag
    anchor = state.member_by_tag(anchor_tag)
    anchor_index = state.members.index(anchor)
    rest = [i for i in range(k) if i != anchor_index]
    extra = sorted(int(rest[i]) for i in rng.choice(len(rest), size=n - 1, replace=False))
    chosen = sorted([anchor_index] + extra)
    return [state.members[i] for i in chosen]


def aggregate(scores: Sequence[float]) -> float:
    """Arithmetic mean of member probabilities."""
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    if any(not (0.0 <= s <= 1.0) for s in scores):
        raise ValueError("scores must lie in [0, 1]")
    return sum(scores) / len(scores)


def score_members(
    members: Sequence[PromptCop], prompt: str, max_parallel: int = 1
) -> dict[str, float]:
    """Score one prompt with each member; results keyed by member id.

    Fan-out is bounded by max_parallel; result order is fixed by member
    order so downstream aggregation is deterministic.
    """

    def one(member: PromptCop) -> float:
        try:
            return member.backend.score([prompt])[0]
        except ScorerError as exc:
            raise BackendError(member.id, str(exc)) from exc

    if max_parallel > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=min(max_parallel, len(members))) as pool:
            scores = list(pool.map(one, members))
    else:
        scores = [one(member) for member in members]
    return {member.id: score for member, score in zip(members, scores)}


def classify(
    state: EnsembleState,
    prompt: str,
    strategy: str = "router",
    request_seed: int = 0,
    ideal_tag: str | None = None,
    n: int | None = None,
    max_parallel: int = 1,
) -> Verdict:
    """Full decision path: features -> route -> select -> score -> threshold."""
    if not state.members:
        raise ValueError("ensemble has no members")
    fv = extract_features(prompt)
    router_class = route(state, fv)
    selected = select_subset(
        state,
        fv,
        strategy=strategy,
        request_seed=request_seed,
        ideal_tag=ideal_tag,
        n=n,
    )
    per_member = score_members(selected, prompt, max_parallel=max_parallel)
    mean = aggregate([per_member[m.id] for m in selected])
    label = "malicious" if mean > state.threshold else "benign"
    return Verdict(
        label=label,
        score=mean,
        threshold=state.threshold,
        selected_ids=tuple(m.id for m in selected),
        router_class=router_class,
        per_member_scores=per_member,
    )


def add_promptcop(state: EnsembleState, cop: PromptCop) -> EnsembleState:
    """Extend the ensemble; the router and threshold are untouched until an
    explicit recalibration runs."""
    if any(m.id == cop.id for m in state.members):
        raise ValueError(f"duplicate promptcop id: {cop.id!r}")
    return replace(state, members=state.members + (cop,))
