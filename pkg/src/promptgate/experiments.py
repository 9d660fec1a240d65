"""Desk-scale experiment wiring: synthetic corpora + planted specialist stubs.

Builds a complete stub-backed system from a declarative spec so the two
sweep harnesses can run end to end without any model serving:

    {
      "datasets": {tag: {"count": int, "label_ratio": float,
                         "structural_profile": name}, ...},
      "stub": {"own_malicious": 0.95, "cross_malicious": 0.6,
               "own_benign": 0.1, "cross_benign": 0.3,
               "noise_sigma": 0.1, "seed": 7},
      "forest": {...ForestConfig fields...},
      "seed": 7,
      "selection_size": 5,
      "strategies": ["router", "random", "ideal"],
      "n_values": [1, 2, ...] | null,
      "initial_k": 3
    }
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from promptgate.backends import ScorerBackend, StubBackend, specialist_profile
from promptgate.calibration import recalibrate
from promptgate.corpus import (
    GlobalSets,
    generate_synthetic_corpus,
    partition_dataset,
    update_global_sets,
)
from promptgate.ensemble import EnsembleState, PromptCop
from promptgate.evaluation import (
    DatasetArrival,
    SweepRecord,
    run_adaptability_sweep,
    run_selection_sweep,
)
from promptgate.forest import ForestConfig
from promptgate.seeding import stable_u64


@dataclass(frozen=True)
class StubSpec:
    own_malicious: float = 0.95
    cross_malicious: float = 0.6
    own_benign: float = 0.1
    cross_benign: float = 0.3
    noise_sigma: float = 0.0
    seed: int = 0


def build_arrivals(
    dataset_spec: Mapping[str, Mapping],
    stub: StubSpec,
    seed: int,
    backends: Mapping[str, ScorerBackend] | None = None,
) -> list[DatasetArrival]:
    """Synthesize the corpora and one specialist backend per dataset.

    Every stub knows the full corpus (cross-dataset prompts score via the
    profile's cross entries), and stub seeds differ per member so noise is
    independent across specialists. `backends` overrides individual members,
    e.g. to swap a stub for a live scorer service.
    """
    corpus = generate_synthetic_corpus(dataset_spec, seed=seed)
    tags = list(dataset_spec.keys())
    arrivals = []
    for i, tag in enumerate(tags):
        subset = tuple(p for p in corpus if p.dataset_tag == tag)
        if backends is not None and tag in backends:
            backend: ScorerBackend = backends[tag]
        else:
            profile = specialist_profile(
                tag,
                tags,
                own_malicious=stub.own_malicious,
                cross_malicious=stub.cross_malicious,
                own_benign=stub.own_benign,
                cross_benign=stub.cross_benign,
                noise_sigma=stub.noise_sigma,
                seed=stub.seed + i,
            )
            backend = StubBackend(profile, corpus)
        arrivals.append(DatasetArrival(tag=tag, prompts=subset, backend=backend))
    return arrivals


def assemble_system(
    arrivals: Sequence[DatasetArrival],
    forest_config: ForestConfig | None,
    selection_size: int,
    strategy: str = "router",
    seed: int = 0,
) -> tuple[EnsembleState, GlobalSets]:
    """Partition every dataset, build the ensemble, recalibrate once."""
    globals_ = GlobalSets()
    members = []
    for arrival in arrivals:
        split = partition_dataset(arrival.prompts, seed=stable_u64(seed, arrival.tag))
        globals_ = update_global_sets(globals_, split, arrival.tag)
        members.append(PromptCop(id=f"cop-{arrival.tag}", dataset_tag=arrival.tag, backend=arrival.backend))
    provisional = EnsembleState(
        members=tuple(members),
        selection_size=selection_size,
        threshold=0.5,
        router=None,
        seed=seed,
    )
    state, _ = recalibrate(provisional, globals_, forest_config, strategy=strategy, n=selection_size)
    return state, globals_


def _parse_common(spec: Mapping) -> tuple[Mapping, StubSpec, ForestConfig | None, int]:
    stub = StubSpec(**spec.get("stub", {}))
    forest_config = ForestConfig(**spec["forest"]) if "forest" in spec else None
    seed = int(spec.get("seed", 0))
    return spec["datasets"], stub, forest_config, seed


def run_selection_experiment(
    spec: Mapping, backends: Mapping[str, ScorerBackend] | None = None
) -> list[SweepRecord]:
    """Fixed-k sweep over selection sizes and strategies."""
    datasets, stub, forest_config, seed = _parse_common(spec)
    arrivals = build_arrivals(datasets, stub, seed, backends=backends)
    k = len(arrivals)
    selection_size = int(spec.get("selection_size", min(5, k)))
    strategies = tuple(spec.get("strategies", ("router", "random", "ideal")))
    state, globals_ = assemble_system(arrivals, forest_config, selection_size, seed=seed)
    n_values = spec.get("n_values") or list(range(1, k + 1))
    return run_selection_sweep(state, globals_.test, strategies=strategies, n_values=n_values, base_seed=seed)


def run_adaptability_experiment(
    spec: Mapping, backends: Mapping[str, ScorerBackend] | None = None
) -> list[SweepRecord]:
    """Growing-k sweep with router/threshold recalibration at each arrival."""
    datasets, stub, forest_config, seed = _parse_common(spec)
    arrivals = build_arrivals(datasets, stub, seed, backends=backends)
    initial_k = int(spec.get("initial_k", 3))
    n_values = spec.get("n_values")
    return run_adaptability_sweep(
        arrivals,
        initial_k=initial_k,
        n_values=(lambda k: n_values) if n_values else None,
        forest_config=forest_config,
        strategy=str(spec.get("strategy", "router")),
        calibration_n=lambda k: min(int(spec.get("selection_size", 5)), k),
        seed=seed,
    )
