"""HTTP gateway: classification, ensemble administration, recalibration.

The service keeps one immutable snapshot (ensemble state + cumulative
global sets). Classify handlers read the snapshot reference exactly once,
so every response reflects a single consistent state; admin operations
build a complete replacement snapshot under a lock and install it with one
atomic assignment. A failed update leaves the previous snapshot untouched.

Backend failures during classification follow the configured policy:
fail-closed answers "malicious" with a degraded flag (the default for a
safety gateway), fail-open answers "benign" with the same flag.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np
from pydantic import BaseModel

from promptgate.backends import build_backend
from promptgate.calibration import recalibrate
from promptgate.corpus import GlobalSets, ingest_dataset, partition_dataset, update_global_sets
from promptgate.ensemble import BackendError, EnsembleState, PromptCop, classify
from promptgate.features import FEATURE_NAMES, features_matrix
from promptgate.forest import ForestConfig, accuracy, load_forest
from promptgate.seeding import stable_u64

FAILURE_POLICIES = ("fail-closed", "fail-open")


@dataclass(frozen=True)
class MemberSpec:
    id: str
    dataset_tag: str
    backend: Mapping


@dataclass(frozen=True)
class DatasetSource:
    tag: str
    path: str


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    members: tuple[MemberSpec, ...] = ()
    datasets: tuple[DatasetSource, ...] = ()
    selection_size: int = 1
    strategy: str = "router"
    threshold: float | None = None  # None -> calibrate at startup
    feature_set: str = "full9"
    feature_names: tuple[str, ...] | None = None
    forest_path: str | None = None  # None -> train at startup
    forest: Mapping | None = None
    seed: int = 0
    backend_timeout_ms: int = 5000
    failure_policy: str = "fail-closed"
    max_parallel: int = 4

    def __post_init__(self) -> None:
        if self.selection_size < 1:
            raise ValueError("selection_size must be >= 1")
        if self.backend_timeout_ms <= 0:
            raise ValueError("backend_timeout_ms must be positive")
        if self.failure_policy not in FAILURE_POLICIES:
            raise ValueError(f"failure_policy must be one of {FAILURE_POLICIES}")

    @property
    def forest_config(self) -> ForestConfig:
        return ForestConfig(**self.forest) if self.forest else ForestConfig(seed=self.seed)

    @property
    def active_feature_names(self) -> tuple[str, ...]:
        if self.feature_names:
            return tuple(self.feature_names)
        return FEATURE_NAMES


def load_config(path: str | Path, overrides: Mapping | None = None) -> GatewayConfig:
    """Read the JSON config file; flat overrides win over file values."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    members = tuple(MemberSpec(**m) for m in raw.pop("members", []))
    datasets = tuple(DatasetSource(**d) for d in raw.pop("datasets", []))
    feature_names = raw.pop("feature_names", None)
    return GatewayConfig(
        members=members,
        datasets=datasets,
        feature_names=tuple(feature_names) if feature_names else None,
        **raw,
    )


@dataclass(frozen=True)
class Snapshot:
    """One consistent view of the deployed system."""

    state: EnsembleState
    globals: GlobalSets
    calibration_evaluations: int = 0


class GatewayService:
    """Owns the snapshot; all endpoint logic lives here, HTTP-free."""

    def __init__(self, config: GatewayConfig, base_dir: str | Path = "."):
        self._config = config
        self._base_dir = Path(base_dir)
        self._admin_lock = threading.Lock()
        self._snapshot = self._bootstrap()

    # -- construction -------------------------------------------------------

    def _bootstrap(self) -> Snapshot:
        config = self._config
        globals_ = GlobalSets()
        for source in config.datasets:
            prompts = ingest_dataset(self._base_dir / source.path, source.tag)
            split = partition_dataset(prompts, seed=stable_u64(config.seed, source.tag))
            globals_ = update_global_sets(globals_, split, source.tag)

        members = tuple(
            PromptCop(id=m.id, dataset_tag=m.dataset_tag, backend=build_backend(m.backend, self._base_dir))
            for m in config.members
        )
        if not members:
            raise ValueError("gateway config declares no ensemble members")

        router = None
        if config.forest_path:
            router = load_forest(self._base_dir / config.forest_path)

        state = EnsembleState(
            members=members,
            selection_size=config.selection_size,
            threshold=config.threshold if config.threshold is not None else 0.5,
            router=router,
            feature_names=config.active_feature_names,
            feature_set=config.feature_set,
            seed=config.seed,
        )
        evaluations = 0
        if router is None or config.threshold is None:
            if not globals_.calibration:
                raise ValueError(
                    "config must provide either forest_path and threshold, or datasets to calibrate on"
                )
            state, report = recalibrate(
                state,
                globals_,
                config.forest_config,
                strategy=config.strategy,
                n=config.selection_size,
            )
            evaluations = report.evaluation_count
        return Snapshot(state=state, globals=globals_, calibration_evaluations=evaluations)

    # -- read path ----------------------------------------------------------

    @property
    def current_state(self) -> EnsembleState:
        return self._snapshot.state

    def classify_request(
        self,
        prompt: str,
        n: int | None = None,
        strategy: str | None = None,
        request_seed: int | None = None,
    ) -> dict:
        snapshot = self._snapshot  # single read: one consistent state per request
        state = snapshot.state
        if request_seed is None:
            request_seed = int(np.random.default_rng().integers(0, 2**63))
        strategy = strategy or self._config.strategy
        try:
            verdict = classify(
                state,
                prompt,
                strategy=strategy,
                request_seed=request_seed,
                n=n,
                max_parallel=self._config.max_parallel,
            )
        except BackendError as exc:
            closed = self._config.failure_policy == "fail-closed"
            return {
                "verdict": "malicious" if closed else "benign",
                "score": 1.0 if closed else 0.0,
                "threshold": state.threshold,
                "selected": [],
                "router_class": "",
                "degraded": True,
                "failed_member": exc.member_id,
            }
        return {
            "verdict": verdict.label,
            "score": verdict.score,
            "threshold": verdict.threshold,
            "selected": list(verdict.selected_ids),
            "router_class": verdict.router_class,
            "degraded": False,
        }

    def health(self) -> dict:
        state = self._snapshot.state
        return {
            "k": state.k,
            "n": state.selection_size,
            "threshold": state.threshold,
            "feature_set": state.feature_set,
        }

    def state_summary(self) -> dict:
        snapshot = self._snapshot
        state = snapshot.state
        return {
            "members": [{"id": m.id, "dataset_tag": m.dataset_tag} for m in state.members],
            "n": state.selection_size,
            "threshold": state.threshold,
            "feature_set": state.feature_set,
            "feature_names": list(state.feature_names),
            "dataset_tags": list(snapshot.globals.dataset_tags),
        }

    # -- admin path ---------------------------------------------------------

    def handle_update(self, dataset_path: str, dataset_tag: str, backend_descriptor: Mapping) -> dict:
        """Ingest a dataset, add its promptcop, retrain + recalibrate, swap.

        All work happens on locals; the served snapshot is replaced only by
        the final assignment, so any failure leaves the old state intact.
        """
        with self._admin_lock:
            snapshot = self._snapshot
            prompts = ingest_dataset(self._base_dir / dataset_path, dataset_tag)
            if not prompts:
                raise ValueError("dataset is empty")
            split = partition_dataset(prompts, seed=stable_u64(self._config.seed, dataset_tag))
            new_globals = update_global_sets(snapshot.globals, split, dataset_tag)
            backend = build_backend(backend_descriptor, self._base_dir)
            new_member = PromptCop(id=f"cop-{dataset_tag}", dataset_tag=dataset_tag, backend=backend)
            if any(m.id == new_member.id for m in snapshot.state.members):
                raise ValueError(f"duplicate promptcop id: {new_member.id!r}")
            provisional = replace(
                snapshot.state, members=snapshot.state.members + (new_member,)
            )
            new_state, report = recalibrate(
                provisional,
                new_globals,
                self._config.forest_config,
                strategy=self._config.strategy,
                n=provisional.selection_size,
            )
            router_accuracy = self._router_accuracy(new_state, new_globals)
            self._snapshot = Snapshot(
                state=new_state,
                globals=new_globals,
                calibration_evaluations=report.evaluation_count,
            )
        return {
            "k": new_state.k,
            "threshold": new_state.threshold,
            "router_accuracy": router_accuracy,
            "evaluations": report.evaluation_count,
        }

    def run_recalibration(self) -> dict:
        with self._admin_lock:
            snapshot = self._snapshot
            if not snapshot.globals.calibration:
                raise ValueError("no cumulative calibration data available")
            new_state, report = recalibrate(
                snapshot.state,
                snapshot.globals,
                self._config.forest_config,
                strategy=self._config.strategy,
                n=snapshot.state.selection_size,
            )
            router_accuracy = self._router_accuracy(new_state, snapshot.globals)
            self._snapshot = Snapshot(
                state=new_state,
                globals=snapshot.globals,
                calibration_evaluations=report.evaluation_count,
            )
        return {
            "k": new_state.k,
            "threshold": new_state.threshold,
            "router_accuracy": router_accuracy,
            "evaluations": report.evaluation_count,
        }

    @staticmethod
    def _router_accuracy(state: EnsembleState, globals_: GlobalSets) -> float:
        cal = globals_.calibration
        X = features_matrix([p.prompt for p in cal], names=state.feature_names)
        return accuracy(state.router, X, [p.dataset_tag for p in cal])


class ClassifyRequest(BaseModel):
    prompt: str
    n: int | None = None
    strategy: str | None = None


class UpdateRequest(BaseModel):
    dataset_path: str
    dataset_tag: str
    backend: dict


def create_app(service: GatewayService):
    """FastAPI wiring over the service object."""
    from fastapi import FastAPI, Header, HTTPException

    app = FastAPI(title="promptgate", version="0.1.0")

    @app.get("/v1/health")
    def health():
        return service.health()

    @app.get("/v1/state")
    def state():
        return service.state_summary()

    @app.post("/v1/classify")
    def classify_endpoint(
        request: ClassifyRequest,
        x_request_seed: int | None = Header(default=None),
    ):
        try:
            return service.classify_request(
                request.prompt,
                n=request.n,
                strategy=request.strategy,
                request_seed=x_request_seed,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/v1/update")
    def update_endpoint(request: UpdateRequest):
        try:
            return service.handle_update(request.dataset_path, request.dataset_tag, request.backend)
        except ValueError as exc:
            status = 409 if "duplicate" in str(exc) or "already" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc))
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/v1/recalibrate")
    def recalibrate_endpoint():
        try:
            return service.run_recalibration()
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    return app


def serve(config: GatewayConfig, base_dir: str | Path = ".") -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    service = GatewayService(config, base_dir=base_dir)
    app = create_app(service)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
