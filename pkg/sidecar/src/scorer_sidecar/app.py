"""HTTP layer: POST /score and GET /health.

Responses are canonical JSON (UTF-8, compact separators, non-ASCII left
unescaped) so clients can golden-test exact bytes. A single lock serializes
inference; FastAPI's worker pool provides the bounded queue in front of it.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Protocol, Sequence

from fastapi import FastAPI, HTTPException, Request, Response

from scorer_sidecar.config import SidecarConfig
from scorer_sidecar.stub import StubScorer, load_corpus_records


class Scorer(Protocol):
    def score_batch(self, prompts: Sequence[str]) -> list[float]: ...


def build_scorer(config: SidecarConfig, base_dir: str | Path = ".") -> Scorer:
    if config.stub is not None:
        records = []
        for rel in config.stub.corpus_paths:
            records.extend(load_corpus_records(Path(base_dir) / rel))
        return StubScorer(config.stub.profile, records)
    from scorer_sidecar.model import CheckpointScorer

    return CheckpointScorer(
        str(Path(base_dir) / config.checkpoint_path),
        device=config.device,
        malicious_label=config.malicious_label,
    )


def canonical_json(payload) -> bytes:
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def create_app(config: SidecarConfig, base_dir: str | Path = ".", scorer: Scorer | None = None) -> FastAPI:
    scorer = scorer if scorer is not None else build_scorer(config, base_dir)
    inference_lock = threading.Lock()
    app = FastAPI(title="scorer-sidecar", version="0.1.0")

    @app.get("/health")
    def health():
        mode = "stub" if config.stub is not None else "checkpoint"
        return {"status": "ok", "mode": mode, "batch_limit": config.batch_limit}

    @app.post("/score")
    async def score(request: Request):
        try:
            body = json.loads(await request.body())
            prompts = body["prompts"]
        except (ValueError, KeyError, TypeError):
            raise HTTPException(status_code=400, detail="body must be {\"prompts\": [string, ...]}")
        if not isinstance(prompts, list) or not all(isinstance(p, str) for p in prompts):
            raise HTTPException(status_code=400, detail="prompts must be a list of strings")
        if not prompts:
            raise HTTPException(status_code=400, detail="prompts must be non-empty")
        if len(prompts) > config.batch_limit:
            raise HTTPException(status_code=413, detail=f"batch exceeds limit of {config.batch_limit}")
        with inference_lock:
            probabilities = scorer.score_batch(prompts)
        assert len(probabilities) == len(prompts)
        assert all(0.0 <= p <= 1.0 for p in probabilities)
        return Response(
            content=canonical_json({"probabilities": probabilities}),
            media_type="application/json",
        )

    return app
