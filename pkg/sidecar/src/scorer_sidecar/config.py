"""Sidecar configuration: exactly one scorer source (checkpoint or stub)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping


@dataclass(frozen=True)
class StubConfig:
    profile: Mapping  # {"kind": "stub", "scores": {...}, "noise_sigma": s, "seed": n}
    corpus_paths: tuple[str, ...] = ()


@dataclass(frozen=True)
class SidecarConfig:
    host: str = "127.0.0.1"
    port: int = 8900
    batch_limit: int = 64
    device: str = "cpu"
    checkpoint_path: str | None = None
    malicious_label: int | None = None  # class index override for checkpoints
    stub: StubConfig | None = None

    def __post_init__(self) -> None:
        if (self.checkpoint_path is None) == (self.stub is None):
            raise ValueError("configure exactly one of checkpoint_path or stub")
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be >= 1")


def load_config(path: str | Path) -> SidecarConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    stub = raw.pop("stub", None)
    if stub is not None:
        stub = StubConfig(profile=stub["profile"], corpus_paths=tuple(stub.get("corpus_paths", ())))
    return SidecarConfig(stub=stub, **raw)
