"""Stub scorer implementing the wire contract's documented stub semantics.

Known prompts (matched by exact text against the configured corpus) score
clamp(scores[dataset][label] + eps, 0, 1) where eps ~ Normal(0, sigma) is
seeded by sha256("{seed}|{prompt_id}") (first 8 digest bytes, little-endian,
no draw at all when sigma is 0). Unknown prompts score the fixed default
0.5. This mirrors the gateway's in-process stubs byte for byte so either
side can be swapped under the same profile and corpus.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_SCORE = 0.5


class StubScorer:
    def __init__(self, profile: Mapping, corpus_records: Iterable[Mapping] = ()):
        if profile.get("kind") != "stub":
            raise ValueError(f"not a stub profile: kind={profile.get('kind')!r}")
        self._scores = {tag: dict(v) for tag, v in profile["scores"].items()}
        self._sigma = float(profile.get("noise_sigma", 0.0))
        self._seed = int(profile.get("seed", 0))
        self._index = {r["prompt"]: r for r in corpus_records}

    def _noise(self, prompt_id: str) -> float:
        if self._sigma == 0.0:
            return 0.0
        digest = hashlib.sha256(f"{self._seed}|{prompt_id}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return float(rng.normal(0.0, self._sigma))

    def score_batch(self, prompts: Sequence[str]) -> list[float]:
        out = []
        for text in prompts:
            record = self._index.get(text)
            if record is None:
                out.append(DEFAULT_SCORE)
                continue
            per_label = self._scores.get(record["dataset"])
            if per_label is None or record["label"] not in per_label:
                out.append(DEFAULT_SCORE)
                continue
            raw = float(per_label[record["label"]]) + self._noise(record["id"])
            out.append(min(1.0, max(0.0, raw)))
        return out


def load_corpus_records(path: str | Path) -> list[dict]:
    """Read JSONL corpus records ({"id", "prompt", "label", "dataset"})."""
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            for key in ("id", "prompt", "label", "dataset"):
                if key not in record:
                    raise ValueError(f"line {line_number}: missing field {key!r}")
            records.append(record)
    return records
