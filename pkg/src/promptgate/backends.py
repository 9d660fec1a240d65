"""Scorer backends: the wire-contract HTTP client and the deterministic stub.

Wire contract (shared with any conforming scorer service):

    POST {base_url}/score
    request  {"prompts": ["...", ...]}
    response {"probabilities": [p, ...]}   # positionally aligned, p in [0, 1]

Requests and responses use canonical JSON: UTF-8, no whitespace separators,
non-ASCII left unescaped. A non-200 status or malformed body is a backend
error.

Stub profile format:

    {"kind": "stub",
     "scores": {dataset_tag: {"malicious": p, "benign": p}, ...},
     "noise_sigma": s,
     "seed": n}

A stub scores a known corpus prompt as clamp(scores[tag][label] + eps, 0, 1)
where eps ~ Normal(0, s) seeded by sha256("{seed}|{prompt_id}") (first 8
digest bytes, little-endian), and scores unknown prompts at the fixed
default 0.5. Sigma 0 means no noise draw at all.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import httpx
import numpy as np

from promptgate.corpus import LabeledPrompt, parse_corpus_line

DEFAULT_SCORE = 0.5


class ScorerError(RuntimeError):
    """A backend failed to produce scores (timeout, bad status, bad body)."""


class ScorerBackend(Protocol):
    def score(self, prompts: Sequence[str]) -> list[float]: ...


def encode_score_request(prompts: Sequence[str]) -> bytes:
    return json.dumps({"prompts": list(prompts)}, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_score_response(probabilities: Sequence[float]) -> bytes:
    return json.dumps(
        {"probabilities": list(probabilities)}, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def stub_noise(profile_seed: int, prompt_id: str, sigma: float) -> float:
    """The pinned per-prompt noise draw; sigma 0 short-circuits to 0."""
    if sigma == 0.0:
        return 0.0
    digest = hashlib.sha256(f"{profile_seed}|{prompt_id}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return float(rng.normal(0.0, sigma))


@dataclass(frozen=True)
class StubProfile:
    scores: Mapping[str, Mapping[str, float]]  # dataset_tag -> label -> score
    noise_sigma: float = 0.0
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping) -> "StubProfile":
        if data.get("kind") != "stub":
            raise ValueError(f"not a stub profile: kind={data.get('kind')!r}")
        return cls(
            scores={tag: dict(v) for tag, v in data["scores"].items()},
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            seed=int(data.get("seed", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "kind": "stub",
            "scores": {tag: dict(v) for tag, v in self.scores.items()},
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }


def specialist_profile(
    own_tag: str,
    all_tags: Sequence[str],
    own_malicious: float = 0.95,
    cross_malicious: float = 0.6,
    own_benign: float = 0.1,
    cross_benign: float = 0.3,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> StubProfile:
    """Stub profile for a scorer specialized on one dataset.

    Its own dataset's attacks score high and its benign prompts low; prompts
    from other datasets land in between, mirroring a model that partially
    generalizes across attack families.
    """
    scores = {
        tag: {
            "malicious": own_malicious if tag == own_tag else cross_malicious,
            "benign": own_benign if tag == own_tag else cross_benign,
        }
        for tag in all_tags
    }
    return StubProfile(scores=scores, noise_sigma=noise_sigma, seed=seed)


class StubBackend:
    """Deterministic seeded scorer emulating one promptcop's behavior."""

    def __init__(self, profile: StubProfile, corpus: Iterable[LabeledPrompt] = ()):
        self.profile = profile
        self._index: dict[str, LabeledPrompt] = {p.prompt: p for p in corpus}

    def score(self, prompts: Sequence[str]) -> list[float]:
        out = []
        for text in prompts:
            record = self._index.get(text)
            if record is None:
                out.append(DEFAULT_SCORE)
                continue
            per_label = self.profile.scores.get(record.dataset_tag)
            if per_label is None or record.label not in per_label:
                out.append(DEFAULT_SCORE)
                continue
            raw = float(per_label[record.label]) + stub_noise(
                self.profile.seed, record.id, self.profile.noise_sigma
            )
            out.append(min(1.0, max(0.0, raw)))
        return out


class HTTPBackend:
    """Client for the POST /score wire contract."""

    def __init__(self, base_url: str, timeout_s: float = 5.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_s)

    def score(self, prompts: Sequence[str]) -> list[float]:
        try:
            response = self._client.post(
                f"{self.base_url}/score",
                content=encode_score_request(prompts),
                headers={"content-type": "application/json"},
            )
        except httpx.HTTPError as exc:
            raise ScorerError(f"scorer unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ScorerError(f"scorer returned status {response.status_code}")
        try:
            body = response.json()
            probabilities = body["probabilities"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerError(f"malformed scorer response: {exc}") from exc
        if not isinstance(probabilities, list) or len(probabilities) != len(prompts):
            raise ScorerError("scorer response misaligned with request")
        scores = []
        for p in probabilities:
            if not isinstance(p, (int, float)) or not (0.0 <= float(p) <= 1.0):
                raise ScorerError(f"score out of range: {p!r}")
            scores.append(float(p))
        return scores


def build_backend(descriptor: Mapping, base_dir: str | Path | None = None) -> ScorerBackend:
    """Construct a backend from a config descriptor.

    Stub descriptors carry the profile inline (``profile``) or by path
    (``profile_path``) plus ``corpus_paths`` naming the files whose prompts
    the stub recognizes. HTTP descriptors carry ``url`` and optional
    ``timeout_ms``.
    """
    kind = descriptor.get("kind")
    base = Path(base_dir) if base_dir is not None else Path(".")
    if kind == "stub":
        if "profile" in descriptor:
            profile = StubProfile.from_dict(descriptor["profile"])
        elif "profile_path" in descriptor:
            raw = json.loads((base / descriptor["profile_path"]).read_text(encoding="utf-8"))
            profile = StubProfile.from_dict(raw)
        else:
            raise ValueError("stub descriptor needs 'profile' or 'profile_path'")
        corpus: list[LabeledPrompt] = []
        for rel in descriptor.get("corpus_paths", ()):
            corpus.extend(load_corpus_records(base / rel))
        return StubBackend(profile, corpus)
    if kind == "http":
        timeout_s = float(descriptor.get("timeout_ms", 5000)) / 1000.0
        return HTTPBackend(descriptor["url"], timeout_s=timeout_s)
    raise ValueError(f"unknown backend kind: {kind!r}")


def load_corpus_records(path: str | Path) -> list[LabeledPrompt]:
    """Read a corpus file keeping each record's own dataset tag."""
    prompts = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if line.strip():
                prompts.append(parse_corpus_line(line, line_number))
    return prompts
