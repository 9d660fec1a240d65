"""Dataset ingestion, deterministic partitioning, and synthetic corpora.

Corpus files are UTF-8 JSON lines, one record per line:

    {"id": "...", "prompt": "...", "label": "malicious"|"benign", "dataset": "..."}

Each ingested dataset is split 56/14/10/20 percent into fit/validation/
calibration/test parts, stratified by label, and the calibration and test
parts accumulate into cumulative global sets as datasets arrive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from promptgate.seeding import stable_u64

LABELS = ("malicious", "benign")

# Percent shares of the four parts; remainders go to train_fit.
_SHARES = (("train_fit", 56), ("train_val", 14), ("calibration", 10), ("test", 20))


@dataclass(frozen=True)
class LabeledPrompt:
    id: str
    prompt: str
    label: str
    dataset_tag: str

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class CorpusSplit:
    train_fit: tuple[LabeledPrompt, ...]
    train_val: tuple[LabeledPrompt, ...]
    calibration: tuple[LabeledPrompt, ...]
    test: tuple[LabeledPrompt, ...]

    @property
    def size(self) -> int:
        return len(self.train_fit) + len(self.train_val) + len(self.calibration) + len(self.test)


@dataclass(frozen=True)
class GlobalSets:
    """Cumulative calibration/test unions over every ingested dataset."""

    calibration: tuple[LabeledPrompt, ...] = ()
    test: tuple[LabeledPrompt, ...] = ()
    dataset_tags: tuple[str, ...] = ()


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files; message names the offending line."""


def parse_corpus_line(line: str, line_number: int, dataset_tag: str | None = None) -> LabeledPrompt:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {line_number}: invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise CorpusFormatError(f"line {line_number}: record must be an object")
    for key in ("id", "prompt", "label"):
        if key not in record:
            raise CorpusFormatError(f"line {line_number}: missing field {key!r}")
        if not isinstance(record[key], str):
            raise CorpusFormatError(f"line {line_number}: field {key!r} must be a string")
    if record["label"] not in LABELS:
        raise CorpusFormatError(
            f"line {line_number}: label must be 'malicious' or 'benign', got {record['label']!r}"
        )
    tag = dataset_tag if dataset_tag is not None else record.get("dataset")
    if not isinstance(tag, str) or not tag:
        raise CorpusFormatError(f"line {line_number}: missing dataset tag")
    return LabeledPrompt(id=record["id"], prompt=record["prompt"], label=record["label"], dataset_tag=tag)


def ingest_dataset(path: str | Path, dataset_tag: str) -> list[LabeledPrompt]:
    """Parse a corpus file, tagging every record with `dataset_tag`."""
    path = Path(path)
    prompts: list[LabeledPrompt] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            prompt = parse_corpus_line(line, line_number, dataset_tag)
            if prompt.id in seen_ids:
                raise CorpusFormatError(f"line {line_number}: duplicate id {prompt.id!r}")
            seen_ids.add(prompt.id)
            prompts.append(prompt)
    return prompts


def write_corpus(prompts: Iterable[LabeledPrompt], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for p in prompts:
            record = {"id": p.id, "prompt": p.prompt, "label": p.label, "dataset": p.dataset_tag}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def partition_dataset(prompts: Sequence[LabeledPrompt], seed: int) -> CorpusSplit:
    """Label-stratified 56/14/10/20 split, deterministic in `seed`.

    Within each label class: shuffle, then slice contiguously using floored
    percentages with the remainder assigned to train_fit.
    """
    if not prompts:
        raise ValueError("cannot partition an empty dataset")
    parts: dict[str, list[LabeledPrompt]] = {name: [] for name, _ in _SHARES}
    rng = np.random.default_rng(seed)
    for label in LABELS:
        group = [p for p in prompts if p.label == label]
        if not group:
            continue
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]
        n = len(group)
        sizes = {name: (pct * n) // 100 for name, pct in _SHARES}
        sizes["train_fit"] += n - sum(sizes.values())
        offset = 0
        for name, _ in _SHARES:
            parts[name].extend(shuffled[offset : offset + sizes[name]])
            offset += sizes[name]
    return CorpusSplit(
        train_fit=tuple(parts["train_fit"]),
        train_val=tuple(parts["train_val"]),
        calibration=tuple(parts["calibration"]),
        test=tuple(parts["test"]),
    )


def update_global_sets(globals_: GlobalSets, split: CorpusSplit, dataset_tag: str) -> GlobalSets:
    if dataset_tag in globals_.dataset_tags:
        raise ValueError(f"dataset tag already ingested: {dataset_tag!r}")
    return GlobalSets(
        calibration=globals_.calibration + split.calibration,
        test=globals_.test + split.test,
        dataset_tags=globals_.dataset_tags + (dataset_tag,),
    )


# ---------------------------------------------------------------------------
# Synthetic corpora. Each profile targets a distinct structural signature so
# a router trained on the nine features can tell the datasets apart.
# ---------------------------------------------------------------------------

_FILLER_WORDS = (
    "the", "and", "you", "do", "a", "to", "of", "in", "is", "it", "that",
    "for", "on", "with", "as", "this", "are", "be", "or", "at", "please",
    "could", "would", "tell", "me", "about", "how", "does", "work", "today",
)

_CODE_WORDS = (
    "if", "else", "for", "while", "def", "return", "import", "class",
    "function", "var", "let", "const", "print", "lambda", "try", "except",
)

_SYMBOLS = "!@#$%^&*()_+-=[]{}<>~|\\/"


def _words(rng: np.random.Generator, pool: Sequence[str], count: int) -> list[str]:
    return [pool[int(i)] for i in rng.integers(0, len(pool), size=count)]


def _random_word(rng: np.random.Generator, length: int) -> str:
    letters = rng.integers(ord("a"), ord("z") + 1, size=length)
    return "".join(chr(int(c)) for c in letters)


def _gen_digits(rng: np.random.Generator) -> str:
    tokens = []
    for _ in range(int(rng.integers(4, 9))):
        if rng.random() < 0.75:
            tokens.append("".join(str(int(d)) for d in rng.integers(0, 10, size=int(rng.integers(3, 9)))))
        else:
            tokens.append(_random_word(rng, int(rng.integers(2, 5))))
    return " ".join(tokens)


def _gen_symbols(rng: np.random.Generator) -> str:
    tokens = []
    for _ in range(int(rng.integers(4, 9))):
        if rng.random() < 0.7:
            tokens.append("".join(_SYMBOLS[int(i)] for i in rng.integers(0, len(_SYMBOLS), size=int(rng.integers(3, 8)))))
        else:
            tokens.append(_random_word(rng, int(rng.integers(2, 6))))
    return " ".join(tokens)


def _gen_prose(rng: np.random.Generator) -> str:
    return " ".join(_words(rng, _FILLER_WORDS, int(rng.integers(30, 61))))


def _gen_code(rng: np.random.Generator) -> str:
    tokens = _words(rng, _CODE_WORDS, int(rng.integers(8, 17)))
    for i in range(0, len(tokens), 3):
        tokens[i] = tokens[i] + "()"
    return " ".join(tokens)


def _gen_shouty(rng: np.random.Generator) -> str:
    return " ".join(_random_word(rng, int(rng.integers(3, 8))).upper() for _ in range(int(rng.integers(5, 11))))


def _gen_airy(rng: np.random.Generator) -> str:
    gap = " " * int(rng.integers(3, 7))
    return gap.join(_random_word(rng, int(rng.integers(2, 5))) for _ in range(int(rng.integers(4, 9))))


def _gen_terse(rng: np.random.Generator) -> str:
    return " ".join(_random_word(rng, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 3))))


def _gen_longwords(rng: np.random.Generator) -> str:
    return " ".join(_random_word(rng, int(rng.integers(15, 26))) for _ in range(int(rng.integers(3, 6))))


def _gen_lowent(rng: np.random.Generator) -> str:
    ch = chr(int(rng.integers(ord("a"), ord("z") + 1)))
    return " ".join(ch * int(rng.integers(3, 10)) for _ in range(int(rng.integers(3, 7))))


STRUCTURAL_PROFILES = {
    "digits": _gen_digits,
    "symbols": _gen_symbols,
    "prose": _gen_prose,
    "code": _gen_code,
    "shouty": _gen_shouty,
    "airy": _gen_airy,
    "terse": _gen_terse,
    "longwords": _gen_longwords,
    "lowent": _gen_lowent,
}


@dataclass(frozen=True)
class DatasetSpec:
    count: int
    label_ratio: float  # fraction labeled malicious
    structural_profile: str

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not (0.0 <= self.label_ratio <= 1.0):
            raise ValueError("label_ratio must be in [0, 1]")
        if self.structural_profile not in STRUCTURAL_PROFILES:
            raise ValueError(
                f"unknown structural profile {self.structural_profile!r}; "
                f"choose from {sorted(STRUCTURAL_PROFILES)}"
            )


def generate_synthetic_corpus(
    spec: Mapping[str, DatasetSpec | Mapping], seed: int
) -> list[LabeledPrompt]:
    """Deterministic synthetic prompts matching each tag's structural profile.

    Prompt texts are unique across the whole corpus (regenerated on
    collision) so exact-text lookups in scorer stubs are unambiguous.
    """
    prompts: list[LabeledPrompt] = []
    seen_texts: set[str] = set()
    for tag, raw in spec.items():
        ds = raw if isinstance(raw, DatasetSpec) else DatasetSpec(**raw)
        generate = STRUCTURAL_PROFILES[ds.structural_profile]
        rng = np.random.default_rng(stable_u64(seed, tag))
        n_malicious = int(round(ds.count * ds.label_ratio))
        for i in range(ds.count):
            text = generate(rng)
            while text in seen_texts:
                text = generate(rng)
            seen_texts.add(text)
            prompts.append(
                LabeledPrompt(
                    id=f"{tag}-{i:05d}",
                    prompt=text,
                    label="malicious" if i < n_malicious else "benign",
                    dataset_tag=tag,
                )
            )
    return prompts
