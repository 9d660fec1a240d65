"""Structural feature extraction for prompt routing.

Nine lightweight features computed from raw prompt text. They are cheap,
deterministic, and language-agnostic by design: character classes, word
shape, keyword hits, and character-level Shannon entropy. All proportions
use the total character count as denominator and empty input yields an
all-zero vector, so extraction is total over arbitrary text.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

FEATURE_NAMES: tuple[str, ...] = (
    "prompt_length",
    "whitespace_proportion",
    "special_char_proportion",
    "avg_word_length",
    "digit_proportion",
    "uppercase_proportion",
    "code_keyword_count",
    "nl_word_count",
    "shannon_entropy",
)

# Fixed vocabulary for the two keyword counters. Matching is case-insensitive
# on whitespace-delimited tokens with leading/trailing punctuation stripped.
# "for" is in both lists on purpose; each counter consults its own list.
CODE_KEYWORDS: frozenset[str] = frozenset(
    {
        "if", "else", "for", "while", "def", "return", "import", "class",
        "function", "var", "let", "const", "print", "lambda", "try", "except",
        "int", "str", "null", "true", "false",
    }
)

NL_WORDS: frozenset[str] = frozenset(
    {
        "the", "and", "you", "do", "a", "to", "of", "in", "is", "it",
        "that", "for", "on", "with", "as", "this", "are", "be", "or", "at",
    }
)


@dataclass(frozen=True)
class FeatureVector:
    """The nine structural features of one prompt."""

    prompt_length: int
    whitespace_proportion: float
    special_char_proportion: float
    avg_word_length: float
    digit_proportion: float
    uppercase_proportion: float
    code_keyword_count: int
    nl_word_count: int
    shannon_entropy: float

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    def as_array(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        """Project onto `names` (a subset/reordering of FEATURE_NAMES)."""
        return np.array([float(getattr(self, name)) for name in names], dtype=np.float64)


def shannon_entropy(text: str) -> float:
    """Base-2 entropy of the character frequency distribution; 0 for empty text."""
    n = len(text)
    if n == 0:
        return 0.0
    h = 0.0
    for count in Counter(text).values():
        p = count / n
        h -= p * math.log2(p)
    return h


def _strip_token(token: str) -> str:
    """Drop leading/trailing non-alphanumeric characters from a token."""
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def extract_features(prompt: str) -> FeatureVector:
    """Compute the nine structural features of `prompt`.

    Characters are Unicode scalar values. Words are maximal runs of
    non-whitespace. Whitespace, digit (ASCII 0-9) and special (neither
    alphanumeric nor whitespace) classes are disjoint by construction.
    """
    n = len(prompt)
    if n == 0:
        return FeatureVector(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0)

    whitespace = 0
    special = 0
    digits = 0
    uppercase = 0
    for ch in prompt:
        if ch.isspace():
            whitespace += 1
        elif not ch.isalnum():
            special += 1
        if "0" <= ch <= "9":
            digits += 1
        if ch.isupper():
            uppercase += 1

    words = prompt.split()
    if words:
        avg_word_length = sum(len(w) for w in words) / len(words)
    else:
        avg_word_length = 0.0

    code_kw = 0
    nl_kw = 0
    for token in words:
        stripped = _strip_token(token).lower()
        if not stripped:
            continue
        if stripped in CODE_KEYWORDS:
            code_kw += 1
        if stripped in NL_WORDS:
            nl_kw += 1

    return FeatureVector(
        prompt_length=n,
        whitespace_proportion=whitespace / n,
        special_char_proportion=special / n,
        avg_word_length=avg_word_length,
        digit_proportion=digits / n,
        uppercase_proportion=uppercase / n,
        code_keyword_count=code_kw,
        nl_word_count=nl_kw,
        shannon_entropy=shannon_entropy(prompt),
    )


def features_matrix(prompts: Iterable[str], names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
    """Stack feature vectors for `prompts` into an (n, len(names)) float64 matrix."""
    rows = [extract_features(p).as_array(names) for p in prompts]
    if not rows:
        return np.empty((0, len(names)), dtype=np.float64)
    return np.vstack(rows)
