"""Deterministic seed derivation shared across modules.

Per-request randomness derives from (component seed, request seed) pairs and
string identifiers hash through sha256, so runs replay exactly on any
platform and results never depend on iteration order or process state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_u64(*parts: str | int) -> int:
    """Collapse parts into a stable unsigned 64-bit seed."""
    joined = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def pair_rng(component_seed: int, request_seed: int) -> np.random.Generator:
    """Generator seeded by the (component, request) seed pair."""
    return np.random.default_rng((component_seed, request_seed))


def request_seed_for(base_seed: int, prompt_id: str) -> int:
    """Per-prompt request seed derived from a base seed and the prompt id."""
    return stable_u64(base_seed, prompt_id)
