"""Checkpoint-backed scorer: a sequence-classification model behind /score.

Loads any transformers-compatible binary classifier (e.g. a fine-tuned
compact prompt-safety model) and returns the softmax probability of the
malicious class. The malicious class index comes from the config override
when given, otherwise from an id2label entry that looks unsafe, otherwise
index 1.
"""

from __future__ import annotations

import re
from typing import Sequence

_UNSAFE_LABEL = re.compile(r"mal|unsafe|attack|inject|jailbreak|toxic", re.IGNORECASE)


class CheckpointScorer:
    def __init__(self, checkpoint_path: str, device: str = "cpu", malicious_label: int | None = None):
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise RuntimeError(
                "checkpoint mode needs the 'model' extra: pip install scorer-sidecar[model]"
            ) from exc

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(checkpoint_path)
        self._model = AutoModelForSequenceClassification.from_pretrained(checkpoint_path)
        self._model.to(device)
        self._model.eval()
        self._device = device
        self._malicious_index = (
            malicious_label if malicious_label is not None else self._find_malicious_index()
        )
        n_classes = int(self._model.config.num_labels)
        if not (0 <= self._malicious_index < n_classes):
            raise ValueError(f"malicious class index {self._malicious_index} out of range for {n_classes} labels")

    def _find_malicious_index(self) -> int:
        id2label = getattr(self._model.config, "id2label", None) or {}
        for idx, label in id2label.items():
            if _UNSAFE_LABEL.search(str(label)):
                return int(idx)
        return 1

    def score_batch(self, prompts: Sequence[str]) -> list[float]:
        torch = self._torch
        encoded = self._tokenizer(
            list(prompts), padding=True, truncation=True, max_length=512, return_tensors="pt"
        ).to(self._device)
        with torch.no_grad():
            logits = self._model(**encoded).logits
        probabilities = torch.softmax(logits, dim=-1)[:, self._malicious_index]
        return [float(p) for p in probabilities.cpu()]
