"""Prompt-safety gateway built on structural-feature routing.

Incoming prompts are reduced to nine lightweight structural features, routed
through a random-forest classifier to the most suitable scorer in an ensemble
of specialized "promptcops", and flagged malicious when the averaged score of
a stochastically selected member subset exceeds a calibrated threshold.
"""

from promptgate.features import FEATURE_NAMES, FeatureVector, extract_features, shannon_entropy

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "extract_features",
    "shannon_entropy",
]

__version__ = "0.1.0"
