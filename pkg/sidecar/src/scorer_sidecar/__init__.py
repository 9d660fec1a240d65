"""Reference scorer service for the prompt-safety gateway wire contract.

Serves POST /score over a fine-tuned sequence-classification checkpoint, or
in stub mode replays the deterministic seeded score distributions used for
integration testing. Exactly one of the two is configured.
"""

__version__ = "0.1.0"
