"""Text normalization and tokenization shared by the graph and the embedder.

``normalize_text`` is the node-identity function: two task strings that
normalize to the same value are the same node everywhere in the system.
"""

from __future__ import annotations

import re

_WHITESPACE = re.compile(r"\s+")
_TOKEN = re.compile(r"[a-z0-9]+")


def normalize_text(text: str) -> str:
    """Normalize a task string into its dedup key.

    Trailing sentence punctuation (``.!?``) is stripped, runs of whitespace
    collapse to single spaces, surrounding whitespace is trimmed, and the
    result is lowercased. May return the empty string.
    """
    s = text.rstrip().rstrip(".!?")
    s = _WHITESPACE.sub(" ", s)
    return s.strip().lower()


def tokenize(norm_text: str) -> list[str]:
    """Split normalized text into lowercase alphanumeric tokens."""
    return _TOKEN.findall(norm_text)
