"""Text embedders behind one small interface.

The default is a deterministic signed feature-hashing bag-of-words embedder
(unigrams + bigrams, blake2b bucket/sign, unit norm): it runs offline, is
identical across platforms and runs, and is good enough to rank near-duplicate
task texts. A remote semantic embedder can be plugged in behind the same
interface for real deployments.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import BackendError, EmptyText
from .textnorm import normalize_text, tokenize

DEFAULT_DIMENSION = 256


class HashingEmbedder:
    """Deterministic feature-hashing embedder over token uni- and bigrams."""

    name = "hash-bow/1"

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    @property
    def identity(self) -> str:
        return self.name

    def embed(self, text: str) -> np.ndarray:
        """Unit-norm float64 vector for ``text``.

        Raises :class:`EmptyText` if the text normalizes to empty. A text
        with no alphanumeric tokens maps to the first basis vector so the
        result is always exactly unit length.
        """
        norm = normalize_text(text)
        if not norm:
            raise EmptyText(f"cannot embed {text!r}")
        vec = np.zeros(self.dimension, dtype=np.float64)
        tokens = tokenize(norm)
        feats = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        for feat in feats:
            h = int.from_bytes(
                hashlib.blake2b(feat.encode("utf-8"), digest_size=8).digest(), "big"
            )
            bucket = h % self.dimension
            vec[bucket] += 1.0 if (h >> 63) & 1 == 0 else -1.0
        n = float(np.linalg.norm(vec))
        if n == 0.0:
            vec[0] = 1.0
        else:
            vec /= n
        return vec


class RemoteEmbedder:
    """HTTP embedder: POST {"model", "text"} -> {"vector": [...]}.

    Endpoint and secret come from ``EMBEDDER_URL`` / ``EMBEDDER_KEY`` unless
    given explicitly. Responses are re-normalized to unit length.
    """

    def __init__(self, model: str, dimension: int, url: str | None = None,
                 key: str | None = None, timeout: float = 30.0):
        self.model = model
        self.dimension = dimension
        self.url = url or os.environ.get("EMBEDDER_URL", "")
        self.key = key or os.environ.get("EMBEDDER_KEY", "")
        self.timeout = timeout
        if not self.url:
            raise BackendError("remote embedder needs EMBEDDER_URL")

    @property
    def identity(self) -> str:
        return f"remote:{self.model}"

    def embed(self, text: str) -> np.ndarray:
        import requests

        if not normalize_text(text):
            raise EmptyText(f"cannot embed {text!r}")
        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        try:
            resp = requests.post(
                self.url,
                json={"model": self.model, "text": text},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            values = resp.json()["vector"]
        except Exception as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dimension,) or not np.all(np.isfinite(vec)):
            raise BackendError("embedding response has wrong shape or non-finite values")
        n = float(np.linalg.norm(vec))
        if n == 0.0:
            vec = np.zeros(self.dimension)
            vec[0] = 1.0
            return vec
        return vec / n


def embedder_for_identity(identity: str, dimension: int):
    """Reconstruct an embedder from its persisted identity string.

    Only the hashing embedder can be rebuilt without configuration; remote
    identities raise so the caller knows to supply one explicitly.
    """
    if identity == HashingEmbedder.name:
        return HashingEmbedder(dimension)
    raise BackendError(
        f"cannot reconstruct embedder {identity!r}; pass one explicitly"
    )
