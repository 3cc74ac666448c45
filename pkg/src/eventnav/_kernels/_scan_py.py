"""Pure numpy fallback for the top-k scan kernel."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def select_topk(scores: np.ndarray, k: int):
    """Top-k indices/values of a score vector via stable argsort."""
    n = scores.shape[0]
    k = min(int(k), n)
    if k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    # stable sort on -scores keeps row order within ties
    order = np.argsort(-scores, kind="stable")[:k].astype(np.int64)
    return order, scores[order]


def topk_scan(matrix: np.ndarray, query: np.ndarray, k: int):
    """Exact top-k of ``matrix @ query``: scores descending, ties by row asc."""
    return select_topk(matrix @ query, k)
