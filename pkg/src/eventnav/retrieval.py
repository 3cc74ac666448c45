"""Vector retrieval over subtask nodes.

The index holds one unit-norm embedding per subtask node that has at least
one successor (a hit without successors would contribute nothing to the
planner), and answers exact top-k cosine queries via the scan kernel. Search
is deliberately brute force: at this corpus size exactness is cheap and it
keeps the oracle tests meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import topk_scan
from .embedding import embedder_for_identity
from .errors import EmptyText, FormatError
from .kg import EventGraph, EventNode

INDEX_FORMAT = "vln-index/1"


@dataclass
class RetrievalHit:
    """One similar subtask plus its observed follow-up subtasks."""

    node: EventNode
    similarity: float
    successors: list[tuple[EventNode, int]]


class RetrievalIndex:
    """Immutable embedding index over subtask nodes with successors."""

    def __init__(self, dimension: int, embedder_identity: str,
                 node_ids: np.ndarray, matrix: np.ndarray, embedder=None):
        self.dimension = dimension
        self.embedder_identity = embedder_identity
        self.node_ids = np.ascontiguousarray(node_ids, dtype=np.int64)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self._embedder = embedder
        if self.matrix.shape != (len(self.node_ids), dimension):
            raise ValueError("matrix shape does not match node ids and dimension")

    def __len__(self) -> int:
        return len(self.node_ids)

    @property
    def embedder(self):
        if self._embedder is None:
            self._embedder = embedder_for_identity(self.embedder_identity, self.dimension)
        return self._embedder

    # --- persistence -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """One header line, then one ``node_id v0 v1 ...`` line per vector.

        Floats are written with 17 significant digits so a load restores the
        exact same values.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{INDEX_FORMAT} dim={self.dimension} embedder={self.embedder_identity}\n")
            for nid, row in zip(self.node_ids, self.matrix):
                fh.write(str(int(nid)) + " " + " ".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def load(cls, path: str | Path, embedder=None) -> "RetrievalIndex":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise FormatError("empty index file", 1)
        head = lines[0].split()
        if len(head) != 3 or head[0] != INDEX_FORMAT \
                or not head[1].startswith("dim=") or not head[2].startswith("embedder="):
            raise FormatError(f"bad index header {lines[0]!r}", 1)
        try:
            dim = int(head[1][4:])
        except ValueError as exc:
            raise FormatError(f"bad dimension {head[1]!r}", 1) from exc
        identity = head[2][len("embedder="):]
        ids: list[int] = []
        rows: list[list[float]] = []
        for lineno, raw in enumerate(lines[1:], start=2):
            if not raw.strip():
                continue
            parts = raw.split()
            if len(parts) != dim + 1:
                raise FormatError(f"expected {dim + 1} fields, got {len(parts)}", lineno)
            try:
                ids.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise FormatError(f"bad number: {exc}", lineno) from exc
        matrix = np.array(rows, dtype=np.float64) if rows else np.empty((0, dim))
        return cls(dim, identity, np.array(ids, dtype=np.int64), matrix, embedder)


def build_index(graph: EventGraph, embedder) -> RetrievalIndex:
    """Embed every subtask node that has successors, ordered by node id."""
    ids = graph.subtask_ids_with_successors()
    dim = embedder.dimension
    matrix = np.empty((len(ids), dim), dtype=np.float64)
    for row, nid in enumerate(ids):
        matrix[row] = embedder.embed(graph.node(nid).norm_text)
    return RetrievalIndex(dim, embedder.identity, np.array(ids, dtype=np.int64), matrix, embedder)


def query(index: RetrievalIndex, graph: EventGraph, text: str, k: int) -> list[RetrievalHit]:
    """Exact top-k cosine hits for ``text``.

    Hits come back sorted by similarity descending, ties broken by node id
    ascending, each carrying its successors in (weight desc, id asc) order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        return []
    qv = index.embedder.embed(text)
    if qv.shape != (index.dimension,):
        raise EmptyText(  # pragma: no cover - defensive; embedders fix dimension
            "query embedding has wrong dimension"
        )
    rows, scores = topk_scan(index.matrix, np.ascontiguousarray(qv), min(k, len(index)))
    hits = []
    for row, score in zip(rows, scores):
        nid = int(index.node_ids[row])
        hits.append(RetrievalHit(graph.node(nid), float(score), graph.successors(nid)))
    return hits


def format_knowledge(hits: list[RetrievalHit]) -> str:
    """Render hits for prompting, one successor pair per line.

    The planner's offline mock parses this exact shape back, so keep it in
    sync with :mod:`eventnav.backends`.
    """
    if not hits:
        return "no relevant knowledge found"
    lines = []
    for hit in hits:
        for succ, weight in hit.successors:
            lines.append(f'"{hit.node.text}" -> "{succ.text}" (weight {weight})')
    return "\n".join(lines)
