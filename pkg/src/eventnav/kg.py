"""Event knowledge graph store.

Nodes are deduplicated task/subtask texts (keyed by their normalized form),
edges are "this subtask was followed by that one" observations with
occurrence counts, and every ingested task sequence is kept as a provenance
record. Which subtasks belong to which coarse task is part of that record,
not an edge: edges carry strictly sequential meaning.

A builder is single-writer; once saved or loaded a graph is treated as
immutable and is safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptySequence, FormatError, MalformedText, UnknownNode
from .textnorm import normalize_text

FORMAT_VERSION = "vln-eventkg/1"

KIND_COARSE = "coarse"
KIND_SUBTASK = "subtask"


@dataclass
class EventNode:
    """A deduplicated task or subtask text.

    ``text`` keeps the first surface form seen; ``norm_text`` is the identity
    key. A node observed in both roles is kept as ``subtask`` so sequential
    edges stay valid.
    """

    id: int
    text: str
    norm_text: str
    kind: str
    sources: set[str] = field(default_factory=set)


@dataclass
class TaskSequence:
    """One coarse task with its ordered subtasks, as extracted from a record."""

    coarse_text: str
    subtasks: list[str]
    dataset: str = "custom"
    record_id: str = ""


@dataclass
class SequenceRecord:
    """Provenance entry: a stored TaskSequence plus its resolved node ids."""

    dataset: str
    record_id: str
    coarse_text: str
    subtasks: list[str]
    coarse_id: int
    subtask_ids: list[int]

    def as_task_sequence(self) -> TaskSequence:
        return TaskSequence(self.coarse_text, list(self.subtasks), self.dataset, self.record_id)


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    sequence_count: int
    per_dataset: tuple[tuple[str, int], ...]

    def dataset_counts(self) -> dict[str, int]:
        return dict(self.per_dataset)


class EventGraph:
    """Mutable event knowledge graph builder and read surface."""

    def __init__(self) -> None:
        self.nodes: list[EventNode] = []
        self._by_norm: dict[str, int] = {}
        # adjacency: from_id -> {to_id: weight}
        self._adj: dict[int, dict[int, int]] = {}
        self._edge_count = 0
        self.sequences: list[SequenceRecord] = []

    # --- node access ---------------------------------------------------

    def node(self, node_id: int) -> EventNode:
        if not 0 <= node_id < len(self.nodes):
            raise UnknownNode(f"no node with id {node_id}")
        return self.nodes[node_id]

    def find(self, text: str) -> EventNode | None:
        """Look a node up by (normalized) text."""
        nid = self._by_norm.get(normalize_text(text))
        return None if nid is None else self.nodes[nid]

    def _intern(self, text: str, kind: str, dataset: str) -> int:
        norm = normalize_text(text)
        nid = self._by_norm.get(norm)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(EventNode(nid, text, norm, kind, {dataset}))
            self._by_norm[norm] = nid
        else:
            node = self.nodes[nid]
            node.sources.add(dataset)
            if kind == KIND_SUBTASK:
                node.kind = KIND_SUBTASK
        return nid

    # --- mutation --------------------------------------------------------

    def insert_sequence(self, seq: TaskSequence) -> "EventGraph":
        """Ingest one task sequence.

        Dedups nodes, increments every consecutive-pair edge by one, and
        appends a provenance record. Validation happens before any mutation
        so a bad sequence leaves the graph untouched.
        """
        if not seq.subtasks:
            raise EmptySequence(f"record {seq.record_id!r} has no subtasks")
        if not normalize_text(seq.coarse_text):
            raise MalformedText(f"record {seq.record_id!r}: coarse text normalizes to empty")
        for sub in seq.subtasks:
            if not normalize_text(sub):
                raise MalformedText(f"record {seq.record_id!r}: subtask {sub!r} normalizes to empty")

        coarse_id = self._intern(seq.coarse_text, KIND_COARSE, seq.dataset)
        sub_ids = [self._intern(s, KIND_SUBTASK, seq.dataset) for s in seq.subtasks]
        for a, b in zip(sub_ids, sub_ids[1:]):
            out = self._adj.setdefault(a, {})
            if b not in out:
                self._edge_count += 1
                out[b] = 0
            out[b] += 1
        self.sequences.append(
            SequenceRecord(seq.dataset, seq.record_id, seq.coarse_text, list(seq.subtasks), coarse_id, sub_ids)
        )
        return self

    def merge(self, other: "EventGraph") -> "EventGraph":
        """Non-destructive union: equivalent to re-inserting every sequence
        of both graphs into an empty one, so ids of ``self`` are preserved."""
        merged = EventGraph()
        for rec in self.sequences:
            merged.insert_sequence(rec.as_task_sequence())
        for rec in other.sequences:
            merged.insert_sequence(rec.as_task_sequence())
        return merged

    # --- queries ---------------------------------------------------------

    def successors(self, node_id: int) -> list[tuple[EventNode, int]]:
        """Out-edges of a node as (node, weight), weight desc then id asc."""
        self.node(node_id)
        out = self._adj.get(node_id, {})
        ranked = sorted(out.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(self.nodes[to_id], w) for to_id, w in ranked]

    def out_degree(self, node_id: int) -> int:
        return len(self._adj.get(node_id, {}))

    def subtask_ids_with_successors(self) -> list[int]:
        """Ids of subtask-kind nodes with at least one out-edge, ascending."""
        return [
            n.id
            for n in self.nodes
            if n.kind == KIND_SUBTASK and self._adj.get(n.id)
        ]

    def edges(self) -> list[tuple[int, int, int]]:
        """All edges as (from_id, to_id, weight), sorted."""
        return sorted(
            (a, b, w) for a, out in self._adj.items() for b, w in out.items()
        )

    def stats(self) -> GraphStats:
        counts: dict[str, int] = {}
        for rec in self.sequences:
            counts[rec.dataset] = counts.get(rec.dataset, 0) + 1
        return GraphStats(
            node_count=len(self.nodes),
            edge_count=self._edge_count,
            sequence_count=len(self.sequences),
            per_dataset=tuple(sorted(counts.items())),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventGraph):
            return NotImplemented
        return (
            [(n.id, n.text, n.norm_text, n.kind, sorted(n.sources)) for n in self.nodes]
            == [(n.id, n.text, n.norm_text, n.kind, sorted(n.sources)) for n in other.nodes]
            and self.edges() == other.edges()
            and [
                (r.dataset, r.record_id, r.coarse_text, r.subtasks, r.coarse_id, r.subtask_ids)
                for r in self.sequences
            ]
            == [
                (r.dataset, r.record_id, r.coarse_text, r.subtasks, r.coarse_id, r.subtask_ids)
                for r in other.sequences
            ]
        )

    # --- persistence -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the graph as line-delimited JSON records (UTF-8)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dumps({"record": "header", "format": FORMAT_VERSION}) + "\n")
            for n in self.nodes:
                fh.write(
                    _dumps(
                        {
                            "record": "node",
                            "id": n.id,
                            "text": n.text,
                            "norm_text": n.norm_text,
                            "kind": n.kind,
                            "sources": sorted(n.sources),
                        }
                    )
                    + "\n"
                )
            for a, b, w in self.edges():
                fh.write(_dumps({"record": "edge", "from_id": a, "to_id": b, "weight": w}) + "\n")
            for r in self.sequences:
                fh.write(
                    _dumps(
                        {
                            "record": "seq",
                            "dataset": r.dataset,
                            "record_id": r.record_id,
                            "coarse_text": r.coarse_text,
                            "subtasks": r.subtasks,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "EventGraph":
        """Read a graph written by :meth:`save`.

        Raises :class:`FormatError` with the offending line number on any
        structural problem (bad JSON, dangling ids, wrong header).
        """
        g = cls()
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise FormatError("empty file, missing header", 1)
        for lineno, raw in enumerate(lines, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad JSON ({exc.msg})", lineno) from exc
            if not isinstance(rec, dict) or "record" not in rec:
                raise FormatError("record object without 'record' field", lineno)
            kind = rec["record"]
            if lineno == 1:
                if kind != "header" or rec.get("format") != FORMAT_VERSION:
                    raise FormatError(f"expected header with format {FORMAT_VERSION!r}", lineno)
                continue
            try:
                if kind == "node":
                    g._load_node(rec, lineno)
                elif kind == "edge":
                    g._load_edge(rec, lineno)
                elif kind == "seq":
                    g._load_seq(rec, lineno)
                elif kind == "header":
                    raise FormatError("duplicate header", lineno)
                else:
                    raise FormatError(f"unknown record kind {kind!r}", lineno)
            except KeyError as exc:
                raise FormatError(f"missing field {exc.args[0]!r}", lineno) from exc
        return g

    def _load_node(self, rec: dict, lineno: int) -> None:
        nid = rec["id"]
        if nid != len(self.nodes):
            raise FormatError(f"node id {nid} out of order (expected {len(self.nodes)})", lineno)
        norm = rec["norm_text"]
        if not norm or norm in self._by_norm:
            raise FormatError(f"empty or duplicate norm_text {norm!r}", lineno)
        if rec["kind"] not in (KIND_COARSE, KIND_SUBTASK):
            raise FormatError(f"bad node kind {rec['kind']!r}", lineno)
        self.nodes.append(EventNode(nid, rec["text"], norm, rec["kind"], set(rec["sources"])))
        self._by_norm[norm] = nid

    def _load_edge(self, rec: dict, lineno: int) -> None:
        a, b, w = rec["from_id"], rec["to_id"], rec["weight"]
        for nid in (a, b):
            if not isinstance(nid, int) or not 0 <= nid < len(self.nodes):
                raise FormatError(f"edge references unknown node id {nid}", lineno)
            if self.nodes[nid].kind != KIND_SUBTASK:
                raise FormatError(f"edge endpoint {nid} is not a subtask node", lineno)
        if not isinstance(w, int) or w < 1:
            raise FormatError(f"bad edge weight {w!r}", lineno)
        out = self._adj.setdefault(a, {})
        if b in out:
            raise FormatError(f"duplicate edge ({a}, {b})", lineno)
        out[b] = w
        self._edge_count += 1

    def _load_seq(self, rec: dict, lineno: int) -> None:
        coarse_id = self._by_norm.get(normalize_text(rec["coarse_text"]))
        if coarse_id is None:
            raise FormatError(f"sequence coarse text has no node: {rec['coarse_text']!r}", lineno)
        sub_ids = []
        for s in rec["subtasks"]:
            sid = self._by_norm.get(normalize_text(s))
            if sid is None:
                raise FormatError(f"sequence subtask has no node: {s!r}", lineno)
            sub_ids.append(sid)
        self.sequences.append(
            SequenceRecord(rec["dataset"], rec["record_id"], rec["coarse_text"], list(rec["subtasks"]), coarse_id, sub_ids)
        )


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def build_graph(sequences: list[TaskSequence]) -> EventGraph:
    """Convenience constructor: insert every sequence into a fresh graph."""
    g = EventGraph()
    for seq in sequences:
        g.insert_sequence(seq)
    return g
