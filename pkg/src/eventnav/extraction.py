"""Turn raw dataset records into task sequences.

Three routes, matching the three shapes raw data comes in:

* structured records (coarse text + subtask list) pass straight through,
* paragraph records go through a text-generation backend with a strict
  "TASK:/numbered list" output contract and one retry on a bad reply,
* a deterministic heuristic splitter covers offline runs and CI.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BackendError,
    EmptySubtaskList,
    ExtractionError,
    ExtractionFailed,
    MissingField,
    NonMonotoneNumbering,
    NoSubtasks,
    NoTaskLine,
)
from .kg import TaskSequence
from .textnorm import normalize_text

KNOWN_DATASETS = ("ALFRED", "R2R", "REVERIE", "custom")

# field names tried in order when no explicit mapping is configured
AUTO_COARSE_FIELDS = ("goal", "task", "coarse", "coarse_text")
AUTO_SUBTASK_FIELDS = ("subgoals", "subtasks", "steps")
AUTO_PARAGRAPH_FIELDS = ("instruction", "instructions", "paragraph", "text")


@dataclass
class RawRecord:
    """One line of a dataset file: a tag, an id, and named text fields."""

    dataset: str
    record_id: str
    payload: dict


@dataclass(frozen=True)
class FieldMapping:
    """Which payload fields hold what, for one dataset."""

    coarse_field: str | None = None
    subtasks_field: str | None = None
    paragraph_field: str | None = None


@dataclass
class ExtractionReport:
    accepted: int = 0
    rejected: int = 0
    rejects: list[tuple[str, str]] = field(default_factory=list)

    def reject(self, record_id: str, error: Exception | str) -> None:
        self.rejected += 1
        self.rejects.append((record_id, str(error)))


def _pick_field(payload: dict, explicit: str | None, auto: tuple[str, ...],
                want_list: bool) -> tuple[str, object] | None:
    names = (explicit,) if explicit else auto
    for name in names:
        if name in payload:
            value = payload[name]
            if want_list == isinstance(value, list):
                return name, value
    return None


def parse_structured(record: RawRecord, mapping: FieldMapping | None = None) -> TaskSequence:
    """Pass-through parse of a key-value record, order preserved."""
    mapping = mapping or FieldMapping()
    coarse = _pick_field(record.payload, mapping.coarse_field, AUTO_COARSE_FIELDS, want_list=False)
    if coarse is None:
        raise MissingField(f"record {record.record_id!r} has no coarse-task field")
    subs = _pick_field(record.payload, mapping.subtasks_field, AUTO_SUBTASK_FIELDS, want_list=True)
    if subs is None:
        raise MissingField(f"record {record.record_id!r} has no subtask-list field")
    subtasks = [str(s).strip() for s in subs[1] if normalize_text(str(s))]
    if not subtasks:
        raise EmptySubtaskList(f"record {record.record_id!r}")
    return TaskSequence(str(coarse[1]).strip(), subtasks, record.dataset, record.record_id)


def record_shape(record: RawRecord, mapping: FieldMapping | None = None) -> str:
    """Classify a record as "structured", "split", or "unified"."""
    mapping = mapping or FieldMapping()
    if _pick_field(record.payload, mapping.subtasks_field, AUTO_SUBTASK_FIELDS, True):
        return "structured"
    has_paragraph = _pick_field(record.payload, mapping.paragraph_field, AUTO_PARAGRAPH_FIELDS, False)
    if not has_paragraph:
        raise MissingField(f"record {record.record_id!r} has no paragraph field")
    has_coarse = _pick_field(record.payload, mapping.coarse_field, AUTO_COARSE_FIELDS, False)
    return "split" if has_coarse else "unified"


_PROMPT_HEADER = (
    "Split the navigation instructions below into one coarse task and an "
    "ordered list of atomic subtasks.\n"
    "Reply in exactly this format: a first line \"TASK: <coarse task>\", "
    "then one line per subtask numbered \"1. <subtask>\", \"2. <subtask>\" "
    "and so on. No other text."
)


def build_extraction_prompt(record: RawRecord, mapping: FieldMapping | None = None) -> str:
    """Deterministic extraction prompt for a paragraph-shaped record."""
    mapping = mapping or FieldMapping()
    shape = record_shape(record, mapping)
    if shape == "structured":
        raise MissingField(f"record {record.record_id!r} is already structured")
    paragraph = _pick_field(record.payload, mapping.paragraph_field, AUTO_PARAGRAPH_FIELDS, False)
    blocks = [_PROMPT_HEADER]
    if shape == "split":
        coarse = _pick_field(record.payload, mapping.coarse_field, AUTO_COARSE_FIELDS, False)
        blocks.append(f"COARSE:\n{coarse[1]}")
    blocks.append(f"INSTRUCTIONS:\n{paragraph[1]}")
    return "\n\n".join(blocks)


_TASK_LINE = re.compile(r"^\s*task\s*:\s*(\S.*?)\s*$", re.IGNORECASE)
_NUMBERED = re.compile(r"^\s*(\d+)[.)]\s+(\S.*?)\s*$")
_BULLET = re.compile(r"^\s*-\s+(\S.*?)\s*$")


def parse_list_response(text: str) -> tuple[str, list[str]]:
    """Tolerant parse of a "TASK: ... / 1. ... / 2. ..." reply.

    Accepts "1.", "1)" and "- " bullets after the task line; any numbers
    present must be strictly increasing.
    """
    lines = text.splitlines()
    task = None
    start = 0
    for i, line in enumerate(lines):
        m = _TASK_LINE.match(line)
        if m:
            task, start = m.group(1), i + 1
            break
    if task is None:
        raise NoTaskLine("no 'TASK:' line in response")
    numbers: list[int] = []
    subtasks: list[str] = []
    for line in lines[start:]:
        m = _NUMBERED.match(line)
        if m:
            numbers.append(int(m.group(1)))
            subtasks.append(m.group(2))
            continue
        m = _BULLET.match(line)
        if m:
            subtasks.append(m.group(1))
    if numbers and any(b <= a for a, b in zip(numbers, numbers[1:])):
        raise NonMonotoneNumbering(f"list numbers not strictly increasing: {numbers}")
    if not subtasks:
        raise NoSubtasks("no subtask lines in response")
    return task, subtasks


def format_reference_answer(seq: TaskSequence) -> str:
    """The exact reply shape the extraction prompt asks for."""
    lines = [f"TASK: {seq.coarse_text}"]
    lines += [f"{i}. {s}" for i, s in enumerate(seq.subtasks, start=1)]
    return "\n".join(lines)


def extract_with_backend(record: RawRecord, backend,
                         mapping: FieldMapping | None = None) -> TaskSequence:
    """Prompt a text backend and parse its reply, retrying once on failure."""
    prompt = build_extraction_prompt(record, mapping)
    response = backend.complete(prompt)
    try:
        coarse, subtasks = parse_list_response(response)
    except ExtractionError as first_error:
        retry = (
            prompt
            + f"\n\nYour previous reply could not be parsed "
            f"({type(first_error).__name__}: {first_error}). "
            "Follow the required format exactly."
        )
        response = backend.complete(retry)
        try:
            coarse, subtasks = parse_list_response(response)
        except ExtractionError as second_error:
            raise ExtractionFailed(
                f"record {record.record_id!r}: {second_error}"
            ) from second_error
    return TaskSequence(coarse, subtasks, record.dataset, record.record_id)


_SENTENCE_END = re.compile(r"[.!?]")
_FRAGMENT_SPLIT = re.compile(r"[.;]|\bthen\b|,\s*and\b", re.IGNORECASE)


def extract_heuristic(record: RawRecord, mapping: FieldMapping | None = None) -> TaskSequence:
    """Deterministic offline splitter for paragraph records.

    The coarse task is the dedicated coarse field when present, otherwise the
    first sentence. The rest is split at sentence/clause boundaries
    (``.``, ``;``, "then", ", and") and fragments under three words are
    dropped. A stand-in for backend extraction, not a claim about quality.
    """
    mapping = mapping or FieldMapping()
    shape = record_shape(record, mapping)
    if shape == "structured":
        raise MissingField(f"record {record.record_id!r} is already structured")
    paragraph = str(_pick_field(record.payload, mapping.paragraph_field, AUTO_PARAGRAPH_FIELDS, False)[1])
    if shape == "split":
        coarse = str(_pick_field(record.payload, mapping.coarse_field, AUTO_COARSE_FIELDS, False)[1]).strip()
        body = paragraph
    else:
        m = _SENTENCE_END.search(paragraph)
        if m:
            coarse, body = paragraph[: m.start()].strip(), paragraph[m.end():]
        else:
            coarse, body = paragraph.strip(), ""
    fragments = [f.strip() for f in _FRAGMENT_SPLIT.split(body)]
    subtasks = [f for f in fragments if len(f.split()) >= 3]
    if not subtasks:
        raise EmptySubtaskList(f"record {record.record_id!r}: no usable fragments")
    return TaskSequence(coarse, subtasks, record.dataset, record.record_id)


def process_records(records: list[RawRecord], mode: str = "auto", backend=None,
                    mappings: dict[str, FieldMapping] | None = None,
                    ) -> tuple[list[TaskSequence], ExtractionReport]:
    """Run a batch of records through one extraction route.

    ``mode`` is "structured", "heuristic", "backend", or "auto" (structured
    when the record has a subtask list, heuristic otherwise). Failures are
    counted and reported per record, never silently dropped.
    """
    if mode == "backend" and backend is None:
        raise BackendError("backend mode needs a backend")
    mappings = mappings or {}
    report = ExtractionReport()
    sequences: list[TaskSequence] = []
    for record in records:
        mapping = mappings.get(record.dataset)
        try:
            if mode == "auto":
                route = "structured" if record_shape(record, mapping) == "structured" else "heuristic"
            else:
                route = mode
            if route == "structured":
                seq = parse_structured(record, mapping)
            elif route == "heuristic":
                seq = extract_heuristic(record, mapping)
            elif route == "backend":
                seq = extract_with_backend(record, backend, mapping)
            else:
                raise ValueError(f"unknown mode {mode!r}")
            sequences.append(seq)
            report.accepted += 1
        except (ExtractionError, BackendError) as exc:
            report.reject(record.record_id, exc)
    return sequences, report


# --- file plumbing ----------------------------------------------------------

def load_raw_records(path: str | Path, dataset: str | None = None,
                     ) -> tuple[list[RawRecord], list[tuple[str, str]]]:
    """Read line-delimited JSON records; malformed lines are returned as
    (``line N``, error) rejects instead of aborting the whole file."""
    records: list[RawRecord] = []
    rejects: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                if not isinstance(obj, dict):
                    raise TypeError("record is not an object")
            except (json.JSONDecodeError, TypeError) as exc:
                rejects.append((f"line {lineno}", str(exc)))
                continue
            tag = obj.pop("dataset", dataset or "custom")
            rid = str(obj.pop("record_id", f"line {lineno}"))
            if not obj:
                rejects.append((rid, "record has no payload fields"))
                continue
            records.append(RawRecord(tag, rid, obj))
    return records, rejects


def save_sequences(sequences: list[TaskSequence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps(
                {
                    "coarse_text": seq.coarse_text,
                    "subtasks": seq.subtasks,
                    "dataset": seq.dataset,
                    "record_id": seq.record_id,
                },
                ensure_ascii=False, sort_keys=True, separators=(",", ":"),
            ) + "\n")


def load_sequences(path: str | Path) -> list[TaskSequence]:
    out: list[TaskSequence] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            obj = json.loads(raw)
            out.append(TaskSequence(obj["coarse_text"], list(obj["subtasks"]),
                                    obj.get("dataset", "custom"), obj.get("record_id", "")))
    return out
