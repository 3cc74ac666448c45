"""Proposal backends: mock, scripted, record/replay cassette, remote HTTP.

Every backend exposes ``identity`` and ``complete(prompt) -> response``.
The mock and scripted backends are deterministic text-in/text-out planners
that make end-to-end runs hermetic; the cassette wraps any backend so live
responses can be recorded once and replayed forever.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from pathlib import Path

from . import planner as _p
from .errors import BackendError, CassetteMiss
from .textnorm import normalize_text

_KNOWLEDGE_LINE = re.compile(r'^"(?P<hit>.*)" -> "(?P<succ>.*)" \(weight (?P<weight>\d+)\)$')
_HISTORY_LINE = re.compile(r"^- (?P<text>.*) \[(?P<outcome>completed|backtracked)\]$")
_FAILED_LINE = re.compile(r"^- (?P<text>.*)$")


def _split_sections(prompt: str) -> dict[str, list[str]]:
    """Group prompt lines under their section headers."""
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in prompt.splitlines():
        if line in (_p.SECTION_HISTORY, _p.SECTION_KNOWLEDGE, _p.SECTION_FAILED):
            current = sections.setdefault(line, [])
        elif line in (_p.REPLAN_NOTE, _p.CONTRACT):
            current = None
        elif current is not None:
            current.append(line)
    return sections


class MockPlanner:
    """Knowledge-follower: propose the top hit's best unused successor.

    Parses its own prompt format, walks the KNOWLEDGE section, and answers
    with the highest-weight successor of the first (most similar) hit that
    is neither already completed nor rejected at this position. When no
    candidate is left it declares the task done.
    """

    identity = "mock/1"

    def complete(self, prompt: str) -> str:
        sections = _split_sections(prompt)
        completed = set()
        for line in sections.get(_p.SECTION_HISTORY, []):
            m = _HISTORY_LINE.match(line)
            if m and m.group("outcome") == _p.OUTCOME_COMPLETED:
                completed.add(normalize_text(m.group("text")))
        failed = set()
        for line in sections.get(_p.SECTION_FAILED, []):
            m = _FAILED_LINE.match(line)
            if m:
                failed.add(normalize_text(m.group("text")))
        top_hit: str | None = None
        for line in sections.get(_p.SECTION_KNOWLEDGE, []):
            m = _KNOWLEDGE_LINE.match(line)
            if not m:
                continue
            if top_hit is None:
                top_hit = m.group("hit")
            if m.group("hit") != top_hit:
                continue
            candidate = m.group("succ")
            if normalize_text(candidate) not in completed | failed:
                return f"NEXT: {candidate}"
        return "DONE"


class ScriptedPlanner:
    """Ground-truth follower with paraphrase re-planning.

    Proposes the episode's subtasks in order; when asked to re-plan it keeps
    the same target but rewords it, the way a competent planner would retry a
    step rather than abandon it. Stateless: position and retry count are read
    back out of the prompt's HISTORY and FAILED sections.
    """

    identity = "scripted/1"

    REPHRASE = (
        "head toward {}",
        "make your way to {}",
        "approach {}",
        "go over to {}",
    )

    def __init__(self, variants: list[list[str]]):
        if any(not v for v in variants):
            raise ValueError("every position needs at least one variant")
        self.variants = variants

    @classmethod
    def for_episode(cls, episode, world) -> "ScriptedPlanner":
        """Build position variants from an episode's targets and captions."""
        variants = []
        for text, target in episode.gt_subtasks:
            caption = world.viewpoints[target].caption
            variants.append([text] + [t.format(caption) for t in cls.REPHRASE])
        return cls(variants)

    def complete(self, prompt: str) -> str:
        sections = _split_sections(prompt)
        position = sum(
            1
            for line in sections.get(_p.SECTION_HISTORY, [])
            if (m := _HISTORY_LINE.match(line)) and m.group("outcome") == _p.OUTCOME_COMPLETED
        )
        if position >= len(self.variants):
            return "DONE"
        options = self.variants[position]
        retries = sum(
            1 for line in sections.get(_p.SECTION_FAILED, []) if _FAILED_LINE.match(line)
        )
        if retries >= len(options):
            return "DONE"
        return f"NEXT: {options[retries]}"


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class RecordingCassette:
    """Pass-through backend that appends (prompt, response) pairs to a file.

    A prompt already on tape is answered from the recording so a re-run
    against the same file stays hermetic and the tape gains no duplicates.
    """

    def __init__(self, inner, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.identity = f"record({inner.identity})"
        self._seen: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            self._seen = _read_cassette(self.path)

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        with self._lock:
            if digest in self._seen:
                return self._seen[digest]
        response = self.inner.complete(prompt)
        with self._lock:
            if digest in self._seen:
                return self._seen[digest]
            self._seen[digest] = response
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"prompt_sha256": digest, "prompt": prompt, "response": response},
                    ensure_ascii=False, sort_keys=True, separators=(",", ":"),
                ) + "\n")
        return response


class ReplayCassette:
    """Answer prompts from a recorded cassette; unknown prompts are errors."""

    identity = "replay/1"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._responses = _read_cassette(self.path)

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        if digest not in self._responses:
            raise CassetteMiss(f"prompt {digest[:12]}... not in cassette {self.path}")
        return self._responses[digest]


def _read_cassette(path: Path) -> dict[str, str]:
    responses: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            obj = json.loads(raw)
            responses[obj["prompt_sha256"]] = obj["response"]
    return responses


def read_cassette_prompts(path: str | Path) -> list[str]:
    """All recorded prompts, in tape order (used by audits and tests)."""
    prompts = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            if raw.strip():
                prompts.append(json.loads(raw)["prompt"])
    return prompts


class RemoteBackend:
    """Single-endpoint HTTP backend.

    Sends ``{"model", "prompt", "max_tokens", "temperature": 0}`` as JSON and
    expects ``{"response": "..."}`` back. Endpoint and credential come from
    ``BACKEND_URL`` / ``BACKEND_KEY`` unless given explicitly.
    """

    def __init__(self, model: str, url: str | None = None, key: str | None = None,
                 max_tokens: int = 128, timeout: float = 60.0):
        self.model = model
        self.url = url or os.environ.get("BACKEND_URL", "")
        self.key = key or os.environ.get("BACKEND_KEY", "")
        self.max_tokens = max_tokens
        self.timeout = timeout
        if not self.url:
            raise BackendError("remote backend needs BACKEND_URL")
        self.identity = f"remote:{model}"

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        try:
            resp = requests.post(
                self.url,
                json={
                    "model": self.model,
                    "prompt": prompt,
                    "max_tokens": self.max_tokens,
                    "temperature": 0,
                },
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return str(resp.json()["response"])
        except Exception as exc:
            raise BackendError(f"backend request failed: {exc}") from exc
