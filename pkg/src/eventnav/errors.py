"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`EventNavError` so callers
(CLI, episode runner) can catch one base class. Plain I/O failures are left
as the builtin ``OSError``.
"""


class EventNavError(Exception):
    """Base class for all package errors."""


# --- knowledge graph -------------------------------------------------------

class EmptySequence(EventNavError):
    """A task sequence has no subtasks left after normalization."""


class MalformedText(EventNavError):
    """A coarse task or subtask normalizes to the empty string."""


class UnknownNode(EventNavError):
    """A node id is not present in the graph."""


class FormatError(EventNavError):
    """A persisted file is malformed. Carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# --- extraction ------------------------------------------------------------

class ExtractionError(EventNavError):
    """Base for record-level extraction failures."""


class MissingField(ExtractionError):
    pass


class EmptySubtaskList(ExtractionError):
    pass


class NoTaskLine(ExtractionError):
    pass


class NoSubtasks(ExtractionError):
    pass


class NonMonotoneNumbering(ExtractionError):
    pass


class ExtractionFailed(ExtractionError):
    """Both parse attempts of a backend response failed."""


# --- backends --------------------------------------------------------------

class BackendError(EventNavError):
    """A text-generation or embedding backend could not be reached or failed."""


class CassetteMiss(BackendError):
    """Replay mode was asked for a prompt that was never recorded."""


# --- retrieval -------------------------------------------------------------

class EmptyText(EventNavError):
    """Text is empty after normalization and cannot be embedded or queried."""


# --- planner ---------------------------------------------------------------

class PlannerError(EventNavError):
    """Base for subtask-proposal failures."""


class UnparseableProposal(PlannerError):
    pass


class DuplicateProposal(PlannerError):
    """A replan proposal repeated an already-failed subtask twice."""


# --- action loop / backtracking --------------------------------------------

class InvalidW(EventNavError):
    """Supervision schedule length must be >= 1."""


class InvalidMultiplier(EventNavError):
    """Window multiplier must be > 0."""


class NoPath(EventNavError):
    """Two viewpoints are not connected."""


class UnknownViewpoint(EventNavError):
    pass


# --- simulator -------------------------------------------------------------

class IllegalMove(EventNavError):
    """MoveTo target is not adjacent to the current viewpoint."""


class AlreadyStopped(EventNavError):
    """The episode state is frozen; no further actions are accepted."""


class DegenerateWorld(EventNavError):
    """Generated world or episode set does not meet minimum requirements."""


class LengthMismatch(EventNavError):
    """Results and episodes passed to the metric suite do not align."""


# --- configuration ---------------------------------------------------------

class ConfigError(EventNavError):
    """Run configuration is invalid; message lists the offending keys."""
