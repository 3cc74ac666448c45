"""Event-knowledge-graph driven subtask planning and navigation.

The package builds an event knowledge graph of subtask successions from task
records, retrieves similar subtasks and their follow-ups as planning
knowledge, runs a two-loop planner/executor with completion signals and
dynamic backtracking, and evaluates episodes on a metric viewpoint graph with
the standard navigation metric suite.
"""

from ._kernels import kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
