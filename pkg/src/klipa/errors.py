"""Exception hierarchy shared across the package.

Every error raised by klipa code derives from KlipaError so callers can
catch the package's failures without swallowing unrelated bugs.
"""

from __future__ import annotations


class KlipaError(Exception):
    """Base class for all package errors."""


# --- ingest ---------------------------------------------------------------


class UnsupportedFormat(KlipaError):
    """File extension or format hint is not one of plain/html/pdf-text."""


class EmptyDocument(KlipaError):
    """Document has no non-whitespace content after normalization."""


class EmptyCorpus(KlipaError):
    """Corpus load produced zero parseable documents."""


class ManifestParse(KlipaError):
    """Corpus manifest line is malformed."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        super().__init__(message)
        self.line_no = line_no


# --- configuration --------------------------------------------------------


class InvalidConfig(KlipaError):
    """A config dataclass violates its own invariants."""


class ConfigError(KlipaError):
    """Engine config file is missing, malformed, or has unknown keys."""


class MissingArtifact(KlipaError):
    """A required build artifact (snapshot, index) is absent on disk."""


# --- model gateway --------------------------------------------------------


class GatewayError(KlipaError):
    """Base class for model gateway failures."""


class InvalidRequest(GatewayError):
    """Chat request violates its preconditions (checked before any I/O)."""


class Timeout(GatewayError):
    """Single attempt timed out and no retries were permitted."""


class BackendError(GatewayError):
    """Backend returned a non-retryable error response."""

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class RetriesExhausted(GatewayError):
    """Retry budget spent without a successful response."""


class ContextTooLong(GatewayError):
    """Backend signalled that the prompt exceeds its context window."""


class EmptyText(GatewayError):
    """embed() called with empty or whitespace-only text."""


class DimensionMismatch(KlipaError):
    """Vector dimensions disagree (gateway and retrieval both raise this)."""


class FixtureExhausted(GatewayError):
    """Mock backend ran out of scripted replies and no rule matched."""


class FixtureParse(GatewayError):
    """Mock fixture file is malformed."""


# --- extraction -----------------------------------------------------------


class Unrepairable(KlipaError):
    """Model output could not be repaired into valid JSON.

    Carries the original text for the failure record.
    """

    def __init__(self, message: str, original: str) -> None:
        super().__init__(message)
        self.original = original


class CacheCorrupt(KlipaError):
    """Extraction cache entry could not be read."""


# --- graph store ----------------------------------------------------------


class GraphError(KlipaError):
    """Base class for graph store failures."""


class SelfLoopRejected(GraphError):
    """Edge endpoints are the same node and the relation does not allow it."""


class WriterClosed(GraphError):
    """Batch writer used after close()."""


class GraphBusy(GraphError):
    """A batch writer is open and owns write access."""


class UnknownNode(GraphError):
    """Node reference does not exist in the store."""


class SnapshotParse(GraphError):
    """Snapshot file line is malformed."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        super().__init__(message)
        self.line_no = line_no


class IntegrityViolation(GraphError):
    """An edge references a node that is not present."""


# --- retrieval ------------------------------------------------------------


class ZeroVector(KlipaError):
    """Cosine similarity is undefined for a zero vector."""


class EmptyIndex(KlipaError):
    """Index build produced zero items."""


class IndexMissing(KlipaError):
    """No index exists for the requested level."""

    def __init__(self, level: str) -> None:
        super().__init__(f"no index for level '{level}'")
        self.level = level


class IndexParse(KlipaError):
    """Index file line is malformed."""


# --- agent ----------------------------------------------------------------


class AgentError(KlipaError):
    """Agent run failed hard; carries the partial step trace."""

    def __init__(self, message: str, steps: tuple = ()) -> None:
        super().__init__(message)
        self.steps = tuple(steps)


class SessionBusy(KlipaError):
    """A run is already in flight for this session."""


# --- service ---------------------------------------------------------------


class BindFailure(KlipaError):
    """Service could not bind the configured address/port."""


# --- metrics --------------------------------------------------------------


class MissingExtraction(KlipaError):
    """Gold record's doc_id has no entry in the extraction results."""

    def __init__(self, doc_id: str) -> None:
        super().__init__(f"no extraction entry for doc '{doc_id}'")
        self.doc_id = doc_id


class UnknownOrg(KlipaError):
    """Organization key does not resolve to a graph node."""


class EmptyReport(KlipaError):
    """Timing requested over a report with zero documents."""
