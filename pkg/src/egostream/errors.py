"""Exception hierarchy shared by all egostream modules."""
from __future__ import annotations


class EgostreamError(Exception):
    """Base class for all errors raised by this package."""


# --- stream ingest ---------------------------------------------------------

class ConnectFailed(EgostreamError):
    """The stream endpoint could not be reached within the configured timeout."""


class DecodeFailed(EgostreamError):
    """The container or frame payload could not be decoded."""


class StreamEnded(EgostreamError):
    """Clean end-of-stream for file sources."""


# --- model / speech adapters ------------------------------------------------

class AdapterError(EgostreamError):
    """Base for failures of an external adapter call."""

    retryable = False

    def __init__(self, message: str, role: str | None = None):
        super().__init__(message)
        self.role = role


class AdapterUnreachable(AdapterError):
    """Endpoint down or connection refused. Retryable."""

    retryable = True


class AdapterTimeout(AdapterError):
    """Call exceeded the binding timeout. Retryable."""

    retryable = True


class AdapterRejected(AdapterError):
    """Adapter rejected the payload (4xx class). Not retryable."""


class MalformedReply(AdapterError):
    """Adapter replied with something that does not parse per the wire protocol."""


class GenerationFailed(AdapterError):
    """The clip generator accepted the request but failed to produce output."""


class EmptyText(EgostreamError):
    """An operation that needs non-empty text received an empty string."""


# --- grounding / memory ------------------------------------------------------

class NoMatch(EgostreamError):
    """All candidate scores fell below the configured threshold."""


class EmptyWindow(EgostreamError):
    """A time window selected zero memory entries."""


# --- retrieval index ---------------------------------------------------------

class DimMismatch(EgostreamError):
    """A feature vector does not have the index dimensionality."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DuplicateId(EgostreamError):
    """Two manifest rows share a video_id."""


class ZeroVector(EgostreamError):
    """Cosine similarity is undefined for a zero vector."""


# --- persistence -------------------------------------------------------------

class IoFailed(EgostreamError):
    """The underlying file could not be read or written."""


class CorruptRecord(EgostreamError):
    """A persisted record failed to parse; `line_no` is 1-based."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
