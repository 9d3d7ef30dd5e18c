"""Domain types and time arithmetic for the shared media timeline.

Media time (seconds since stream start) is the canonical timeline for
memory, grounding, and display. Wall clock is always derived from it via
a StreamClock, so live streams and clock-accurate file replays share one
code path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

# Media time is a plain float: seconds since stream start, >= 0.
MediaTime = float

# Display precision for timestamps is fixed at 0.1 s.
_DISPLAY_RESOLUTION = 0.1


@dataclass(frozen=True)
class Frame:
    """One decoded, timestamped video frame sampled from the stream."""

    media_time: MediaTime
    width: int
    height: int
    pixel_data: Any  # opaque decoded image payload (HxWx3 uint8 array in this package)
    sequence_no: int


@dataclass(frozen=True)
class TranscriptSegment:
    """A time-spanned piece of ASR text.

    Finalized segments (is_final=True) are immutable once emitted; partial
    hypotheses may be superseded by later segments for the same span.
    """

    t_start: MediaTime
    t_end: MediaTime
    text: str
    is_final: bool = True

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise ValueError(f"segment t_start {self.t_start} > t_end {self.t_end}")


@dataclass(frozen=True)
class StreamClock:
    """Binds media time to wall-clock time.

    `stream_epoch` is the wall-clock instant (seconds, e.g. time.monotonic())
    of media time 0. `playback_rate` 1.0 means real time; file replays may
    run faster.
    """

    stream_epoch: float
    playback_rate: float = 1.0

    def __post_init__(self):
        if self.playback_rate <= 0:
            raise ValueError(f"playback_rate must be positive, got {self.playback_rate}")


def to_wall_time(clock: StreamClock, t: MediaTime) -> float:
    """Wall-clock instant at which media time `t` occurs.

    Strictly monotone in `t` for any positive rate.
    """
    if t < 0:
        raise ValueError(f"media time must be non-negative, got {t}")
    return clock.stream_epoch + t / clock.playback_rate


def format_timestamp(t: MediaTime) -> str:
    """Render a media time for display: decimal seconds, one fractional digit.

    Rounds half-even at 0.1 s, e.g. 35.24 -> "35.2s". This exact format is
    used in API payloads and the UI.
    """
    if t < 0:
        raise ValueError(f"media time must be non-negative, got {t}")
    return f"{t:.1f}s"


def parse_timestamp(s: str) -> MediaTime:
    """Inverse of format_timestamp: "58.0s" -> 58.0."""
    text = s.strip()
    if not text.endswith("s"):
        raise ValueError(f"not a timestamp string: {s!r}")
    value = float(text[:-1])
    if value < 0:
        raise ValueError(f"negative timestamp: {s!r}")
    return value
