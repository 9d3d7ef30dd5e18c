"""Voice session state machine: wake, gather, dispatch, deliver.

Pure transition function over immutable state so it can be property-tested
exhaustively. The driving loop owns all clocks and timers; the machine only
reacts to events. Invariant: pending_query is non-empty exactly in the
AWAKE and PROCESSING states.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

from .speech import WakeDetector
from .timeline import MediaTime, TranscriptSegment


class SessionState(str, Enum):
    IDLE = "idle"
    AWAKE = "awake"
    PROCESSING = "processing"
    RESPONDING = "responding"


@dataclass(frozen=True)
class Session:
    state: SessionState = SessionState.IDLE
    pending_query: str = ""
    utterance_parts: tuple[str, ...] = ()
    wake_text: str = ""
    last_activity: MediaTime = 0.0  # media time of the latest wake or final segment
    invalid_events: int = 0


# --- events -----------------------------------------------------------------------

@dataclass(frozen=True)
class WakeDetected:
    t: MediaTime
    matched_text: str


@dataclass(frozen=True)
class TranscriptArrived:
    segment: TranscriptSegment


@dataclass(frozen=True)
class UtteranceTimeout:
    t: MediaTime


@dataclass(frozen=True)
class TextQuery:
    t: MediaTime
    text: str


@dataclass(frozen=True)
class ModelReplyReady:
    t: MediaTime


@dataclass(frozen=True)
class ResponseDelivered:
    t: MediaTime


@dataclass(frozen=True)
class Reset:
    t: MediaTime


SessionEvent = Union[
    WakeDetected,
    TranscriptArrived,
    UtteranceTimeout,
    TextQuery,
    ModelReplyReady,
    ResponseDelivered,
    Reset,
]


# --- actions ----------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchQuery:
    query: str
    t: MediaTime


@dataclass(frozen=True)
class DeliverResponse:
    t: MediaTime


SessionAction = Union[DispatchQuery, DeliverResponse]


def _awake(session: Session, t: MediaTime, matched_text: str) -> Session:
    return replace(
        session,
        state=SessionState.AWAKE,
        pending_query=matched_text,
        utterance_parts=(),
        wake_text=matched_text,
        last_activity=t,
    )


def _invalid(session: Session) -> tuple[Session, tuple[SessionAction, ...]]:
    return replace(session, invalid_events=session.invalid_events + 1), ()


def step(
    session: Session, event: SessionEvent, wake_detector: WakeDetector | None = None
) -> tuple[Session, tuple[SessionAction, ...]]:
    """Apply one event; returns the new session and any actions to perform.

    Total over all (state, event) pairs: transitions not in the table leave
    the state unchanged and bump the invalid-event counter. Ungated speech
    while idle is expected background, not an invalid event.
    """
    state = session.state

    if isinstance(event, Reset):
        return (
            replace(
                session,
                state=SessionState.IDLE,
                pending_query="",
                utterance_parts=(),
                wake_text="",
            ),
            (),
        )

    if isinstance(event, WakeDetected):
        if not event.matched_text.strip():
            return _invalid(session)
        if state in (SessionState.IDLE, SessionState.AWAKE, SessionState.RESPONDING):
            # waking mid-response abandons that response and starts listening
            return _awake(session, event.t, event.matched_text.strip()), ()
        return _invalid(session)  # busy processing: too late to restart

    if isinstance(event, TranscriptArrived):
        segment = event.segment
        if state is SessionState.AWAKE:
            if not segment.is_final or not segment.text.strip():
                return session, ()
            parts = session.utterance_parts + (segment.text.strip(),)
            return (
                replace(
                    session,
                    utterance_parts=parts,
                    pending_query=" ".join((session.wake_text, *parts)).strip(),
                    last_activity=segment.t_end,
                ),
                (),
            )
        if state is SessionState.IDLE:
            return session, ()  # ambient speech without a wake
        return session, ()  # speech during processing/response is not an error

    if isinstance(event, UtteranceTimeout):
        if state is not SessionState.AWAKE:
            return _invalid(session)
        utterance = " ".join(session.utterance_parts).strip()
        if wake_detector is not None:
            utterance = wake_detector.strip_all(utterance)
        if not utterance:
            # woke up and said nothing: drop back to idle silently
            return (
                replace(
                    session,
                    state=SessionState.IDLE,
                    pending_query="",
                    utterance_parts=(),
                    wake_text="",
                ),
                (),
            )
        return (
            replace(session, state=SessionState.PROCESSING, pending_query=utterance),
            (DispatchQuery(query=utterance, t=event.t),),
        )

    if isinstance(event, TextQuery):
        if state is not SessionState.IDLE or not event.text.strip():
            return _invalid(session)
        query = event.text.strip()
        return (
            replace(session, state=SessionState.PROCESSING, pending_query=query, last_activity=event.t),
            (DispatchQuery(query=query, t=event.t),),
        )

    if isinstance(event, ModelReplyReady):
        if state is not SessionState.PROCESSING:
            return _invalid(session)
        return (
            replace(session, state=SessionState.RESPONDING, pending_query="", utterance_parts=()),
            (DeliverResponse(t=event.t),),
        )

    if isinstance(event, ResponseDelivered):
        if state is not SessionState.RESPONDING:
            return _invalid(session)
        return replace(session, state=SessionState.IDLE, pending_query="", wake_text=""), ()

    return _invalid(session)


def check_invariant(session: Session) -> bool:
    """pending_query non-empty exactly in AWAKE and PROCESSING."""
    busy = session.state in (SessionState.AWAKE, SessionState.PROCESSING)
    return bool(session.pending_query) == busy
