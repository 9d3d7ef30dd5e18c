"""Puts the pieces together: one worker per stream runs the intake, memory,
and voice-session loops on their own threads, queries are routed to the
right capability, and everything observable is published on an event bus.

Threading layout per stream:
  ingest thread   decodes + paces frames, samples them for memory, and
                  synthesizes audio-chunk ticks for the session loop
  memory thread   consumes sampled frames, cuts periodic snapshot windows
  session thread  wake/utterance state machine plus query dispatch

Queues between threads are bounded and drop-oldest, so a stalled model
call can shed frames but never block intake.
"""
from __future__ import annotations

import re
import threading
import time
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import Config
from .errors import AdapterError, ConnectFailed, EgostreamError, EmptyWindow
from .fixtures import ReplayBundle, resolve_bundle
from .gateway import (
    Intent,
    IntentKind,
    ModelGateway,
    build_gateway,
    needs_generation,
    route_intent,
)
from .grounding import answer_grounding, plan_context, summarize_window
from .ingest import (
    CLOSED,
    BoundedQueue,
    FrameSampler,
    FrameTracker,
    IngestStats,
    StreamSource,
    Ticker,
    open_decoder,
    paced,
    probe_rtmp,
    reconnect_delays,
)
from .media import MediaStore
from .memory import MemoryLog
from .retrieval import RetrievalIndex, build_index, search
from .session import (
    DeliverResponse,
    DispatchQuery,
    ModelReplyReady,
    ResponseDelivered,
    Session,
    SessionState,
    TextQuery,
    TranscriptArrived,
    UtteranceTimeout,
    WakeDetected,
    step,
)
from .speech import ScriptedAsr, WakeDetector, build_tts
from .timeline import MediaTime, TranscriptSegment

APOLOGY_TEXT = "Sorry, I cannot answer that right now."
DEADLINE_TEXT = "Sorry, that took too long to answer."
EMPTY_MEMORY_TEXT = "I have not seen enough of the stream to answer that yet."
NO_RETRIEVAL_TEXT = "I could not find a matching how-to video."


def error_code(exc: BaseException) -> str:
    """Stable snake_case code for an exception type, e.g. adapter_unreachable."""
    return re.sub(r"(?<!^)(?=[A-Z])", "_", type(exc).__name__).lower()


class DuplicateSource(EgostreamError):
    """The same (kind, uri) is already being ingested."""


class UnknownStream(EgostreamError):
    """No stream with that id."""


# --- events -------------------------------------------------------------------------

@dataclass(frozen=True)
class ApiEvent:
    kind: str  # "response" | "memory_tick" | "state_change" | "error"
    payload: dict
    seq: int
    t: MediaTime

    def to_payload(self) -> dict:
        return {"kind": self.kind, "payload": self.payload, "seq": self.seq, "t": self.t}


class SubscriberQueue(BoundedQueue):
    """Per-connection event queue; remembers if it ever overflowed so the
    transport can drop the consumer instead of silently losing events."""

    def __init__(self, maxsize: int):
        super().__init__(maxsize)
        self.overflowed = False

    def put(self, item):
        evicted = super().put(item)
        if evicted is not None:
            self.overflowed = True
        return evicted


class EventBus:
    """Fan-out of ApiEvents with a per-stream monotonically increasing seq."""

    def __init__(self, queue_size: int = 256):
        self._queue_size = queue_size
        self._lock = threading.Lock()
        self._seq: dict[str, int] = {}
        self._subs: dict[str, list[SubscriberQueue]] = {}

    def subscribe(self, stream_id: str) -> SubscriberQueue:
        q = SubscriberQueue(self._queue_size)
        with self._lock:
            self._subs.setdefault(stream_id, []).append(q)
        return q

    def unsubscribe(self, stream_id: str, q: SubscriberQueue) -> None:
        with self._lock:
            subs = self._subs.get(stream_id, [])
            if q in subs:
                subs.remove(q)
        q.close()

    def publish(self, stream_id: str, kind: str, payload: dict, t: MediaTime) -> ApiEvent:
        # puts happen under the lock so every subscriber sees seq in order;
        # subscriber puts never block (drop-oldest), so this cannot stall
        with self._lock:
            seq = self._seq.get(stream_id, 0) + 1
            self._seq[stream_id] = seq
            event = ApiEvent(kind=kind, payload=payload, seq=seq, t=t)
            for q in self._subs.get(stream_id, []):
                q.put(event)
        return event


# --- responses ------------------------------------------------------------------------

@dataclass(frozen=True)
class AssistantResponse:
    query: str
    intent: str
    text: str
    media: tuple[dict, ...] = ()
    tts_audio: dict | None = None
    t_issued: MediaTime = 0.0
    latency_ms: float = 0.0
    error_code: str | None = None

    def to_payload(self) -> dict:
        return {
            "query": self.query,
            "intent": self.intent,
            "text": self.text,
            "media": list(self.media),
            "tts_audio": self.tts_audio,
            "t_issued": self.t_issued,
            "latency_ms": self.latency_ms,
            "error_code": self.error_code,
        }


class Dispatcher:
    """Routes one query to the capability that answers it. Thread-safe given
    that MemoryLog, FrameTracker, and the adapters are."""

    def __init__(
        self,
        gateway: ModelGateway,
        memory: MemoryLog,
        tracker: FrameTracker,
        config: Config,
        index: RetrievalIndex | None = None,
    ):
        self.gateway = gateway
        self.memory = memory
        self.tracker = tracker
        self.config = config
        self.index = index

    def dispatch(self, query: str, t_now: MediaTime) -> AssistantResponse:
        started = time.perf_counter()
        intent = route_intent(query)
        try:
            text, media = self._run_intent(intent, t_now)
            code = None
        except EmptyWindow:
            text, media, code = EMPTY_MEMORY_TEXT, (), "empty_window"
        except AdapterError as exc:
            text, media, code = APOLOGY_TEXT, (), error_code(exc)
        latency_ms = (time.perf_counter() - started) * 1000.0
        return AssistantResponse(
            query=query,
            intent=intent.kind.value,
            text=text,
            media=media,
            t_issued=t_now,
            latency_ms=latency_ms,
            error_code=code,
        )

    def _run_intent(self, intent: Intent, t_now: MediaTime) -> tuple[str, tuple[dict, ...]]:
        kind, query = intent.kind, intent.argument
        if kind is IntentKind.GROUNDING:
            result = answer_grounding(self.memory, self.gateway.embed, query, self.config.grounding)
            return result.text, tuple(h.to_payload() for h in result.hits)

        if kind is IntentKind.SUMMARIZE:
            summary = summarize_window(self.memory, 0.0, t_now, self.gateway.chat)
            return summary.text, (summary.to_payload(),)

        if kind is IntentKind.PLAN:
            history = self.memory.latest(self.config.grounding.recent_k)
            frames = self.tracker.recent(self.config.api.chat_max_frames)
            current = "(no current view)"
            if frames:
                try:
                    current = self.gateway.caption.caption(frames[-1:])
                except AdapterError:
                    pass  # planning can proceed on history alone
            context = plan_context(
                history, current, query, self.config.grounding.context_budget_chars
            )
            return self.gateway.chat.chat(frames, context, query), ()

        if kind is IntentKind.RETRIEVE:
            if self.index is None:
                return NO_RETRIEVAL_TEXT, ()
            hits = search(
                self.index,
                query,
                self.gateway.embed,
                k=self.config.retrieval.k,
                min_score=self.config.retrieval.min_score,
            )
            if not hits:
                return NO_RETRIEVAL_TEXT, ()
            titles = ", ".join(h.record.title for h in hits)
            text = f"Found {len(hits)} how-to videos: {titles}"
            return text, tuple(h.to_payload() for h in hits)

        if kind is IntentKind.GENERATE:
            wants, prompt = needs_generation(query)
            if wants:
                recent = self.tracker.recent(1)
                frame = recent[-1] if recent else self.tracker.latest()
                if frame is None:
                    return EMPTY_MEMORY_TEXT, ()
                clip = self.gateway.generate.generate_demo(frame, prompt)
                return (
                    f"Generated a {clip.duration_s:.1f}s demonstration clip.",
                    (clip.to_payload(),),
                )
            # phrasing did not actually ask to see anything; answer in text
            kind = IntentKind.CURRENT_SCENE

        frames = self.tracker.recent(self.config.api.chat_max_frames)
        return self.gateway.chat.chat(frames, "", query), ()


# --- per-stream worker -------------------------------------------------------------------

@dataclass
class GapRecord:
    t_tick: MediaTime
    reason: str


class StreamWorker:
    """Owns all threads and state for one stream."""

    def __init__(
        self,
        stream_id: str,
        source: StreamSource,
        config: Config,
        bus: EventBus,
        store: MediaStore,
        index: RetrievalIndex | None = None,
        bundle: ReplayBundle | None = None,
        caption_outages: Sequence[tuple[float, float]] = (),
    ):
        self.stream_id = stream_id
        self.source = source
        self.config = config
        self.bus = bus
        self.store = store
        self.bundle = bundle if bundle is not None else resolve_bundle(source)

        annotations = self.bundle.annotations if self.bundle else ()
        qa_rows = self.bundle.qa_rows if self.bundle else ()
        self.gateway = build_gateway(
            config.models,
            store,
            embed_dim=config.memory.embed_dim,
            qa_rows=qa_rows,
            annotations=annotations,
            caption_outages=caption_outages,
        )
        self.tts = build_tts(config.speech.tts_endpoint, store, config.speech.tts_timeout_ms)
        self.asr = ScriptedAsr(self.bundle.transcript if self.bundle else ())
        self.wake = WakeDetector(config.session.wake_keywords)

        self.stats = IngestStats()
        self.tracker = FrameTracker()
        self.memory = MemoryLog(stream_id, config.memory)
        self.index = index
        self.dispatcher = Dispatcher(self.gateway, self.memory, self.tracker, config, index)

        self.session = Session()
        self._session_lock = threading.Lock()

        self._memory_queue = BoundedQueue(config.ingest.queue_maxsize)
        self._session_queue = BoundedQueue(config.ingest.queue_maxsize)
        self._text_inbox: deque[tuple[str, Future]] = deque()
        self._inbox_lock = threading.Lock()

        self._sampler = FrameSampler(config.ingest.sample_hz)
        self._memory_ticker = Ticker(config.memory.period_s)
        self._audio_ticker = Ticker(config.ingest.audio_chunk_s)

        self.gaps: list[GapRecord] = []
        self._stop = threading.Event()
        self._ingest_done = threading.Event()
        self._memory_done = threading.Event()
        self._ended = threading.Event()
        self._threads: list[threading.Thread] = []
        self._connect_error: EgostreamError | None = None

    # --- lifecycle -----------------------------------------------------------

    def preflight(self) -> None:
        """Cheap reachability check before any thread starts, so stream
        creation can fail synchronously."""
        if self.source.kind == "rtmp":
            probe_rtmp(self.source.uri, self.config.ingest.connect_timeout_s)
            return
        path = Path(self.source.uri)
        if self.bundle is not None and self.bundle.video_path is not None:
            path = self.bundle.video_path
        if not path.exists():
            raise ConnectFailed(f"source not found: {path}")

    def start(self) -> None:
        self._threads = [
            threading.Thread(target=self._ingest_loop, name=f"{self.stream_id}-ingest", daemon=True),
            threading.Thread(target=self._memory_loop, name=f"{self.stream_id}-memory", daemon=True),
            threading.Thread(target=self._session_loop, name=f"{self.stream_id}-session", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self, timeout: float = 5.0) -> None:
        self._stop.set()
        self._memory_queue.close()
        self._session_queue.close()
        for t in self._threads:
            t.join(timeout)

    def wait_until_ended(self, timeout: float | None = None) -> bool:
        """True once intake finished and both consumer loops drained."""
        deadline = None if timeout is None else time.monotonic() + timeout
        for ev in (self._ingest_done, self._memory_done, self._ended):
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            if not ev.wait(remaining):
                return False
        return True

    # --- ingest ----------------------------------------------------------------

    def _publish_error(self, code: str, message: str, t: MediaTime) -> None:
        self.bus.publish(self.stream_id, "error", {"code": code, "message": message}, t)

    def _decode_once(self, seq_start: int) -> int:
        """One pass over the source; returns the next sequence number."""
        if self.bundle is not None:
            frames = self.bundle.decode(seq_start)
        else:
            frames = open_decoder(self.source, self.config.ingest.connect_timeout_s, seq_start)
        last_seq = seq_start
        for frame in paced(frames, self.source.rate, stop=self._stop):
            self.stats.on_decoded(frame)
            last_seq = frame.sequence_no + 1
            sampled = self._sampler.offer(frame)
            self.tracker.update(frame, sampled)
            if sampled:
                self.stats.on_publish(self._memory_queue.put(frame))
            for t_chunk in self._audio_ticker.advance(frame.media_time):
                self.stats.on_audio_chunk()
                segments = self.asr.poll(t_chunk)
                self.stats.on_segments(len(segments))
                for segment in segments:
                    self._session_queue.put(("segment", segment))
                self._session_queue.put(("tick", t_chunk))
        return last_seq

    def _ingest_loop(self) -> None:
        seq = 0
        try:
            if self.source.kind == "rtmp":
                delays = reconnect_delays(self.config.ingest.reconnect)
                while not self._stop.is_set():
                    try:
                        seq = self._decode_once(seq)
                        break  # clean end of stream
                    except EgostreamError as exc:
                        delay = next(delays, None)
                        if delay is None:
                            self._publish_error(error_code(exc), str(exc), self.stats.last_media_time)
                            break
                        self.stats.on_reconnect()
                        if self._stop.wait(delay):
                            break
            else:
                seq = self._decode_once(seq)
        except EgostreamError as exc:
            self._connect_error = exc
            self._publish_error(error_code(exc), str(exc), self.stats.last_media_time)
        except Exception as exc:  # decoder bugs must not vanish silently
            self._publish_error("internal_error", f"{type(exc).__name__}: {exc}", self.stats.last_media_time)
        finally:
            self._ingest_done.set()
            self._memory_queue.close()
            t_end = self.stats.last_media_time
            # flush any utterance still waiting on silence at end of stream
            self._session_queue.put(("tick", t_end + self.config.session.utterance_timeout_s))
            self._session_queue.put(("eos", t_end))
            self.bus.publish(self.stream_id, "state_change", {"scope": "stream", "state": "ended"}, t_end)

    # --- memory ----------------------------------------------------------------

    def _memory_loop(self) -> None:
        window_s = self.config.memory.window_s
        buffer: deque = deque()
        try:
            while True:
                item = self._memory_queue.get(timeout=0.1)
                if item is CLOSED:
                    break
                if item is None:
                    continue
                buffer.append(item)
                for t_tick in self._memory_ticker.advance(item.media_time):
                    w_lo = t_tick - window_s
                    window_frames = [f for f in buffer if w_lo <= f.media_time <= t_tick]
                    if not window_frames:
                        self.gaps.append(GapRecord(t_tick, "no frames in window"))
                        continue
                    try:
                        entry = self.memory.snapshot_tick(
                            window_frames,
                            self.gateway.caption,
                            self.gateway.embed,
                            window=(w_lo, t_tick),
                        )
                    except AdapterError as exc:
                        self.gaps.append(GapRecord(t_tick, error_code(exc)))
                        self._publish_error(error_code(exc), f"snapshot skipped: {exc}", t_tick)
                        continue
                    self.bus.publish(
                        self.stream_id,
                        "memory_tick",
                        {
                            "entry_id": entry.entry_id,
                            "t_start": entry.t_start,
                            "t_end": entry.t_end,
                            "description": entry.description,
                        },
                        t_tick,
                    )
                    while buffer and buffer[0].media_time < self._memory_ticker.next_tick - window_s:
                        buffer.popleft()
        finally:
            self._memory_done.set()

    # --- session ----------------------------------------------------------------

    def submit_text_query(self, text: str) -> Future:
        """Queue a typed query; resolves with the AssistantResponse after the
        session loop answers it (strictly in arrival order)."""
        future: Future = Future()
        with self._inbox_lock:
            self._text_inbox.append((text, future))
        return future

    def _next_text_query(self) -> tuple[str, Future] | None:
        with self._inbox_lock:
            return self._text_inbox.popleft() if self._text_inbox else None

    def _apply(self, event) -> tuple:
        with self._session_lock:
            before = self.session.state
            self.session, actions = step(self.session, event, self.wake)
            after = self.session.state
        if after is not before:
            self.bus.publish(
                self.stream_id,
                "state_change",
                {"scope": "session", "from": before.value, "to": after.value},
                getattr(event, "t", self.stats.last_media_time),
            )
        return actions

    def _session_loop(self) -> None:
        try:
            while True:
                if self.session.state is SessionState.IDLE:
                    pending = self._next_text_query()
                    if pending is not None:
                        text, future = pending
                        t_now = self.stats.last_media_time
                        for action in self._apply(TextQuery(t=t_now, text=text)):
                            if isinstance(action, DispatchQuery):
                                self._run_dispatch(action, future)
                        continue
                item = self._session_queue.get(timeout=0.05)
                if item is CLOSED:
                    break
                if item is None:
                    continue
                kind, payload = item
                if kind == "segment":
                    self._on_segment(payload)
                elif kind == "tick":
                    self._on_tick(payload)
                elif kind == "eos":
                    # keep serving text queries until stop() closes the queue
                    self._ended.set()
        finally:
            self._ended.set()
            with self._inbox_lock:
                leftovers = list(self._text_inbox)
                self._text_inbox.clear()
            for _, future in leftovers:
                if not future.done():
                    future.set_exception(UnknownStream("stream worker stopped"))

    def _on_segment(self, segment: TranscriptSegment) -> None:
        matched, remainder = self.wake.split(segment.text)
        if matched is None:
            self._apply(TranscriptArrived(segment))
            return
        self._apply(WakeDetected(t=segment.t_start, matched_text=matched))
        if remainder.strip():
            rest = TranscriptSegment(
                t_start=segment.t_start, t_end=segment.t_end, text=remainder, is_final=True
            )
            self._apply(TranscriptArrived(rest))

    def _on_tick(self, t: MediaTime) -> None:
        with self._session_lock:
            awake = self.session.state is SessionState.AWAKE
            quiet_since = self.session.last_activity
        if awake and t - quiet_since >= self.config.session.utterance_timeout_s:
            for action in self._apply(UtteranceTimeout(t=t)):
                if isinstance(action, DispatchQuery):
                    self._run_dispatch(action, None)

    def _run_dispatch(self, action: DispatchQuery, future: Future | None) -> None:
        """Answer one query with a hard wall-clock deadline. Runs on the
        session thread; a reply that misses the deadline is abandoned."""
        deadline = self.config.session.processing_deadline_s
        executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"{self.stream_id}-dispatch")
        work = executor.submit(self.dispatcher.dispatch, action.query, action.t)
        try:
            response = work.result(timeout=deadline)
        except FutureTimeoutError:
            response = AssistantResponse(
                query=action.query,
                intent=route_intent(action.query).kind.value,
                text=DEADLINE_TEXT,
                t_issued=action.t,
                latency_ms=deadline * 1000.0,
                error_code="deadline_exceeded",
            )
        except Exception as exc:
            response = AssistantResponse(
                query=action.query,
                intent=route_intent(action.query).kind.value,
                text=APOLOGY_TEXT,
                t_issued=action.t,
                latency_ms=0.0,
                error_code=error_code(exc),
            )
        finally:
            executor.shutdown(wait=False)

        t_now = self.stats.last_media_time
        for action2 in self._apply(ModelReplyReady(t=t_now)):
            if isinstance(action2, DeliverResponse):
                response = self._deliver(response)
        if future is not None and not future.done():
            future.set_result(response)
        self._apply(ResponseDelivered(t=self.stats.last_media_time))

    def _deliver(self, response: AssistantResponse) -> AssistantResponse:
        tts_payload = None
        try:
            audio = self.tts.synthesize(response.text)
            tts_payload = audio.to_payload()
        except Exception:
            pass  # a voice-less reply still counts as delivered
        final = AssistantResponse(
            query=response.query,
            intent=response.intent,
            text=response.text,
            media=response.media,
            tts_audio=tts_payload,
            t_issued=response.t_issued,
            latency_ms=response.latency_ms,
            error_code=response.error_code,
        )
        self.bus.publish(self.stream_id, "response", final.to_payload(), final.t_issued)
        return final

    # --- introspection -------------------------------------------------------------

    def status(self) -> dict:
        with self._session_lock:
            state = self.session.state.value
            invalid = self.session.invalid_events
        return {
            "stream_id": self.stream_id,
            "source": {"kind": self.source.kind, "uri": self.source.uri, "rate": self.source.rate},
            "session_state": state,
            "invalid_events": invalid,
            "ended": self._ended.is_set(),
            "memory_entries": self.memory.count,
            "memory_gaps": len(self.gaps),
            "stats": self.stats.snapshot(),
        }


# --- the manager ------------------------------------------------------------------------

class StreamManager:
    """Registry of live stream workers plus the shared services they use."""

    def __init__(self, config: Config | None = None, index: RetrievalIndex | None = None):
        self.config = config or Config()
        self.bus = EventBus(self.config.api.event_queue_size)
        self.store = MediaStore()
        self.index = index
        if self.index is None and self.config.retrieval.manifest:
            self.index = build_index(self.config.retrieval.manifest)
        self._workers: dict[str, StreamWorker] = {}
        self._active_sources: set[tuple[str, str]] = set()
        self._lock = threading.Lock()
        self._counter = 0

    def create_stream(
        self,
        source: StreamSource,
        caption_outages: Sequence[tuple[float, float]] = (),
        autostart: bool = True,
        bundle: ReplayBundle | None = None,
    ) -> StreamWorker:
        with self._lock:
            if source.identity in self._active_sources:
                raise DuplicateSource(f"already ingesting {source.kind}:{source.uri}")
            self._active_sources.add(source.identity)
            self._counter += 1
            stream_id = f"s-{self._counter}"
        try:
            worker = StreamWorker(
                stream_id,
                source,
                self.config,
                self.bus,
                self.store,
                index=self.index,
                bundle=bundle,
                caption_outages=caption_outages,
            )
            worker.preflight()
        except Exception:
            with self._lock:
                self._active_sources.discard(source.identity)
            raise
        with self._lock:
            self._workers[stream_id] = worker
        if autostart:
            worker.start()
        return worker

    def remove_stream(self, stream_id: str, timeout: float = 5.0) -> None:
        worker = self.get(stream_id)
        worker.stop(timeout)
        with self._lock:
            self._workers.pop(stream_id, None)
            self._active_sources.discard(worker.source.identity)

    def get(self, stream_id: str) -> StreamWorker:
        with self._lock:
            worker = self._workers.get(stream_id)
        if worker is None:
            raise UnknownStream(f"no stream {stream_id!r}")
        return worker

    def list_streams(self) -> list[dict]:
        with self._lock:
            workers = list(self._workers.values())
        return [w.status() for w in workers]

    def stop_all(self, timeout: float = 5.0) -> None:
        with self._lock:
            workers = list(self._workers.values())
        for w in workers:
            w.stop(timeout)
