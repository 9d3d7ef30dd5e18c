"""Stream intake: decode, pace, sample, and fan out frames under backpressure.

Decoders yield Frames in media-time order; `paced` converts media time to
wall-clock delivery at a playback rate. Downstream consumers get bounded
drop-oldest queues so a slow consumer can never stall the intake path, and
IngestStats keeps an exact account of what was decoded, published, and shed.
"""
from __future__ import annotations

import json
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator
from urllib.parse import urlparse

import numpy as np

from .config import ReconnectConfig
from .errors import ConnectFailed, DecodeFailed
from .timeline import Frame, MediaTime

DEFAULT_RTMP_PORT = 1935

# queue sentinel: consumers see this once after close() drains
CLOSED = object()


@dataclass(frozen=True)
class StreamSource:
    """Where a stream comes from: a live rtmp uri, a local video file, or a
    synthetic generator spec."""

    kind: str  # "rtmp" | "file" | "synthetic"
    uri: str
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rtmp", "file", "synthetic"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.uri:
            raise ValueError("source uri must be non-empty")
        if self.rate <= 0:
            raise ValueError(f"playback rate must be positive, got {self.rate}")

    @property
    def identity(self) -> tuple[str, str]:
        return (self.kind, self.uri)


# --- synthetic frames ---------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    fps: float = 10.0
    duration_s: float = 10.0
    width: int = 64
    height: int = 48
    seed: int = 0

    def __post_init__(self):
        if self.fps <= 0 or self.duration_s <= 0:
            raise ValueError("fps and duration_s must be positive")
        if self.width < 8 or self.height < 8:
            raise ValueError("frames must be at least 8x8")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.fps))

    @classmethod
    def from_json_file(cls, path: str | Path) -> "SynthSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {k: raw[k] for k in ("fps", "duration_s", "width", "height", "seed") if k in raw}
        return cls(**known)


def synth_frame_pixels(spec: SynthSpec, index: int) -> np.ndarray:
    """Deterministic test pattern: slow background drift plus a block that
    moves every frame, so consecutive frames always differ."""
    h, w = spec.height, spec.width
    base = (index * 3 + spec.seed * 17) % 200
    pixels = np.full((h, w, 3), base, dtype=np.uint8)
    pixels[:, :, 1] = (base + 40) % 256
    block = max(4, h // 6)
    x = (index * 7 + spec.seed) % max(1, w - block)
    y = (index * 5 + spec.seed) % max(1, h - block)
    pixels[y : y + block, x : x + block] = (255, 255, 255)
    return pixels


def iter_synthetic(spec: SynthSpec, seq_start: int = 0) -> Iterator[Frame]:
    for k in range(spec.frame_count):
        yield Frame(
            media_time=k / spec.fps,
            width=spec.width,
            height=spec.height,
            pixel_data=synth_frame_pixels(spec, k),
            sequence_no=seq_start + k,
        )


# --- file decode ----------------------------------------------------------------------

def iter_video_file(path: str | Path, seq_start: int = 0) -> Iterator[Frame]:
    """Decode a local video file to RGB frames timed by the container fps."""
    import cv2

    path = Path(path)
    if not path.exists():
        raise ConnectFailed(f"video file not found: {path}")
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeFailed(f"cannot open video file: {path}")
    fps = cap.get(cv2.CAP_PROP_FPS)
    if not fps or fps <= 0 or fps > 1000:
        fps = 30.0  # container did not say; assume a common default
    try:
        index = 0
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            rgb = bgr[:, :, ::-1].copy()
            yield Frame(
                media_time=index / fps,
                width=rgb.shape[1],
                height=rgb.shape[0],
                pixel_data=rgb,
                sequence_no=seq_start + index,
            )
            index += 1
        if index == 0:
            raise DecodeFailed(f"no decodable frames in {path}")
    finally:
        cap.release()


# --- rtmp ------------------------------------------------------------------------------

def probe_rtmp(uri: str, connect_timeout_s: float = 3.0) -> None:
    """Reachability preflight: open and close a TCP connection to the ingest
    host. Raises ConnectFailed when nothing is listening."""
    parsed = urlparse(uri)
    if parsed.scheme != "rtmp" or not parsed.hostname:
        raise ConnectFailed(f"not an rtmp uri: {uri!r}")
    port = parsed.port or DEFAULT_RTMP_PORT
    try:
        with socket.create_connection((parsed.hostname, port), timeout=connect_timeout_s):
            pass
    except OSError as exc:
        raise ConnectFailed(f"cannot reach {parsed.hostname}:{port}: {exc}")


def iter_rtmp(uri: str, connect_timeout_s: float = 3.0, seq_start: int = 0) -> Iterator[Frame]:
    probe_rtmp(uri, connect_timeout_s)
    # reachable, but this build ships no rtmp demuxer; fail honestly instead
    # of hanging
    raise DecodeFailed(
        "rtmp endpoint is reachable but no rtmp demuxer is available in this "
        "build; ingest the stream as a file or synthetic source"
    )


def reconnect_delays(policy: ReconnectConfig) -> Iterator[float]:
    """Backoff schedule: initial delay doubling up to the cap, max_attempts long."""
    delay = policy.initial_s
    for _ in range(policy.max_attempts):
        yield min(delay, policy.cap_s)
        delay *= 2.0


# --- source resolution -------------------------------------------------------------------

def open_decoder(source: StreamSource, connect_timeout_s: float = 3.0, seq_start: int = 0) -> Iterator[Frame]:
    if source.kind == "rtmp":
        return iter_rtmp(source.uri, connect_timeout_s, seq_start)
    if source.kind == "synthetic":
        path = Path(source.uri)
        spec_path = path / "timeline.json" if path.is_dir() else path
        if not spec_path.exists():
            raise ConnectFailed(f"synthetic spec not found: {spec_path}")
        return iter_synthetic(SynthSpec.from_json_file(spec_path), seq_start)
    path = Path(source.uri)
    if path.is_dir() or path.suffix == ".json":
        # replay directories carry a synthetic timeline spec
        return open_decoder(StreamSource("synthetic", source.uri, source.rate), connect_timeout_s, seq_start)
    return iter_video_file(path, seq_start)


# --- pacing ---------------------------------------------------------------------------------

def paced(
    frames: Iterator[Frame],
    rate: float,
    sleep_fn: Callable[[float], None] = time.sleep,
    clock_fn: Callable[[], float] = time.monotonic,
    stop: threading.Event | None = None,
) -> Iterator[Frame]:
    """Deliver frames so that media time t arrives at wall time start + t/rate.

    Never sleeps to catch up when behind; a stop event aborts promptly even
    mid-wait by sleeping in short slices.
    """
    if rate <= 0:
        raise ValueError(f"playback rate must be positive, got {rate}")
    start = clock_fn()
    for frame in frames:
        if stop is not None and stop.is_set():
            return
        target = start + frame.media_time / rate
        while True:
            remaining = target - clock_fn()
            if remaining <= 0:
                break
            sleep_fn(min(remaining, 0.05))
            if stop is not None and stop.is_set():
                return
        yield frame


# --- periodic schedules ----------------------------------------------------------------------

class Ticker:
    """Emits tick times k*period (k >= 1) as media time advances past them."""

    def __init__(self, period_s: float):
        if period_s <= 0:
            raise ValueError(f"tick period must be positive, got {period_s}")
        self.period_s = period_s
        self._next = period_s

    @property
    def next_tick(self) -> MediaTime:
        return self._next

    def advance(self, media_time: MediaTime) -> list[MediaTime]:
        due = []
        while media_time >= self._next - 1e-9:
            due.append(self._next)
            self._next += self.period_s
        return due


class FrameSampler:
    """Thin a native-fps stream to about rate_hz, keeping the first frame at
    or after each sample point."""

    def __init__(self, rate_hz: float):
        if rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {rate_hz}")
        self.step = 1.0 / rate_hz
        self._next = 0.0

    def offer(self, frame: Frame) -> bool:
        if frame.media_time + 1e-9 >= self._next:
            self._next = frame.media_time + self.step
            return True
        return False


# --- fan-out -----------------------------------------------------------------------------------

class BoundedQueue:
    """Thread-safe FIFO with a hard size cap and drop-oldest overflow.

    put() returns the evicted item when the cap forced one out, else None.
    get() blocks up to timeout and returns None on expiry; after close(),
    consumers drain what is queued and then receive CLOSED.
    """

    def __init__(self, maxsize: int):
        if maxsize < 1:
            raise ValueError(f"queue maxsize must be >= 1, got {maxsize}")
        self.maxsize = maxsize
        self._items: deque = deque()
        self._cond = threading.Condition()
        self._closed = False

    def put(self, item) -> object | None:
        with self._cond:
            if self._closed:
                return item  # nothing listens anymore; count it as shed
            evicted = None
            if len(self._items) >= self.maxsize:
                evicted = self._items.popleft()
            self._items.append(item)
            self._cond.notify()
            return evicted

    def get(self, timeout: float | None = None):
        with self._cond:
            if not self._items and not self._closed:
                self._cond.wait(timeout)
            if self._items:
                return self._items.popleft()
            return CLOSED if self._closed else None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


class FrameTracker:
    """Most recent frame plus a short ring of sampled frames for model context."""

    def __init__(self, ring_size: int = 16):
        self._lock = threading.Lock()
        self._latest: Frame | None = None
        self._ring: deque[Frame] = deque(maxlen=ring_size)

    def update(self, frame: Frame, sampled: bool) -> None:
        with self._lock:
            self._latest = frame
            if sampled:
                self._ring.append(frame)

    def latest(self) -> Frame | None:
        with self._lock:
            return self._latest

    def recent(self, k: int) -> list[Frame]:
        """Up to k most recent sampled frames, oldest first."""
        if k <= 0:
            return []
        with self._lock:
            ring = list(self._ring)
        return ring[-k:]


class IngestStats:
    """Exact intake accounting. frames_published + frames_dropped never
    exceeds frames_decoded: every sampled frame is counted exactly once,
    as published or as shed to backpressure."""

    def __init__(self):
        self._lock = threading.Lock()
        self.frames_decoded = 0
        self.frames_published = 0
        self.frames_dropped = 0
        self.audio_chunks = 0
        self.segments_emitted = 0
        self.reconnects = 0
        self.last_media_time: MediaTime = 0.0

    def on_decoded(self, frame: Frame) -> None:
        with self._lock:
            self.frames_decoded += 1
            self.last_media_time = frame.media_time

    def on_publish(self, evicted: object | None) -> None:
        with self._lock:
            if evicted is None:
                self.frames_published += 1
            else:
                self.frames_dropped += 1

    def on_audio_chunk(self) -> None:
        with self._lock:
            self.audio_chunks += 1

    def on_segments(self, n: int) -> None:
        with self._lock:
            self.segments_emitted += n

    def on_reconnect(self) -> None:
        with self._lock:
            self.reconnects += 1

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "frames_decoded": self.frames_decoded,
                "frames_published": self.frames_published,
                "frames_dropped": self.frames_dropped,
                "audio_chunks": self.audio_chunks,
                "segments_emitted": self.segments_emitted,
                "reconnects": self.reconnects,
                "last_media_time": self.last_media_time,
            }
