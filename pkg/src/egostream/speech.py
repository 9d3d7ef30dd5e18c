"""Speech boundary: wake-phrase detection, transcription, and voice replies.

The scripted transcriber and silent synthesizer mirror the model-gateway
mocks: fully deterministic stand-ins keyed to media time, selected when an
endpoint is the literal "mock". Real endpoints use the same JSON-over-HTTP
shape as the model adapters.
"""
from __future__ import annotations

import io
import itertools
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import MalformedReply
from .media import AudioRef, MediaStore
from .text import tokens
from .timeline import MediaTime, TranscriptSegment

# final segment ends this long after its start, per spoken word
WORDS_PER_SECOND_END_PAD = 0.3
# synthesized speech runs at this many seconds per word
TTS_SECONDS_PER_WORD = 0.06
TTS_SAMPLE_RATE = 16000


# --- wake phrases ---------------------------------------------------------------

def _find_token_run(haystack: list[str], needle: tuple[str, ...]) -> int:
    """Index of the first contiguous occurrence of needle in haystack, else -1.
    Whole-token matching only, so "heyday assistants" never matches "hey assistant"."""
    if not needle or len(needle) > len(haystack):
        return -1
    for i in range(len(haystack) - len(needle) + 1):
        if tuple(haystack[i : i + len(needle)]) == needle:
            return i
    return -1


class WakeDetector:
    def __init__(self, keywords: Sequence[str]):
        if not keywords:
            raise ValueError("at least one wake keyword is required")
        self._keywords = [(kw, tuple(tokens(kw))) for kw in keywords]
        if any(not toks for _, toks in self._keywords):
            raise ValueError("wake keywords must contain at least one token")

    def split(self, text: str) -> tuple[str | None, str]:
        """(matched keyword, words after it) for the earliest keyword occurrence,
        or (None, text) when no keyword appears."""
        words = tokens(text)
        best: tuple[int, int, str] | None = None  # (position, -len, keyword): earliest, then longest
        for keyword, needle in self._keywords:
            pos = _find_token_run(words, needle)
            if pos >= 0:
                candidate = (pos, -len(needle), keyword)
                if best is None or candidate < best:
                    best = candidate
        if best is None:
            return None, text
        pos, neg_len, keyword = best
        remainder = " ".join(words[pos - neg_len :])
        return keyword, remainder

    def strip_all(self, text: str) -> str:
        """Remove every wake-keyword occurrence, keeping the other words."""
        words = tokens(text)
        changed = True
        while changed:
            changed = False
            for _, needle in self._keywords:
                pos = _find_token_run(words, needle)
                if pos >= 0:
                    del words[pos : pos + len(needle)]
                    changed = True
        return " ".join(words)


# --- transcription -----------------------------------------------------------------

def parse_transcript_script(path: str | Path) -> list[TranscriptSegment]:
    """Transcript fixture: lines of "<t_start> <utterance>"; '#' comments allowed."""
    return parse_transcript_lines(Path(path).read_text(encoding="utf-8").splitlines())


def parse_transcript_lines(lines: Sequence[str]) -> list[TranscriptSegment]:
    """Each line becomes one final segment whose end time grows with its
    word count, approximating real speaking pace."""
    segments = []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        t_text, _, utterance = line.partition(" ")
        utterance = utterance.strip()
        if not utterance:
            raise ValueError(f"transcript line has no utterance: {raw!r}")
        t_start = float(t_text)
        n_words = len(utterance.split())
        segments.append(
            TranscriptSegment(
                t_start=t_start,
                t_end=t_start + WORDS_PER_SECOND_END_PAD * n_words,
                text=utterance,
                is_final=True,
            )
        )
    segments.sort(key=lambda s: (s.t_start, s.t_end))
    return segments


class ScriptedAsr:
    """Mock transcriber: replays scripted segments as media time advances.

    A segment becomes available once the stream has played past its end
    time, matching when a real recognizer would finalize it. Each segment
    is emitted exactly once.
    """

    is_mock = True

    def __init__(self, segments: Sequence[TranscriptSegment] = ()):
        self._pending = sorted(segments, key=lambda s: (s.t_end, s.t_start))
        self._cursor = 0

    def poll(self, media_time: MediaTime) -> list[TranscriptSegment]:
        out = []
        while self._cursor < len(self._pending) and self._pending[self._cursor].t_end <= media_time:
            out.append(self._pending[self._cursor])
            self._cursor += 1
        return out


class MockTts:
    """Mock synthesizer: a silent 16 kHz mono WAV sized to the word count."""

    is_mock = True

    def __init__(self, store: MediaStore):
        self._store = store

    def synthesize(self, text: str) -> AudioRef:
        if not text or not text.strip():
            raise ValueError("cannot synthesize empty text")
        n_words = len(text.split())
        duration_s = round(TTS_SECONDS_PER_WORD * n_words, 6)
        n_samples = int(round(duration_s * TTS_SAMPLE_RATE))
        buf = io.BytesIO()
        with wave.open(buf, "wb") as wav:
            wav.setnchannels(1)
            wav.setsampwidth(2)
            wav.setframerate(TTS_SAMPLE_RATE)
            wav.writeframes(b"\x00\x00" * n_samples)
        obj = self._store.put("audio/wav", buf.getvalue(), text=text, duration_s=duration_s)
        return AudioRef(media_id=obj.media_id, duration_s=duration_s)


class HttpTts:
    is_mock = False

    def __init__(self, endpoint: str, store: MediaStore, timeout_ms: int = 5000):
        self._endpoint = endpoint
        self._store = store
        self._timeout = timeout_ms / 1000.0

    def synthesize(self, text: str) -> AudioRef:
        if not text or not text.strip():
            raise ValueError("cannot synthesize empty text")
        import base64

        from .gateway import AdapterBinding, call_adapter_endpoint

        binding = AdapterBinding(role="tts", endpoint=self._endpoint, timeout_ms=int(self._timeout * 1000))
        reply = call_adapter_endpoint(binding, "tts", {"text": text})
        try:
            data = base64.b64decode(reply["audio_b64"])
            duration_s = float(reply["duration_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedReply(f"tts reply malformed: {exc}", role="tts")
        obj = self._store.put(str(reply.get("content_type", "audio/wav")), data, text=text)
        return AudioRef(media_id=obj.media_id, duration_s=duration_s, content_type=obj.content_type)


def build_tts(endpoint: str, store: MediaStore, timeout_ms: int = 5000):
    if endpoint == "mock":
        return MockTts(store)
    if not endpoint.startswith(("http://", "https://")):
        raise ValueError(f"tts endpoint {endpoint!r} is neither 'mock' nor an http(s) URL")
    return HttpTts(endpoint, store, timeout_ms)
