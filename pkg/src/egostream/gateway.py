"""Adapter boundary to the model tier, plus intent routing and generation gating.

All four model roles (chat, caption, embed, generate) sit behind one wire
protocol: HTTP POST with a JSON body {"kind": <role>, "payload": {...}} and
a JSON reply. A binding whose endpoint is the literal string "mock" selects
the deterministic in-process mock for that role, which is what the whole
test suite runs on.
"""
from __future__ import annotations

import hashlib
import io
import itertools
import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .config import BindingConfig, ModelsConfig
from .errors import (
    AdapterError,
    AdapterRejected,
    AdapterTimeout,
    AdapterUnreachable,
    EmptyText,
    MalformedReply,
)
from .media import MediaStore
from .text import content_stems, tokens
from .timeline import Frame, MediaTime
from .vectors import l2_normalize

MOCK_ENDPOINT = "mock"
NO_SCRIPT_REPLY = "NO_SCRIPT"


# --- intents -----------------------------------------------------------------

class IntentKind(str, Enum):
    CURRENT_SCENE = "current_scene"
    GROUNDING = "grounding"
    SUMMARIZE = "summarize"
    PLAN = "plan"
    GENERATE = "generate"
    RETRIEVE = "retrieve"


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    argument: str  # cleaned query text


_GROUNDING_CUES = ("when did", "what time", "when was", "when have")
_SUMMARIZE_CUES = ("summarize", "summary", "what have i done", "what has happened", "recap")
_PLAN_CUES = (
    "what should i do next",
    "what do i do next",
    "next step",
    "remaining steps",
    "steps are left",
    "plan",
)
_VISUAL_CUES = ("show", "look like", "looks like", "demonstrate", "visual", "generate", "predict")


def _has_phrase(query_tokens: list[str], phrase: str) -> bool:
    # whole-token phrase matching; "how" must never match inside "show"
    needle = tokens(phrase)
    if not needle or len(needle) > len(query_tokens):
        return False
    n = len(needle)
    return any(query_tokens[i : i + n] == needle for i in range(len(query_tokens) - n + 1))


def route_intent(query_text: str) -> Intent:
    """Classify a query into exactly one capability path.

    Deterministic rule cascade over whole-token cue phrases; the default
    branch makes routing total. A real chat adapter may be configured to
    classify instead, but the mock path always uses these rules.
    """
    cleaned = query_text.strip()
    toks = tokens(cleaned)
    if any(_has_phrase(toks, cue) for cue in _GROUNDING_CUES):
        kind = IntentKind.GROUNDING
    elif any(_has_phrase(toks, cue) for cue in _SUMMARIZE_CUES):
        kind = IntentKind.SUMMARIZE
    elif any(_has_phrase(toks, cue) for cue in _PLAN_CUES):
        kind = IntentKind.PLAN
    elif (_has_phrase(toks, "show me") or _has_phrase(toks, "demonstrate")) and _has_phrase(toks, "how"):
        kind = IntentKind.RETRIEVE
    elif _has_phrase(toks, "generate") or (
        _has_phrase(toks, "action") and any(_has_phrase(toks, cue) for cue in _VISUAL_CUES)
    ):
        kind = IntentKind.GENERATE
    else:
        kind = IntentKind.CURRENT_SCENE
    return Intent(kind=kind, argument=cleaned)


def needs_generation(query_text: str) -> tuple[bool, str]:
    """Decide whether a query warrants a synthesized visual demonstration.

    True only when the phrasing asks to *see* a next/specific action rather
    than read about it. The returned prompt is the query verbatim (a real
    chat adapter may rewrite it into an imperative).
    """
    toks = tokens(query_text)
    if not toks:
        return False, ""
    wants_visual = any(_has_phrase(toks, cue) for cue in _VISUAL_CUES)
    return (wants_visual, query_text.strip() if wants_visual else "")


# --- adapter bindings and protocols -------------------------------------------

ROLES = ("chat", "caption", "embed", "generate")


@dataclass(frozen=True)
class AdapterBinding:
    role: str
    endpoint: str = MOCK_ENDPOINT
    timeout_ms: int = 5000
    max_retries: int = 1

    @property
    def is_mock(self) -> bool:
        return self.endpoint == MOCK_ENDPOINT


@dataclass(frozen=True)
class GeneratedClip:
    """A short demonstration clip; real adapters target 2 seconds."""

    clip_id: str
    duration_s: float
    source_frame_time: MediaTime
    prompt: str
    media_ref: str  # media store URL

    def to_payload(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "duration_s": self.duration_s,
            "source_frame_time": self.source_frame_time,
            "prompt": self.prompt,
            "media_url": self.media_ref,
        }


class ChatAdapter(Protocol):
    is_mock: bool

    def chat(self, frames: Sequence[Frame], context: str, query: str) -> str: ...


class CaptionAdapter(Protocol):
    is_mock: bool

    def caption(self, frames: Sequence[Frame]) -> str: ...


class EmbedAdapter(Protocol):
    is_mock: bool
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class GenerateAdapter(Protocol):
    is_mock: bool

    def generate_demo(self, last_frame: Frame, prompt: str) -> GeneratedClip: ...


# --- deterministic mocks -------------------------------------------------------

class HashingEmbedder:
    """Seeded feature-hashing of lowercased tokens into `dim` dims, L2-normalized.

    Content tokens (stopwords removed, lightly stemmed) are hashed with a
    keyed blake2b so two texts sharing content words overlap in the vector
    space by construction. Fully deterministic across processes.
    """

    is_mock = True

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 2:
            raise ValueError(f"embed dimension must be >= 2, got {dim}")
        self.dim = dim
        self._key = seed.to_bytes(8, "little")

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        terms = content_stems(text) or tokens(text)
        if not terms:
            raise EmptyText(f"no tokens to embed in {text!r}")
        vec = np.zeros(self.dim, dtype=np.float64)
        for term in terms:
            digest = hashlib.blake2b(term.encode("utf-8"), key=self._key, digest_size=9).digest()
            idx = int.from_bytes(digest[:8], "little") % self.dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            vec[idx] += sign
        return l2_normalize(vec)


@dataclass(frozen=True)
class QaRow:
    t: MediaTime
    question: str
    answer: str


def load_qa_script(path: str | Path) -> list[QaRow]:
    """QA fixture: JSON Lines rows {t, question, answer}."""
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        rows.append(QaRow(t=float(row["t"]), question=str(row["question"]), answer=str(row["answer"])))
    return rows


class ScriptedChat:
    """Mock chat model: answers from a QA table keyed by question and media time.

    The row whose question best token-overlaps the query wins; among equally
    good questions the one scripted nearest the current media time is used.
    Questions that overlap too little return the fixed fallback NO_SCRIPT.
    """

    is_mock = True

    def __init__(self, rows: Sequence[QaRow] = (), min_overlap: float = 0.5):
        self._rows = list(rows)
        self._min_overlap = min_overlap

    def chat(self, frames: Sequence[Frame], context: str, query: str) -> str:
        if not self._rows:
            return NO_SCRIPT_REPLY
        now = frames[-1].media_time if frames else 0.0
        q_tokens = set(tokens(query))
        if not q_tokens:
            return NO_SCRIPT_REPLY

        def overlap(row: QaRow) -> float:
            r_tokens = set(tokens(row.question))
            union = q_tokens | r_tokens
            return len(q_tokens & r_tokens) / len(union) if union else 0.0

        best = max(overlap(row) for row in self._rows)
        if best < self._min_overlap:
            return NO_SCRIPT_REPLY
        candidates = [row for row in self._rows if overlap(row) == best]
        candidates.sort(key=lambda row: (abs(row.t - now), row.t))
        return candidates[0].answer


@dataclass(frozen=True)
class Annotation:
    t_start: MediaTime
    t_end: MediaTime
    text: str


def load_annotations(path: str | Path) -> list[Annotation]:
    """Annotation track: JSON Lines rows {t_start, t_end, text}."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        out.append(Annotation(float(row["t_start"]), float(row["t_end"]), str(row["text"])))
    return out


class ScriptedCaption:
    """Mock captioner: returns the annotation overlapping the frame window most.

    `outages` are (t_lo, t_hi] media-time intervals during which the adapter
    simulates being unreachable, for fault-injection tests.
    """

    is_mock = True
    IDLE_TEXT = "nothing notable happens"

    def __init__(self, annotations: Sequence[Annotation] = (), outages: Sequence[tuple[float, float]] = ()):
        self._annotations = sorted(annotations, key=lambda a: a.t_start)
        self._outages = list(outages)

    def caption(self, frames: Sequence[Frame]) -> str:
        if not frames:
            raise ValueError("caption requires at least one frame")
        w_lo = frames[0].media_time
        w_hi = frames[-1].media_time
        for lo, hi in self._outages:
            if lo < w_hi <= hi:
                raise AdapterUnreachable("scripted caption outage", role="caption")
        best_text = None
        best_overlap = 0.0
        for ann in self._annotations:
            ov = min(ann.t_end, w_hi) - max(ann.t_start, w_lo)
            if ov > best_overlap:
                best_overlap = ov
                best_text = ann.text
        return best_text if best_text is not None else self.IDLE_TEXT


class MockGenerator:
    """Mock clip generator: a 2.0 s clip of the input frame with the prompt
    rendered as a deterministic color band (pixels are a pure function of
    frame + prompt)."""

    is_mock = True

    def __init__(self, store: MediaStore):
        self._store = store
        self._counter = itertools.count(1)

    def generate_demo(self, last_frame: Frame, prompt: str) -> GeneratedClip:
        if not prompt or not prompt.strip():
            raise ValueError("generation prompt must be non-empty")
        from PIL import Image

        pixels = np.asarray(last_frame.pixel_data, dtype=np.uint8).copy()
        band = hashlib.blake2b(prompt.encode("utf-8"), digest_size=3).digest()
        band_rows = max(1, pixels.shape[0] // 8)
        pixels[:band_rows, :] = np.frombuffer(band, dtype=np.uint8)
        img = Image.fromarray(pixels)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        obj = self._store.put(
            "image/png",
            buf.getvalue(),
            prompt=prompt,
            source_frame_time=last_frame.media_time,
            duration_s=2.0,
        )
        return GeneratedClip(
            clip_id=f"clip-{next(self._counter)}",
            duration_s=2.0,
            source_frame_time=last_frame.media_time,
            prompt=prompt,
            media_ref=obj.url,
        )


# --- HTTP adapters --------------------------------------------------------------

def call_adapter_endpoint(binding: AdapterBinding, kind: str, payload: dict) -> dict:
    """POST {"kind": kind, "payload": payload} to the binding, with retries.

    Retryable failures (connection refused, timeout) are retried up to
    binding.max_retries times; 4xx replies raise AdapterRejected at once.
    """
    import httpx

    timeout = binding.timeout_ms / 1000.0
    attempts = 1 + max(0, binding.max_retries)
    last_error: AdapterError | None = None
    for _ in range(attempts):
        try:
            reply = httpx.post(binding.endpoint, json={"kind": kind, "payload": payload}, timeout=timeout)
        except httpx.TimeoutException as exc:
            last_error = AdapterTimeout(f"{binding.role} adapter timed out: {exc}", role=binding.role)
            continue
        except httpx.HTTPError as exc:
            last_error = AdapterUnreachable(f"{binding.role} adapter unreachable: {exc}", role=binding.role)
            continue
        if 400 <= reply.status_code < 500:
            raise AdapterRejected(
                f"{binding.role} adapter rejected payload: HTTP {reply.status_code}", role=binding.role
            )
        if reply.status_code != 200:
            last_error = AdapterUnreachable(
                f"{binding.role} adapter returned HTTP {reply.status_code}", role=binding.role
            )
            continue
        try:
            return reply.json()
        except ValueError as exc:
            raise MalformedReply(f"{binding.role} adapter reply is not JSON: {exc}", role=binding.role)
    assert last_error is not None
    raise last_error


def _frames_payload(frames: Sequence[Frame]) -> list[dict]:
    from PIL import Image
    import base64

    out = []
    for frame in frames:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(frame.pixel_data, dtype=np.uint8)).save(buf, format="JPEG")
        out.append(
            {
                "media_time": frame.media_time,
                "jpeg_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
            }
        )
    return out


class HttpChat:
    is_mock = False

    def __init__(self, binding: AdapterBinding):
        self._binding = binding

    def chat(self, frames: Sequence[Frame], context: str, query: str) -> str:
        reply = call_adapter_endpoint(
            self._binding,
            "chat",
            {"frames": _frames_payload(frames), "context": context, "query": query},
        )
        text = reply.get("text")
        if not isinstance(text, str) or not text:
            raise MalformedReply("chat reply missing non-empty 'text'", role="chat")
        return text


class HttpCaption:
    is_mock = False

    def __init__(self, binding: AdapterBinding):
        self._binding = binding

    def caption(self, frames: Sequence[Frame]) -> str:
        reply = call_adapter_endpoint(self._binding, "caption", {"frames": _frames_payload(frames)})
        text = reply.get("text")
        if not isinstance(text, str) or not text:
            raise MalformedReply("caption reply missing non-empty 'text'", role="caption")
        return text


class HttpEmbed:
    is_mock = False

    def __init__(self, binding: AdapterBinding, dim: int):
        self._binding = binding
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        reply = call_adapter_endpoint(self._binding, "embed", {"text": text})
        vec = reply.get("embedding")
        if not isinstance(vec, list) or len(vec) != self.dim:
            raise MalformedReply(f"embed reply must be a {self.dim}-dim list", role="embed")
        return l2_normalize(np.asarray(vec, dtype=np.float32))


class HttpGenerator:
    is_mock = False

    def __init__(self, binding: AdapterBinding, store: MediaStore):
        self._binding = binding
        self._store = store
        self._counter = itertools.count(1)

    def generate_demo(self, last_frame: Frame, prompt: str) -> GeneratedClip:
        if not prompt or not prompt.strip():
            raise ValueError("generation prompt must be non-empty")
        import base64

        reply = call_adapter_endpoint(
            self._binding,
            "generate",
            {"frame": _frames_payload([last_frame])[0], "prompt": prompt},
        )
        try:
            duration = float(reply["duration_s"])
            data = base64.b64decode(reply["video_b64"])
            content_type = str(reply.get("content_type", "video/mp4"))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedReply(f"generate reply malformed: {exc}", role="generate")
        if not 1.8 <= duration <= 2.2:
            raise MalformedReply(
                f"generated clip duration {duration}s outside [1.8, 2.2]", role="generate"
            )
        obj = self._store.put(content_type, data, prompt=prompt, duration_s=duration)
        return GeneratedClip(
            clip_id=f"clip-{next(self._counter)}",
            duration_s=duration,
            source_frame_time=last_frame.media_time,
            prompt=prompt,
            media_ref=obj.url,
        )


# --- the gateway bundle -----------------------------------------------------------

@dataclass
class ModelGateway:
    """All four model-role adapters, validated once at startup (fail fast)."""

    chat: ChatAdapter
    caption: CaptionAdapter
    embed: EmbedAdapter
    generate: GenerateAdapter

    def validate(self) -> None:
        for role in ROLES:
            adapter = getattr(self, role, None)
            if adapter is None:
                raise AdapterUnreachable(f"no adapter bound for role {role!r}", role=role)


def _binding(role: str, cfg: BindingConfig) -> AdapterBinding:
    if cfg.endpoint != MOCK_ENDPOINT and not cfg.endpoint.startswith(("http://", "https://")):
        raise AdapterUnreachable(
            f"{role} endpoint {cfg.endpoint!r} is neither 'mock' nor an http(s) URL", role=role
        )
    return AdapterBinding(
        role=role, endpoint=cfg.endpoint, timeout_ms=cfg.timeout_ms, max_retries=cfg.max_retries
    )


def build_gateway(
    models: ModelsConfig,
    store: MediaStore,
    embed_dim: int,
    qa_rows: Sequence[QaRow] = (),
    annotations: Sequence[Annotation] = (),
    caption_outages: Sequence[tuple[float, float]] = (),
    embed_seed: int = 0,
) -> ModelGateway:
    """Wire adapters from config bindings; "mock" endpoints get the scripted mocks."""
    chat_b = _binding("chat", models.chat)
    caption_b = _binding("caption", models.caption)
    embed_b = _binding("embed", models.embed)
    generate_b = _binding("generate", models.generate)

    gateway = ModelGateway(
        chat=ScriptedChat(qa_rows) if chat_b.is_mock else HttpChat(chat_b),
        caption=(
            ScriptedCaption(annotations, caption_outages)
            if caption_b.is_mock
            else HttpCaption(caption_b)
        ),
        embed=HashingEmbedder(embed_dim, embed_seed) if embed_b.is_mock else HttpEmbed(embed_b, embed_dim),
        generate=MockGenerator(store) if generate_b.is_mock else HttpGenerator(generate_b, store),
    )
    gateway.validate()
    return gateway
