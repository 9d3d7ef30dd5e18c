"""Configuration loading: defaults, TOML/JSON files, EGOSTREAM_CONFIG env var.

Every tunable the modules mention lives here under the section names used
in their docs (ingest.sample_hz, memory.period_s, retrieval.k, ...).
"""
from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_VAR = "EGOSTREAM_CONFIG"


@dataclass
class ReconnectConfig:
    initial_s: float = 0.5
    cap_s: float = 8.0
    max_attempts: int = 5


@dataclass
class IngestConfig:
    sample_hz: float = 2.0
    connect_timeout_s: float = 3.0
    audio_chunk_s: float = 0.2
    queue_maxsize: int = 256
    reconnect: ReconnectConfig = field(default_factory=ReconnectConfig)


@dataclass
class MemoryConfig:
    period_s: float = 5.0
    window_s: float = 4.0
    embed_dim: int = 256
    spill_threshold: int = 100_000
    spill_dir: str | None = None


@dataclass
class GroundingConfig:
    tau: float = 0.35
    recent_k: int = 10
    context_budget_chars: int = 4000
    max_hits: int = 5


@dataclass
class RetrievalConfig:
    k: int = 3
    dim: int = 256
    manifest: str | None = None
    min_score: float | None = None


@dataclass
class SessionConfig:
    utterance_timeout_s: float = 1.2
    processing_deadline_s: float = 15.0
    wake_keywords: tuple[str, ...] = ("hey assistant", "okay assistant")


@dataclass
class BindingConfig:
    endpoint: str = "mock"
    timeout_ms: int = 5000
    max_retries: int = 1


@dataclass
class ModelsConfig:
    chat: BindingConfig = field(default_factory=BindingConfig)
    caption: BindingConfig = field(default_factory=BindingConfig)
    embed: BindingConfig = field(default_factory=BindingConfig)
    generate: BindingConfig = field(default_factory=BindingConfig)


@dataclass
class SpeechConfig:
    asr_endpoint: str = "mock"
    tts_endpoint: str = "mock"
    language: str = "en"
    asr_timeout_ms: int = 5000
    tts_timeout_ms: int = 5000


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    display_fps: float = 10.0
    page_size: int = 100
    upload_max_bytes: int = 128 * 1024 * 1024
    chat_max_frames: int = 8
    event_queue_size: int = 256
    static_dir: str | None = None


@dataclass
class Config:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    grounding: GroundingConfig = field(default_factory=GroundingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    session: SessionConfig = field(default_factory=SessionConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    speech: SpeechConfig = field(default_factory=SpeechConfig)
    api: ApiConfig = field(default_factory=ApiConfig)


def _merge_into(obj: Any, data: dict[str, Any], path: str = "") -> None:
    for key, value in data.items():
        if not hasattr(obj, key):
            raise KeyError(f"unknown config key: {path}{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge_into(current, value, f"{path}{key}.")
        else:
            if isinstance(current, tuple) and isinstance(value, list):
                value = tuple(value)
            setattr(obj, key, value)


def load_config(path: str | Path | None = None) -> Config:
    """Build a Config from defaults overlaid with a TOML or JSON file.

    With no explicit path, EGOSTREAM_CONFIG is consulted; if that is unset
    too, pure defaults are returned.
    """
    cfg = Config()
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return cfg
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(raw.decode("utf-8"))
    else:
        data = tomllib.loads(raw.decode("utf-8"))
    _merge_into(cfg, data)
    return cfg
