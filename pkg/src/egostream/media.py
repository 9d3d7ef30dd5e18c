"""In-process media store: generated clips, TTS audio, relayed assets.

API payloads carry media by reference URI (/media/{id}); the store maps
those ids to bytes + content type. Thread-safe for concurrent put/get.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class MediaObject:
    media_id: str
    content_type: str
    data: bytes
    meta: dict = field(default_factory=dict)

    @property
    def url(self) -> str:
        return f"/media/{self.media_id}"


@dataclass(frozen=True)
class AudioRef:
    """Playable audio resource plus its duration."""

    media_id: str
    duration_s: float
    content_type: str = "audio/wav"

    @property
    def url(self) -> str:
        return f"/media/{self.media_id}"

    def to_payload(self) -> dict:
        return {"media_url": self.url, "duration_s": self.duration_s}


class MediaStore:
    def __init__(self):
        self._objects: dict[str, MediaObject] = {}
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def put(self, content_type: str, data: bytes, **meta: Any) -> MediaObject:
        with self._lock:
            media_id = f"m-{next(self._counter)}"
            obj = MediaObject(media_id, content_type, data, dict(meta))
            self._objects[media_id] = obj
            return obj

    def get(self, media_id: str) -> MediaObject | None:
        with self._lock:
            return self._objects.get(media_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._objects)
