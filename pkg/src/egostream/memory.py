"""Append-only timeline memory: periodic scene snapshots queryable by time or text.

Each entry is one captioned window of the stream with a unit-norm text
embedding. The log is thread-safe (the snapshot loop appends while query
handlers read) and spills its oldest half to disk past a size threshold so
long sessions stay bounded in RAM; queries still see spilled entries.
"""
from __future__ import annotations

import json
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .config import MemoryConfig
from .errors import CorruptRecord, EmptyWindow, IoFailed
from .timeline import Frame, MediaTime
from .vectors import decode_f32, encode_f32

META_KIND = "memory_log_meta"


@dataclass(frozen=True)
class MemoryEntry:
    entry_id: int
    t_start: MediaTime
    t_end: MediaTime
    description: str
    embedding: np.ndarray  # unit-norm float32
    created_wall: float

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError(f"entry span reversed: [{self.t_start}, {self.t_end}]")

    @property
    def midpoint(self) -> MediaTime:
        return (self.t_start + self.t_end) / 2.0

    def to_record(self) -> dict:
        return {
            "id": self.entry_id,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "description": self.description,
            "embedding": encode_f32(self.embedding),
            "created_wall": self.created_wall,
        }

    @classmethod
    def from_record(cls, record: dict) -> "MemoryEntry":
        return cls(
            entry_id=int(record["id"]),
            t_start=float(record["t_start"]),
            t_end=float(record["t_end"]),
            description=str(record["description"]),
            embedding=decode_f32(record["embedding"]),
            created_wall=float(record["created_wall"]),
        )


def _parse_record(line: str, line_no: int, embed_dim: int) -> MemoryEntry:
    try:
        record = json.loads(line)
        entry = MemoryEntry.from_record(record)
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptRecord(str(exc), line_no=line_no)
    if entry.embedding.shape != (embed_dim,):
        raise CorruptRecord(
            f"embedding has {entry.embedding.shape[0]} dims, log is {embed_dim}", line_no=line_no
        )
    return entry


class MemoryLog:
    def __init__(self, stream_id: str, config: MemoryConfig | None = None):
        self.stream_id = stream_id
        self.config = config or MemoryConfig()
        self._entries: list[MemoryEntry] = []
        self._next_id = 1
        self._lock = threading.RLock()
        self._spill_path: Path | None = None
        self._spilled = 0

    # --- capture -----------------------------------------------------------

    def snapshot_tick(
        self,
        frames: Sequence[Frame],
        caption_adapter,
        embed_adapter,
        window: tuple[MediaTime, MediaTime] | None = None,
    ) -> MemoryEntry:
        """Caption the window's frames and append one entry.

        The entry span is the given window bounds; without an explicit
        window it falls back to the frames' own time extent. Adapter
        failures propagate so the caller can record a gap for this tick.
        """
        if not frames:
            raise EmptyWindow("snapshot tick received no frames")
        if window is not None:
            t_start, t_end = window
        else:
            t_start, t_end = frames[0].media_time, frames[-1].media_time
        description = caption_adapter.caption(frames)
        embedding = embed_adapter.embed(description).astype(np.float32)
        with self._lock:
            entry = MemoryEntry(
                entry_id=self._next_id,
                t_start=float(t_start),
                t_end=float(t_end),
                description=description,
                embedding=embedding,
                created_wall=time.time(),
            )
            self._next_id += 1
            self._entries.append(entry)
            if len(self._entries) > self.config.spill_threshold:
                self._spill_oldest_half()
        return entry

    # --- spill -------------------------------------------------------------

    def _ensure_spill_path(self) -> Path:
        if self._spill_path is None:
            base = self.config.spill_dir or tempfile.mkdtemp(prefix="egostream-spill-")
            self._spill_path = Path(base) / f"{self.stream_id}.spill.jsonl"
            self._spill_path.parent.mkdir(parents=True, exist_ok=True)
        return self._spill_path

    def _spill_oldest_half(self) -> None:
        # caller holds the lock
        half = len(self._entries) // 2
        if half == 0:
            return
        path = self._ensure_spill_path()
        with path.open("a", encoding="utf-8") as fh:
            for entry in self._entries[:half]:
                fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
        self._spilled += half
        self._entries = self._entries[half:]

    def _iter_spilled(self) -> Iterator[MemoryEntry]:
        if self._spill_path is None or not self._spill_path.exists():
            return
        with self._spill_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if line.strip():
                    yield _parse_record(line, line_no, self.config.embed_dim)

    def iter_entries(self) -> Iterator[MemoryEntry]:
        """All entries in append order, spilled ones included."""
        with self._lock:
            resident = list(self._entries)
        yield from self._iter_spilled()
        yield from resident

    # --- queries -----------------------------------------------------------

    @property
    def count(self) -> int:
        with self._lock:
            return self._spilled + len(self._entries)

    def latest(self, k: int) -> list[MemoryEntry]:
        """Last k entries, oldest of them first."""
        if k <= 0:
            return []
        with self._lock:
            resident = list(self._entries)
        if len(resident) >= k:
            return resident[-k:]
        spilled = list(self._iter_spilled())
        return (spilled + resident)[-k:]

    def query_by_time(self, t_lo: MediaTime, t_hi: MediaTime) -> list[MemoryEntry]:
        """Entries whose [t_start, t_end] overlaps [t_lo, t_hi]; closed bounds,
        so touching endpoints counts as overlap."""
        if t_hi < t_lo:
            raise ValueError(f"time window reversed: [{t_lo}, {t_hi}]")
        return [e for e in self.iter_entries() if e.t_start <= t_hi and e.t_end >= t_lo]

    def query_by_text(
        self, query_embedding: np.ndarray, tau: float, top_n: int | None = None
    ) -> list[tuple[MemoryEntry, float]]:
        """Entries whose description embedding has cosine >= tau with the query,
        best score first; equal scores break toward the earlier entry."""
        q = np.asarray(query_embedding, dtype=np.float64)
        scored = []
        for entry in self.iter_entries():
            score = float(entry.embedding.astype(np.float64) @ q)
            if score >= tau:
                scored.append((entry, score))
        scored.sort(key=lambda pair: (-pair[1], pair[0].t_start))
        return scored if top_n is None else scored[:top_n]

    # --- persistence ---------------------------------------------------------

    def persist(self, path: str | Path) -> int:
        """Write the full log as JSON Lines: one meta line, then entries in
        append order. Returns the number of entries written."""
        path = Path(path)
        meta = {
            "kind": META_KIND,
            "stream_id": self.stream_id,
            "period_s": self.config.period_s,
            "window_s": self.config.window_s,
            "embed_dim": self.config.embed_dim,
        }
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8") as fh:
                fh.write(json.dumps(meta, sort_keys=True) + "\n")
                n = 0
                for entry in self.iter_entries():
                    fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
                    n += 1
        except OSError as exc:
            raise IoFailed(f"cannot write memory log to {path}: {exc}")
        return n

    @classmethod
    def load(cls, path: str | Path, config: MemoryConfig | None = None) -> "MemoryLog":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoFailed(f"cannot read memory log from {path}: {exc}")
        if not lines:
            raise CorruptRecord("memory log is empty, expected a meta line", line_no=1)
        try:
            meta = json.loads(lines[0])
        except ValueError as exc:
            raise CorruptRecord(f"meta line is not JSON: {exc}", line_no=1)
        if not isinstance(meta, dict) or meta.get("kind") != META_KIND:
            raise CorruptRecord(f"first line is not a {META_KIND} record", line_no=1)

        cfg = config or MemoryConfig(
            period_s=float(meta.get("period_s", 5.0)),
            window_s=float(meta.get("window_s", 4.0)),
            embed_dim=int(meta.get("embed_dim", 256)),
        )
        log = cls(stream_id=str(meta.get("stream_id", "unknown")), config=cfg)
        for line_no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            entry = _parse_record(line, line_no, cfg.embed_dim)
            with log._lock:
                log._entries.append(entry)
                log._next_id = max(log._next_id, entry.entry_id + 1)
                if len(log._entries) > cfg.spill_threshold:
                    log._spill_oldest_half()
        return log
