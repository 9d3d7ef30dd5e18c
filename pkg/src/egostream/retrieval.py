"""Cross-view how-to retrieval: exact top-K cosine search over cached features.

The index is a full-scan exact search (no approximate-NN backend): at desk
scale (<= 1e5 records) exactness is affordable and keeps the brute-force
oracle tests meaningful. Rebuilds swap the whole index atomically; a built
index is immutable and safe for concurrent searches.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import DimMismatch, DuplicateId, IoFailed, ZeroVector
from .vectors import decode_f32, encode_f32, is_unit_norm, l2_normalize

DEFAULT_K = 3


@dataclass(frozen=True)
class RetrievalRecord:
    """An exocentric how-to video reference with a cached unit-norm feature."""

    video_id: str
    feature: np.ndarray
    title: str
    source_uri: str
    duration_s: float


@dataclass(frozen=True)
class SearchHit:
    record: RetrievalRecord
    score: float

    def to_payload(self) -> dict:
        return {
            "video_id": self.record.video_id,
            "title": self.record.title,
            "source_uri": self.record.source_uri,
            "duration_s": self.record.duration_s,
            "score": self.score,
        }


@dataclass(frozen=True)
class RetrievalIndex:
    records: tuple[RetrievalRecord, ...]
    dim: int
    built_at: float
    normalized_on_load: int = 0  # rows that arrived non-unit and were fixed
    # float64 copy of the stacked features, for stable scoring
    _matrix: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.records)


class TextEncoder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


def build_index(manifest_path: str | Path, dim: int | None = None) -> RetrievalIndex:
    """Load a JSON Lines manifest into an immutable index.

    Rows: {video_id, title, source_uri, duration_s, feature: base64 f32-LE}.
    The dimensionality is taken from `dim` or the first row; any later row
    that disagrees raises DimMismatch naming the row. Non-unit features are
    normalized on load and counted in `normalized_on_load`.
    """
    path = Path(manifest_path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailed(f"cannot read manifest {path}: {exc}") from exc

    records: list[RetrievalRecord] = []
    seen: set[str] = set()
    normalized = 0
    for row_no, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            video_id = str(row["video_id"])
            feature = decode_f32(row["feature"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DimMismatch(f"manifest row {row_no} unparseable: {exc}", row=row_no) from exc
        if dim is None:
            dim = int(feature.shape[0])
        if feature.shape[0] != dim:
            raise DimMismatch(
                f"manifest row {row_no} has dimension {feature.shape[0]}, expected {dim}",
                row=row_no,
            )
        if video_id in seen:
            raise DuplicateId(f"manifest row {row_no}: duplicate video_id {video_id!r}")
        seen.add(video_id)
        if not is_unit_norm(feature):
            feature = l2_normalize(feature)
            normalized += 1
        records.append(
            RetrievalRecord(
                video_id=video_id,
                feature=feature.astype(np.float32),
                title=str(row.get("title", "")),
                source_uri=str(row.get("source_uri", "")),
                duration_s=float(row.get("duration_s", 0.0)),
            )
        )

    matrix = (
        np.stack([r.feature for r in records]).astype(np.float64)
        if records
        else np.zeros((0, dim or 0), dtype=np.float64)
    )
    return RetrievalIndex(
        records=tuple(records),
        dim=dim or 0,
        built_at=time.time(),
        normalized_on_load=normalized,
        _matrix=matrix,
    )


def save_manifest(records, path: str | Path) -> Path:
    """Write manifest rows to JSON Lines; rows may be RetrievalRecords or
    dicts carrying a feature array. Deterministic output for fixed input."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for row in records:
            if isinstance(row, RetrievalRecord):
                payload = {
                    "video_id": row.video_id,
                    "title": row.title,
                    "source_uri": row.source_uri,
                    "duration_s": row.duration_s,
                    "feature": row.feature,
                }
            else:
                payload = dict(row)
            payload["feature"] = encode_f32(np.asarray(payload["feature"], dtype=np.float32))
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
    return out


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (||u|| * ||v||), in [-1, 1] within float tolerance."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"cosine of shapes {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def search(
    index: RetrievalIndex,
    query_text: str,
    text_encoder: TextEncoder,
    k: int = DEFAULT_K,
    min_score: float | None = None,
) -> list[SearchHit]:
    """Exact top-k by cosine similarity, ties broken by video_id ascending.

    Returns exactly min(k, |index|) hits (fewer only if min_score filters).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(index) == 0:
        return []
    query = np.asarray(text_encoder.embed(query_text), dtype=np.float64)
    if query.shape[0] != index.dim:
        raise DimMismatch(f"query dimension {query.shape[0]} != index dimension {index.dim}")
    norm = float(np.linalg.norm(query))
    if norm == 0.0:
        raise ZeroVector("query embedding is a zero vector")
    query = query / norm

    scores = index._matrix @ query
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.records[i].video_id))
    hits = []
    for i in order[:k]:
        score = float(scores[i])
        if min_score is not None and score < min_score:
            break
        hits.append(SearchHit(record=index.records[i], score=score))
    return hits
