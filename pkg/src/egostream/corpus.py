"""Offline corpus curation: keep clips that are steady and commonly narrated.

Clips shot with a fast-moving camera are poor retrieval targets, so each
video gets a motion score (worst consecutive-frame change) and is dropped
above a threshold. Narrations mentioning verbs that barely occur across
the whole corpus are dropped too, since their embeddings cannot be
matched reliably. Both thresholds are caller-supplied; there are no
defaults because they are corpus-dependent.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DecodeFailed, IoFailed
from .retrieval import RetrievalRecord
from .text import stem, tokens

# base forms; the working lexicon stems every inflection of these so that
# surface tokens and lexicon entries meet in the same stem space
_BASE_VERBS = (
    "add", "arrange", "assemble", "bake", "baste", "beat", "blend", "boil",
    "break", "bring", "brush", "butter", "caramelize", "carry", "carve",
    "chop", "clean", "close", "coat", "combine", "cook", "cool", "core",
    "cover", "crack", "crush", "cut", "defrost", "dice", "dip", "divide",
    "drain", "drizzle", "drop", "dry", "dust", "fill", "flatten", "flip",
    "fold", "freeze", "frost", "fry", "garnish", "glaze", "grab", "grate",
    "grease", "grill", "grind", "heat", "hold", "julienne", "knead", "ladle",
    "layer", "lift", "light", "line", "marinate", "mash", "measure", "melt",
    "microwave", "mince", "mix", "move", "oil", "open", "peel", "pick",
    "pinch", "pipe", "pit", "place", "poach", "pour", "preheat", "press",
    "pull", "pulse", "puree", "push", "put", "reduce", "refrigerate",
    "reheat", "remove", "rest", "rinse", "roast", "roll", "rotate", "rub",
    "salt", "saute", "scoop", "score", "scramble", "scrape", "sear",
    "season", "separate", "serve", "set", "shake", "shape", "shred", "sift",
    "simmer", "skim", "slice", "smear", "smooth", "soak", "spoon", "spread",
    "sprinkle", "squeeze", "stack", "steam", "steep", "stir", "strain",
    "stretch", "stuff", "swirl", "take", "taste", "tear", "thaw", "thicken",
    "tilt", "toast", "top", "toss", "transfer", "trim", "turn", "twist",
    "unwrap", "warm", "wash", "weigh", "whip", "whisk", "wipe", "wrap",
    "zest",
)


def _inflections(base: str) -> tuple[str, ...]:
    doubled = base + base[-1] if base[-1] not in "aeiouwxy" else base
    return (
        base,
        base + "s",
        base + "es",
        base + "ing",
        base + "ed",
        doubled + "ing",
        doubled + "ed",
        base[:-1] + "ing" if base.endswith("e") else base + "ing",
    )


VERB_STEMS: frozenset[str] = frozenset(
    stem(form) for base in _BASE_VERBS for form in _inflections(base)
)


def narration_verbs(text: str) -> list[str]:
    """Stems of the tokens that are action verbs, in narration order."""
    return [s for tok in tokens(text) if (s := stem(tok)) in VERB_STEMS]


# --- motion ------------------------------------------------------------------------

def _grayscale(frame: np.ndarray) -> np.ndarray:
    pixels = np.asarray(frame, dtype=np.float64)
    if pixels.ndim == 2:
        return pixels
    return pixels[..., 0] * 0.299 + pixels[..., 1] * 0.587 + pixels[..., 2] * 0.114


def frame_motion(prev: np.ndarray, cur: np.ndarray) -> float:
    """Mean absolute grayscale change between two frames, scaled to [0, 1]."""
    a, b = _grayscale(prev), _grayscale(cur)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)) / 255.0)


def clip_motion(frames: Iterable[np.ndarray]) -> float:
    """Worst consecutive-pair motion across the clip; 0.0 for under two frames."""
    worst = 0.0
    prev = None
    for frame in frames:
        if prev is not None:
            worst = max(worst, frame_motion(prev, frame))
        prev = frame
    return worst


@dataclass(frozen=True)
class VideoStats:
    motion: float
    duration_s: float
    frame_count: int


def video_stats(path: str | Path) -> VideoStats:
    """One decode pass: worst-pair motion plus duration from the container fps."""
    import cv2

    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeFailed(f"cannot open video file: {path}")
    fps = cap.get(cv2.CAP_PROP_FPS)
    if not fps or fps <= 0 or fps > 1000:
        fps = 30.0
    worst = 0.0
    prev = None
    count = 0
    try:
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            count += 1
            if prev is not None:
                worst = max(worst, frame_motion(prev, bgr))
            prev = bgr
    finally:
        cap.release()
    if count == 0:
        raise DecodeFailed(f"no decodable frames in {path}")
    return VideoStats(motion=worst, duration_s=count / fps, frame_count=count)


# --- corpus filtering --------------------------------------------------------------

@dataclass(frozen=True)
class CorpusItem:
    clip_id: str
    path: str
    narration: str


def load_corpus(path: str | Path) -> list[CorpusItem]:
    """Corpus listing: JSON Lines rows {clip_id, path, narration}."""
    items = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailed(f"cannot read corpus listing {path}: {exc}")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            items.append(
                CorpusItem(
                    clip_id=str(row["clip_id"]),
                    path=str(row["path"]),
                    narration=str(row["narration"]),
                )
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise IoFailed(f"corpus listing {path} line {line_no}: {exc}")
    seen = Counter(item.clip_id for item in items)
    dupes = [vid for vid, n in seen.items() if n > 1]
    if dupes:
        raise IoFailed(f"duplicate video ids in corpus listing: {dupes}")
    return items


def count_corpus_verbs(items: Sequence[CorpusItem]) -> Counter:
    """Occurrences of each verb stem across every narration, counted before
    any filtering so rarity reflects the whole corpus."""
    counts: Counter = Counter()
    for item in items:
        counts.update(narration_verbs(item.narration))
    return counts


@dataclass(frozen=True)
class FilterResult:
    kept: tuple[CorpusItem, ...]
    dropped_motion: tuple[str, ...]
    dropped_verb_freq: tuple[str, ...]
    verb_counts: dict
    motions: dict  # clip_id -> motion, for videos that decoded

    @property
    def total(self) -> int:
        # conservation: every input clip lands in exactly one bucket
        return len(self.kept) + len(self.dropped_motion) + len(self.dropped_verb_freq)

    def to_report(self, motion_threshold: float, min_verb_count: int) -> dict:
        return {
            "thresholds": {
                "motion_threshold": motion_threshold,
                "min_verb_count": min_verb_count,
            },
            "total": self.total,
            "kept": len(self.kept),
            "dropped_motion": len(self.dropped_motion),
            "dropped_verb_freq": len(self.dropped_verb_freq),
            "kept_ids": [item.clip_id for item in self.kept],
            "dropped_motion_ids": list(self.dropped_motion),
            "dropped_verb_freq_ids": list(self.dropped_verb_freq),
            "verb_counts": dict(sorted(self.verb_counts.items())),
            "motions": {k: self.motions[k] for k in sorted(self.motions)},
        }


def filter_corpus(
    items: Sequence[CorpusItem],
    motion_threshold: float,
    min_verb_count: int,
    stats_fn: Callable[[str], VideoStats] = video_stats,
) -> FilterResult:
    """Keep steady clips whose verbs all occur at least min_verb_count times.

    The motion gate runs first; undecodable videos fail it. A narration
    with no recognized verbs passes the verb gate vacuously. Input order
    is preserved in the kept list.
    """
    if motion_threshold <= 0:
        raise ValueError(f"motion_threshold must be positive, got {motion_threshold}")
    if min_verb_count < 1:
        raise ValueError(f"min_verb_count must be >= 1, got {min_verb_count}")
    verb_counts = count_corpus_verbs(items)
    kept: list[CorpusItem] = []
    dropped_motion: list[str] = []
    dropped_rare: list[str] = []
    motions: dict = {}
    for item in items:
        try:
            stats = stats_fn(item.path)
        except DecodeFailed:
            dropped_motion.append(item.clip_id)
            continue
        motions[item.clip_id] = stats.motion
        if stats.motion >= motion_threshold:
            dropped_motion.append(item.clip_id)
            continue
        verbs = narration_verbs(item.narration)
        if any(verb_counts[v] < min_verb_count for v in verbs):
            dropped_rare.append(item.clip_id)
            continue
        kept.append(item)
    return FilterResult(
        kept=tuple(kept),
        dropped_motion=tuple(dropped_motion),
        dropped_verb_freq=tuple(dropped_rare),
        verb_counts=dict(verb_counts),
        motions=motions,
    )


def build_manifest_records(
    items: Sequence[CorpusItem],
    embedder,
    stats_fn: Callable[[str], VideoStats] = video_stats,
) -> list[RetrievalRecord]:
    """Index rows for the kept items, in input order. Reruns over the same
    inputs produce byte-identical manifests (the embedder is deterministic
    and durations come from the containers)."""
    records = []
    for item in items:
        stats = stats_fn(item.path)
        records.append(
            RetrievalRecord(
                video_id=item.clip_id,
                feature=embedder.embed(item.narration).astype(np.float32),
                title=item.narration,
                source_uri=item.path,
                duration_s=stats.duration_s,
            )
        )
    return records


def save_corpus(items: Sequence[CorpusItem], path: str | Path) -> Path:
    """Write a clip list in the same JSON Lines shape load_corpus reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {"clip_id": item.clip_id, "path": item.path, "narration": item.narration},
                    sort_keys=True,
                )
                + "\n"
            )
    return path
