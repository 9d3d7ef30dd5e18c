"""Replay bundles: self-contained stream recordings for demos and tests.

A replay directory holds a synthetic timeline spec plus optional sidecar
tracks (scene annotations, a spoken transcript, scripted chat answers).
Plain video files get the same sidecars discovered next to them by name.
Everything here is deterministic so a replay always reproduces the same
session, byte for byte.

Run `python -m egostream.fixtures OUT_DIR` to materialize the bundled
two-minute kitchen scenario and its retrieval manifest for a quick demo.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .errors import ConnectFailed
from .gateway import Annotation, HashingEmbedder, QaRow, load_annotations, load_qa_script
from .ingest import StreamSource, SynthSpec, iter_synthetic, iter_video_file
from .retrieval import RetrievalRecord, save_manifest
from .speech import parse_transcript_lines, parse_transcript_script
from .timeline import Frame, TranscriptSegment

ANNOTATIONS_NAME = "annotations.jsonl"
TRANSCRIPT_NAME = "transcript.txt"
QA_NAME = "qa.jsonl"
TIMELINE_NAME = "timeline.json"


@dataclass(frozen=True)
class ReplayBundle:
    """A decodable source plus whatever sidecar tracks were found for it."""

    spec: SynthSpec | None = None
    video_path: Path | None = None
    annotations: tuple[Annotation, ...] = ()
    transcript: tuple[TranscriptSegment, ...] = ()
    qa_rows: tuple[QaRow, ...] = ()

    def __post_init__(self):
        if (self.spec is None) == (self.video_path is None):
            raise ValueError("bundle needs exactly one of a synthetic spec or a video path")

    def decode(self, seq_start: int = 0) -> Iterator[Frame]:
        if self.spec is not None:
            return iter_synthetic(self.spec, seq_start)
        return iter_video_file(self.video_path, seq_start)

    @property
    def duration_s(self) -> float | None:
        return self.spec.duration_s if self.spec is not None else None


def _sidecar(path: Path, suffix: str) -> Path:
    # video.mp4 -> video.annotations.jsonl and friends
    return path.with_name(path.stem + "." + suffix)


def load_replay_dir(root: str | Path) -> ReplayBundle:
    root = Path(root)
    spec_path = root / TIMELINE_NAME
    if not spec_path.exists():
        raise ConnectFailed(f"replay directory has no {TIMELINE_NAME}: {root}")
    return ReplayBundle(
        spec=SynthSpec.from_json_file(spec_path),
        annotations=tuple(load_annotations(p)) if (p := root / ANNOTATIONS_NAME).exists() else (),
        transcript=tuple(parse_transcript_script(p)) if (p := root / TRANSCRIPT_NAME).exists() else (),
        qa_rows=tuple(load_qa_script(p)) if (p := root / QA_NAME).exists() else (),
    )


def load_video_bundle(video_path: str | Path) -> ReplayBundle:
    video_path = Path(video_path)
    ann = _sidecar(video_path, ANNOTATIONS_NAME)
    txt = _sidecar(video_path, TRANSCRIPT_NAME)
    qa = _sidecar(video_path, QA_NAME)
    return ReplayBundle(
        video_path=video_path,
        annotations=tuple(load_annotations(ann)) if ann.exists() else (),
        transcript=tuple(parse_transcript_script(txt)) if txt.exists() else (),
        qa_rows=tuple(load_qa_script(qa)) if qa.exists() else (),
    )


def resolve_bundle(source: StreamSource) -> ReplayBundle | None:
    """Sidecars for a source, or None for kinds that cannot have them."""
    if source.kind == "rtmp":
        return None
    path = Path(source.uri)
    if source.kind == "synthetic" or path.is_dir():
        return load_replay_dir(path if path.is_dir() else path.parent)
    return load_video_bundle(path)


def write_replay_dir(
    root: str | Path,
    spec: SynthSpec,
    annotations: Sequence[Annotation] = (),
    transcript_lines: Sequence[str] = (),
    qa_rows: Sequence[QaRow] = (),
) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / TIMELINE_NAME).write_text(
        json.dumps(
            {
                "fps": spec.fps,
                "duration_s": spec.duration_s,
                "width": spec.width,
                "height": spec.height,
                "seed": spec.seed,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    with (root / ANNOTATIONS_NAME).open("w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(
                json.dumps(
                    {"t_start": ann.t_start, "t_end": ann.t_end, "text": ann.text}, sort_keys=True
                )
                + "\n"
            )
    (root / TRANSCRIPT_NAME).write_text("\n".join(transcript_lines) + "\n", encoding="utf-8")
    with (root / QA_NAME).open("w", encoding="utf-8") as fh:
        for row in qa_rows:
            fh.write(
                json.dumps({"t": row.t, "question": row.question, "answer": row.answer}, sort_keys=True)
                + "\n"
            )
    return root


# --- the bundled kitchen scenario ------------------------------------------------------

KITCHEN_SPEC = SynthSpec(fps=10.0, duration_s=120.0, width=64, height=48, seed=7)

KITCHEN_ANNOTATIONS: tuple[Annotation, ...] = (
    Annotation(0.0, 12.0, "takes eggs out of the fridge"),
    Annotation(12.0, 24.0, "separates the eggs into two bowls"),
    Annotation(24.0, 37.0, "cracks an egg into the pan"),
    Annotation(37.0, 50.0, "pours milk into the bowl"),
    Annotation(50.0, 55.0, "stirs the mixture with a spoon"),
    Annotation(55.0, 59.0, "adds sugar to the bowl"),
    Annotation(59.0, 72.0, "whisks the mixture until smooth"),
    Annotation(72.0, 85.0, "adds flour to the bowl"),
    Annotation(85.0, 100.0, "pours the mixture into molds"),
    Annotation(100.0, 120.0, "places the molds into the oven"),
)

# one ambient line that must stay ungated, then a wake query about the past
KITCHEN_TRANSCRIPT_LINES: tuple[str, ...] = (
    "20.0 this batter could use more sugar later",
    "74.0 hey assistant when did I add sugar",
)

KITCHEN_QA_ROWS: tuple[QaRow, ...] = (
    QaRow(t=30.0, question="what am i doing right now", answer="You are cracking an egg into the pan."),
    QaRow(
        t=90.0,
        question="what should i do next",
        answer="Pour the mixture into the molds, then move the molds into the oven.",
    ),
)


def kitchen_bundle() -> ReplayBundle:
    return ReplayBundle(
        spec=KITCHEN_SPEC,
        annotations=KITCHEN_ANNOTATIONS,
        transcript=tuple(parse_transcript_lines(KITCHEN_TRANSCRIPT_LINES)),
        qa_rows=KITCHEN_QA_ROWS,
    )


def write_kitchen_replay(root: str | Path) -> Path:
    return write_replay_dir(
        root,
        KITCHEN_SPEC,
        annotations=KITCHEN_ANNOTATIONS,
        transcript_lines=KITCHEN_TRANSCRIPT_LINES,
        qa_rows=KITCHEN_QA_ROWS,
    )


# --- the bundled how-to retrieval corpus -------------------------------------------------

HOWTO_TITLES: tuple[tuple[str, str], ...] = (
    ("v-whisk-01", "how to whisk eggs until fluffy"),
    ("v-whisk-02", "whisking technique for smooth batter"),
    ("v-crack-01", "how to crack an egg with one hand"),
    ("v-fold-01", "how to fold flour into batter gently"),
    ("v-sugar-01", "how to caramelize sugar without burning"),
    ("v-knead-01", "how to knead bread dough by hand"),
    ("v-pan-01", "how to season a cast iron pan"),
    ("v-oven-01", "how to preheat an oven for baking"),
)


def make_howto_records(dim: int = 256, seed: int = 0) -> list[RetrievalRecord]:
    embedder = HashingEmbedder(dim=dim, seed=seed)
    return [
        RetrievalRecord(
            video_id=video_id,
            feature=embedder.embed(title).astype("float32"),
            title=title,
            source_uri=f"corpus/{video_id}.mp4",
            duration_s=60.0 + 5.0 * i,
        )
        for i, (video_id, title) in enumerate(HOWTO_TITLES)
    ]


def write_howto_manifest(path: str | Path, dim: int = 256, seed: int = 0) -> Path:
    return save_manifest(make_howto_records(dim=dim, seed=seed), path)


def main(argv: Sequence[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="write the demo replay bundle and manifest")
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args(argv)
    root = write_kitchen_replay(args.out_dir / "kitchen_replay")
    manifest = write_howto_manifest(args.out_dir / "howto_manifest.jsonl")
    print(f"replay bundle: {root}")
    print(f"retrieval manifest: {manifest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
