"""Command-line entry points: serve the API, replay a recording headlessly,
build or validate retrieval manifests, query a running server, and filter
a clip corpus."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config, load_config
from .corpus import (
    build_manifest_records,
    filter_corpus,
    load_corpus,
    save_corpus,
)
from .errors import EgostreamError
from .fixtures import load_qa_script
from .gateway import HashingEmbedder
from .ingest import CLOSED, StreamSource
from .orchestrator import StreamManager
from .retrieval import build_index, save_manifest


@click.group()
def main():
    """Real-time egocentric stream assistant backend."""


def _load_config(config_path: str | None) -> Config:
    try:
        return load_config(config_path)
    except (EgostreamError, OSError, ValueError) as exc:
        raise click.ClickException(f"bad config: {exc}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default=None, help="override api.host")
@click.option("--port", type=int, default=None, help="override api.port")
def serve(config_path, host, port):
    """Run the HTTP/WebSocket service."""
    import uvicorn

    from .api import create_app

    config = _load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=host or config.api.host, port=port or config.api.port, log_level="info")


def _infer_source(path: Path, rate: float) -> StreamSource:
    if path.is_dir() or path.suffix == ".json":
        return StreamSource(kind="synthetic", uri=str(path), rate=rate)
    return StreamSource(kind="file", uri=str(path), rate=rate)


@main.command()
@click.argument("src", type=click.Path(exists=True))
@click.option("--rate", type=float, default=1.0, show_default=True, help="playback speed multiplier")
@click.option(
    "--script",
    "script_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="scripted chat answers (JSON Lines {t, question, answer})",
)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def replay(src, rate, script_path, config_path):
    """Replay a recording headlessly, printing every event as a JSON line.

    SRC is a replay directory (with timeline.json) or a video file; sidecar
    annotation/transcript/qa files next to it are picked up automatically.
    """
    from dataclasses import replace as dc_replace

    from .fixtures import resolve_bundle

    config = _load_config(config_path)
    source = _infer_source(Path(src), rate)
    manager = StreamManager(config)
    try:
        bundle = resolve_bundle(source)
        if script_path is not None and bundle is not None:
            bundle = dc_replace(bundle, qa_rows=tuple(load_qa_script(script_path)))
        worker = manager.create_stream(source, autostart=False, bundle=bundle)
        events = manager.bus.subscribe(worker.stream_id)
        worker.start()
        ended_seen = False
        while True:
            item = events.get(timeout=0.5)
            if item is CLOSED:
                break
            if item is None:
                if ended_seen:
                    break
                continue
            click.echo(json.dumps(item.to_payload(), sort_keys=True))
            if item.kind == "state_change" and item.payload.get("state") == "ended":
                ended_seen = True
        worker.wait_until_ended(timeout=10.0)
        click.echo(json.dumps({"kind": "summary", "payload": worker.status()}, sort_keys=True))
    except EgostreamError as exc:
        raise click.ClickException(str(exc))
    finally:
        manager.stop_all()


@main.group()
def index():
    """Retrieval index utilities."""


@index.command("build")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="where to write the manifest when MANIFEST is a clip list")
@click.option("--dim", type=int, default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="mock embedder seed")
def index_build(manifest, out_path, dim, seed):
    """Load and validate MANIFEST, or embed a clip list into a new manifest.

    A file whose rows carry features is validated by building the index; a
    clip list (rows {clip_id, path, narration}) is embedded with the mock
    embedder and written to --out.
    """
    path = Path(manifest)
    first = ""
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            first = line
            break
    try:
        row = json.loads(first) if first else {}
    except ValueError as exc:
        raise click.ClickException(f"{path} line 1: {exc}")

    try:
        if "feature" in row:
            idx = build_index(path)
            click.echo(
                json.dumps(
                    {
                        "manifest": str(path),
                        "rows": len(idx.records),
                        "dim": idx.dim,
                        "renormalized_rows": idx.normalized_on_load,
                    },
                    sort_keys=True,
                )
            )
            return
        if out_path is None:
            raise click.ClickException("--out is required when building from a clip list")
        items = load_corpus(path)
        records = build_manifest_records(items, HashingEmbedder(dim=dim, seed=seed))
        save_manifest(records, out_path)
        click.echo(json.dumps({"manifest": str(out_path), "rows": len(records)}, sort_keys=True))
    except EgostreamError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.argument("stream_id")
@click.argument("text")
@click.option("--server", default="http://127.0.0.1:8000", show_default=True)
@click.option("--timeout", type=float, default=30.0, show_default=True)
def query(stream_id, text, server, timeout):
    """Send a text query to a running server and print the response."""
    import httpx

    try:
        reply = httpx.post(
            f"{server}/streams/{stream_id}/query", json={"text": text}, timeout=timeout
        )
    except httpx.HTTPError as exc:
        raise click.ClickException(f"cannot reach {server}: {exc}")
    click.echo(json.dumps(reply.json(), indent=2, sort_keys=True))
    if reply.status_code != 200:
        sys.exit(1)


@main.group()
def corpus():
    """Clip corpus curation."""


@corpus.command("filter")
@click.option("--motion-threshold", type=float, required=True, help="drop clips with motion >= this")
@click.option("--min-verb-count", type=int, required=True, help="every verb must occur this often corpus-wide")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
def corpus_filter(motion_threshold, min_verb_count, in_path, out_path, report_path):
    """Filter a clip list by motion and corpus-wide verb frequency.

    Reads JSON Lines rows {clip_id, path, narration}; writes the kept rows
    in the same format, plus an accounting report.
    """
    try:
        items = load_corpus(in_path)
        result = filter_corpus(items, motion_threshold, min_verb_count)
    except (EgostreamError, ValueError) as exc:
        raise click.ClickException(str(exc))
    save_corpus(result.kept, out_path)
    report = result.to_report(motion_threshold, min_verb_count)
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(
        json.dumps(
            {
                "total": report["total"],
                "kept": report["kept"],
                "dropped_motion": report["dropped_motion"],
                "dropped_verb_freq": report["dropped_verb_freq"],
                "out": str(out_path),
            },
            sort_keys=True,
        )
    )


if __name__ == "__main__":
    main()
