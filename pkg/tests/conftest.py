"""Shared fixtures: the bundled kitchen replay, the how-to manifest, and a
completed replay session reused by read-only tests."""
from __future__ import annotations

import pytest

from egostream.api import create_app
from egostream.config import Config
from egostream.fixtures import write_howto_manifest, write_kitchen_replay
from egostream.ingest import StreamSource
from egostream.orchestrator import StreamManager


@pytest.fixture(scope="session")
def kitchen_dir(tmp_path_factory) -> str:
    root = tmp_path_factory.mktemp("replay") / "kitchen"
    return str(write_kitchen_replay(root))


@pytest.fixture(scope="session")
def manifest_path(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("manifest") / "howto.jsonl"
    return str(write_howto_manifest(path))


@pytest.fixture()
def config(manifest_path) -> Config:
    cfg = Config()
    cfg.retrieval.manifest = manifest_path
    return cfg


@pytest.fixture(scope="session")
def ended_kitchen(kitchen_dir, manifest_path):
    """One full kitchen replay at high rate, finished; shared by tests that
    only read from it (queries do not mutate the memory log)."""
    cfg = Config()
    cfg.retrieval.manifest = manifest_path
    manager = StreamManager(cfg)
    worker = manager.create_stream(
        StreamSource(kind="synthetic", uri=kitchen_dir, rate=24.0)
    )
    assert worker.wait_until_ended(timeout=60.0), "kitchen replay did not finish"
    yield manager, worker
    manager.stop_all()


@pytest.fixture(scope="session")
def kitchen_client(ended_kitchen):
    """TestClient over the completed kitchen session's manager."""
    from starlette.testclient import TestClient

    manager, worker = ended_kitchen
    app = create_app(manager.config, manager)
    with TestClient(app) as client:
        yield client, worker
