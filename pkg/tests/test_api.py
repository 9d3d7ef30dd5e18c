"""HTTP and websocket surface: status codes, payload shapes, memory paging,
upload validation, and both sockets' close semantics."""
from __future__ import annotations

import base64
import json
import re
import time

import cv2
import numpy as np
import pytest
from starlette.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from egostream.api import WS_SLOW_CONSUMER, WS_UNKNOWN_STREAM, create_app, pump_step
from egostream.config import Config
from egostream.fixtures import write_kitchen_replay
from egostream.ingest import CLOSED, StreamSource
from egostream.orchestrator import ApiEvent, StreamManager, SubscriberQueue


def event(i: int) -> ApiEvent:
    return ApiEvent(kind="error", payload={"i": i}, seq=i, t=float(i))


def write_mp4(path, n_frames: int, fps: float = 10.0, width: int = 64, height: int = 48) -> str:
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, (width, height)
    )
    assert writer.isOpened()
    for i in range(n_frames):
        frame = np.full((height, width, 3), (i * 7) % 256, dtype=np.uint8)
        frame[:, : width // 2] = (i * 13) % 256
        writer.write(frame)
    writer.release()
    return str(path)


@pytest.fixture()
def fresh(manifest_path):
    """A private manager and client per test, torn down by the app lifespan."""
    cfg = Config()
    cfg.retrieval.manifest = manifest_path
    manager = StreamManager(cfg)
    app = create_app(cfg, manager)
    with TestClient(app) as client:
        yield client, manager, cfg


class TestPumpStep:
    def test_empty_queue_is_idle(self):
        q = SubscriberQueue(maxsize=4)
        assert pump_step(q) == ("idle",)

    def test_queued_events_sent_in_order(self):
        q = SubscriberQueue(maxsize=4)
        q.put(event(1))
        q.put(event(2))
        assert pump_step(q) == ("send", event(1))
        assert pump_step(q) == ("send", event(2))
        assert pump_step(q) == ("idle",)

    def test_close_drains_then_ends(self):
        q = SubscriberQueue(maxsize=4)
        q.put(event(1))
        q.close()
        assert pump_step(q) == ("send", event(1))
        assert pump_step(q) == ("end",)

    def test_overflow_wins_over_queued_items(self):
        q = SubscriberQueue(maxsize=2)
        for i in range(3):  # third put evicts the first
            q.put(event(i))
        assert q.overflowed
        assert pump_step(q) == ("close", WS_SLOW_CONSUMER, "slow_consumer")
        # the flag is sticky: draining does not clear it
        assert pump_step(q) == ("close", WS_SLOW_CONSUMER, "slow_consumer")

    def test_full_but_not_overflowed_still_sends(self):
        q = SubscriberQueue(maxsize=2)
        q.put(event(1))
        q.put(event(2))
        assert not q.overflowed
        assert pump_step(q) == ("send", event(1))


class TestStreamCrud:
    def test_list_includes_kitchen_stream(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.get("/streams")
        assert resp.status_code == 200
        rows = resp.json()["streams"]
        mine = [r for r in rows if r["stream_id"] == worker.stream_id]
        assert len(mine) == 1
        assert mine[0]["source"]["kind"] == "synthetic"

    def test_status_of_finished_replay(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.get(f"/streams/{worker.stream_id}")
        assert resp.status_code == 200
        body = resp.json()
        assert body["ended"] is True
        assert body["session_state"] == "idle"
        assert body["invalid_events"] == 0
        assert body["memory_gaps"] == 0
        assert body["stats"]["frames_decoded"] == 1200

    def test_unknown_stream_is_404_everywhere(self, kitchen_client):
        client, _ = kitchen_client
        assert client.get("/streams/s-nope").status_code == 404
        assert client.delete("/streams/s-nope").status_code == 404
        assert client.post("/streams/s-nope/query", json={"text": "hi"}).status_code == 404
        assert client.get("/streams/s-nope/memory").status_code == 404

    def test_duplicate_source_conflicts(self, kitchen_client, kitchen_dir):
        client, _ = kitchen_client
        resp = client.post(
            "/streams",
            json={"source": {"kind": "synthetic", "uri": kitchen_dir, "rate": 99.0}},
        )
        assert resp.status_code == 409

    def test_body_validation(self, kitchen_client):
        client, _ = kitchen_client
        bad = [
            {"source": {"kind": "carrier-pigeon", "uri": "x"}},
            {"source": {"kind": "file", "uri": ""}},
            {"source": {"kind": "file", "uri": "x", "rate": 0}},
            {"source": {"kind": "file", "uri": "x", "rate": -2}},
            {},
        ]
        for body in bad:
            assert client.post("/streams", json=body).status_code == 400, body

    def test_non_json_body_rejected(self, kitchen_client):
        client, _ = kitchen_client
        resp = client.post(
            "/streams", content=b"not json", headers={"content-type": "application/json"}
        )
        assert resp.status_code == 400

    def test_missing_file_maps_to_bad_gateway(self, kitchen_client):
        client, _ = kitchen_client
        resp = client.post(
            "/streams", json={"source": {"kind": "file", "uri": "/does/not/exist.mp4"}}
        )
        assert resp.status_code == 502
        assert resp.json()["code"] == "connect_failed"

    def test_create_then_delete_roundtrip(self, fresh, tmp_path):
        client, _, _ = fresh
        replay = str(write_kitchen_replay(tmp_path / "kitchen2"))
        resp = client.post(
            "/streams", json={"source": {"kind": "synthetic", "uri": replay, "rate": 240.0}}
        )
        assert resp.status_code == 200
        sid = resp.json()["stream_id"]
        assert client.get(f"/streams/{sid}").status_code == 200
        assert client.delete(f"/streams/{sid}").status_code == 204
        assert client.get(f"/streams/{sid}").status_code == 404
        # identity is freed: the same uri is accepted again
        resp = client.post(
            "/streams", json={"source": {"kind": "synthetic", "uri": replay, "rate": 240.0}}
        )
        assert resp.status_code == 200


class TestQueryEndpoint:
    def test_grounding_query(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.post(
            f"/streams/{worker.stream_id}/query", json={"text": "When did I add sugar?"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["intent"] == "grounding"
        assert "adds sugar to the bowl at 58.0s" in body["text"]
        assert body["error_code"] is None
        assert body["latency_ms"] >= 0
        hit = body["media"][0]
        assert hit["timestamp"] == "58.0s"
        assert hit["t_start"] <= 58.0 <= hit["t_end"]

    def test_retrieval_query(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.post(
            f"/streams/{worker.stream_id}/query",
            json={"text": "Show me how to whisk eggs"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["intent"] == "retrieve"
        assert body["text"].startswith("Found 3 how-to videos:")
        assert len(body["media"]) == 3
        assert body["media"][0]["video_id"].startswith("v-whisk")

    def test_empty_text_rejected(self, kitchen_client):
        client, worker = kitchen_client
        for text in ("", "   ", "\n\t"):
            resp = client.post(f"/streams/{worker.stream_id}/query", json={"text": text})
            assert resp.status_code == 400, repr(text)

    def test_malformed_query_body(self, kitchen_client):
        client, worker = kitchen_client
        url = f"/streams/{worker.stream_id}/query"
        assert client.post(url, json={}).status_code == 400
        assert client.post(url, json={"text": 42}).status_code == 400


class TestMemoryEndpoint:
    def test_full_log_shape(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.get(f"/streams/{worker.stream_id}/memory")
        assert resp.status_code == 200
        body = resp.json()
        assert body["total"] == 23
        assert body["page"] == 0
        assert body["page_size"] == 100  # config default
        entries = body["entries"]
        assert len(entries) == 23
        assert [e["id"] for e in entries] == list(range(1, 24))
        starts = [e["t_start"] for e in entries]
        assert starts == sorted(starts)
        for e in entries:
            assert re.fullmatch(r"\d+\.\ds", e["timestamp"]), e

    def test_time_window_finds_sugar_step(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.get(f"/streams/{worker.stream_id}/memory?from=56&to=57")
        body = resp.json()
        assert body["total"] == 1
        entry = body["entries"][0]
        assert entry["description"] == "adds sugar to the bowl"
        assert entry["timestamp"] == "58.0s"
        assert entry["t_start"] <= 58.0 <= entry["t_end"]

    def test_window_past_the_end_is_empty(self, kitchen_client):
        client, worker = kitchen_client
        body = client.get(f"/streams/{worker.stream_id}/memory?from=500&to=600").json()
        assert body["total"] == 0
        assert body["entries"] == []

    def test_inverted_range_rejected(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.get(f"/streams/{worker.stream_id}/memory?from=60&to=10")
        assert resp.status_code == 400

    def test_paging_partitions_the_log(self, kitchen_client):
        client, worker = kitchen_client
        url = f"/streams/{worker.stream_id}/memory"
        seen: list[int] = []
        for page in range(4):
            body = client.get(f"{url}?page={page}&page_size=10").json()
            assert body["total"] == 23
            assert body["page"] == page
            assert body["page_size"] == 10
            seen.extend(e["id"] for e in body["entries"])
        assert seen == list(range(1, 24))  # pages 10 + 10 + 3 + 0

    def test_paging_validation(self, kitchen_client):
        client, worker = kitchen_client
        url = f"/streams/{worker.stream_id}/memory"
        assert client.get(f"{url}?page=-1").status_code == 400
        assert client.get(f"{url}?page_size=0").status_code == 400
        assert client.get(f"{url}?page_size=1001").status_code == 400


class TestMediaEndpoint:
    def test_unknown_media_is_404(self, kitchen_client):
        client, _ = kitchen_client
        assert client.get("/media/m-999999").status_code == 404

    def test_generated_clip_and_tts_are_served(self, kitchen_client):
        client, worker = kitchen_client
        resp = client.post(
            f"/streams/{worker.stream_id}/query",
            json={"text": "Show me what the next action looks like"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["intent"] == "generate"

        clip = client.get(body["media"][0]["media_url"])
        assert clip.status_code == 200
        assert clip.headers["content-type"].startswith("image/png")
        assert clip.content.startswith(b"\x89PNG")

        audio = client.get(body["tts_audio"]["media_url"])
        assert audio.status_code == 200
        assert audio.headers["content-type"].startswith("audio/wav")
        assert audio.content.startswith(b"RIFF")


class TestUploadValidation:
    @pytest.fixture()
    def capped(self):
        cfg = Config()
        cfg.api.upload_max_bytes = 4096
        with TestClient(create_app(cfg, StreamManager(cfg))) as client:
            yield client

    def post(self, client, name: str, data: bytes, rate: str = "1.0"):
        return client.post(
            "/upload", files={"file": (name, data, "video/mp4")}, data={"rate": rate}
        )

    def test_zero_rate_rejected(self, capped):
        assert self.post(capped, "a.mp4", b"xx", rate="0").status_code == 400

    def test_negative_rate_rejected(self, capped):
        assert self.post(capped, "a.mp4", b"xx", rate="-4").status_code == 400

    def test_unparseable_rate_rejected(self, capped):
        assert self.post(capped, "a.mp4", b"xx", rate="fast").status_code == 400

    def test_oversize_upload_rejected(self, capped):
        resp = self.post(capped, "big.mp4", b"\x00" * 8192)
        assert resp.status_code == 413

    def test_empty_upload_rejected(self, capped):
        assert self.post(capped, "empty.mp4", b"").status_code == 400

    def test_undecodable_upload_rejected(self, capped):
        resp = self.post(capped, "notes.mp4", b"this is not a video container")
        assert resp.status_code == 400
        assert "decodable" in resp.json()["detail"]


class TestUploadEndToEnd:
    def test_uploaded_file_becomes_a_finished_stream(self, fresh, tmp_path):
        client, _, _ = fresh
        path = write_mp4(tmp_path / "clip.mp4", n_frames=100, fps=10.0)
        with open(path, "rb") as fh:
            resp = client.post(
                "/upload",
                files={"file": ("clip.mp4", fh, "video/mp4")},
                data={"rate": "20"},
            )
        assert resp.status_code == 200
        sid = resp.json()["stream_id"]

        deadline = time.monotonic() + 20.0
        while time.monotonic() < deadline:
            body = client.get(f"/streams/{sid}").json()
            if body["ended"]:
                break
            time.sleep(0.05)
        else:
            pytest.fail("uploaded stream never ended")
        assert body["stats"]["frames_decoded"] == 100

        memory = client.get(f"/streams/{sid}/memory").json()
        assert memory["total"] == 1  # one 5s snapshot fits a 10s clip
        assert memory["entries"][0]["description"]

        assert client.delete(f"/streams/{sid}").status_code == 204


class TestEventsSocket:
    def test_unknown_stream_closed_with_4404(self, fresh):
        client, _, _ = fresh
        with client.websocket_connect("/streams/s-nope/events") as ws:
            with pytest.raises(WebSocketDisconnect) as err:
                ws.receive_json()
        assert err.value.code == WS_UNKNOWN_STREAM

    def test_socket_mirrors_a_full_replay(self, fresh, kitchen_dir):
        client, manager, _ = fresh
        worker = manager.create_stream(
            StreamSource(kind="synthetic", uri=kitchen_dir, rate=48.0), autostart=False
        )
        events = []
        with client.websocket_connect(f"/streams/{worker.stream_id}/events") as ws:
            worker.start()
            for _ in range(10_000):
                payload = ws.receive_json()
                events.append(payload)
                if payload["kind"] == "state_change" and payload["payload"] == {
                    "scope": "stream",
                    "state": "ended",
                }:
                    break
            else:
                pytest.fail("never saw the stream-ended event")

        seqs = [e["seq"] for e in events]
        assert seqs == list(range(1, len(events) + 1))  # gap-free from 1
        kinds = {e["kind"] for e in events}
        assert kinds <= {"memory_tick", "state_change", "response"}
        assert sum(e["kind"] == "memory_tick" for e in events) == 23
        responses = [e for e in events if e["kind"] == "response"]
        assert len(responses) == 1  # the spoken sugar question
        assert "adds sugar to the bowl at 58.0s" in responses[0]["payload"]["text"]

    def test_slow_consumer_is_disconnected_not_gapped(self, manifest_path, kitchen_dir):
        cfg = Config()
        cfg.api.event_queue_size = 4
        manager = StreamManager(cfg)
        with TestClient(create_app(cfg, manager)) as client:
            worker = manager.create_stream(
                StreamSource(kind="synthetic", uri=kitchen_dir, rate=48.0),
                autostart=False,
            )
            with client.websocket_connect(f"/streams/{worker.stream_id}/events") as ws:
                # a burst far faster than the socket can drain
                for i in range(64):
                    manager.bus.publish(worker.stream_id, "error", {"i": i}, 0.0)
                with pytest.raises(WebSocketDisconnect) as err:
                    for _ in range(80):
                        ws.receive_json()
            assert err.value.code == WS_SLOW_CONSUMER


class TestFramesSocket:
    def test_unknown_stream_closed_with_4404(self, fresh):
        client, _, _ = fresh
        with client.websocket_connect("/streams/s-nope/frames") as ws:
            with pytest.raises(WebSocketDisconnect) as err:
                ws.receive_bytes()
        assert err.value.code == WS_UNKNOWN_STREAM

    def test_opens_before_first_decoded_frame(self, fresh, kitchen_dir):
        client, manager, _ = fresh
        worker = manager.create_stream(
            StreamSource(kind="synthetic", uri=kitchen_dir, rate=24.0), autostart=False
        )
        with client.websocket_connect(f"/streams/{worker.stream_id}/frames") as ws:
            worker.start()
            msg = json.loads(ws.receive_bytes())
        assert set(msg) == {"media_time", "seq", "jpeg_b64"}
        assert msg["media_time"] >= 0.0
        assert msg["seq"] >= 0
        jpeg = base64.b64decode(msg["jpeg_b64"])
        assert jpeg.startswith(b"\xff\xd8")  # JPEG magic

    def test_clean_close_after_stream_ends(self, fresh, tmp_path):
        client, manager, _ = fresh
        replay = str(write_kitchen_replay(tmp_path / "kitchen-eof"))
        worker = manager.create_stream(
            StreamSource(kind="synthetic", uri=replay, rate=240.0)
        )
        assert worker.wait_until_ended(timeout=30.0)
        with client.websocket_connect(f"/streams/{worker.stream_id}/frames") as ws:
            final = json.loads(ws.receive_bytes())  # the last frame still pending
            assert final["seq"] == worker.tracker.latest().sequence_no
            with pytest.raises(WebSocketDisconnect) as err:
                ws.receive_bytes()
        assert err.value.code == 1000

    def test_display_cadence_tracks_config(self, fresh, tmp_path):
        client, manager, _ = fresh
        replay = str(write_kitchen_replay(tmp_path / "kitchen-fps"))
        worker = manager.create_stream(
            StreamSource(kind="synthetic", uri=replay, rate=1.0)
        )
        stamps = []
        seqs = []
        with client.websocket_connect(f"/streams/{worker.stream_id}/frames") as ws:
            for _ in range(15):
                msg = json.loads(ws.receive_bytes())
                stamps.append(time.monotonic())
                seqs.append(msg["seq"])
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        elapsed = stamps[-1] - stamps[2]  # skip startup jitter
        fps = 12 / elapsed
        assert 6.0 <= fps <= 14.0, f"measured {fps:.1f} fps"


class TestStaticAssets:
    def test_configured_directory_is_served_under_app(self, tmp_path):
        site = tmp_path / "site"
        site.mkdir()
        (site / "index.html").write_text("<h1>console</h1>", encoding="utf-8")
        (site / "app.js").write_text("export {};", encoding="utf-8")
        cfg = Config()
        cfg.api.static_dir = str(site)
        with TestClient(create_app(cfg)) as client:
            page = client.get("/app/")
            assert page.status_code == 200
            assert "<h1>console</h1>" in page.text
            script = client.get("/app/app.js")
            assert script.status_code == 200
            assert script.text == "export {};"

    def test_api_routes_keep_priority_over_the_mount(self, tmp_path):
        site = tmp_path / "site"
        site.mkdir()
        (site / "index.html").write_text("x", encoding="utf-8")
        cfg = Config()
        cfg.api.static_dir = str(site)
        with TestClient(create_app(cfg)) as client:
            assert client.get("/streams").json() == {"streams": []}

    def test_default_config_serves_no_assets(self):
        with TestClient(create_app(Config())) as client:
            assert client.get("/app/").status_code == 404
