import asyncio
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from emostream.decoder import EmotionPoint, EmotionTrace
from emostream.midlevel import ConstantProvider, MidLevelVector
from emostream.regression import FeatureVector, fit_emotion_model, predict
from emostream.stream_server import (
    CLIENT_BUFFER_SIZE,
    LiveDecodeSource,
    StreamHub,
    TraceReplaySource,
    create_app,
    end_frame,
    point_frame,
)
from synth import click_train, linear_dataset

PROVIDER = ConstantProvider(MidLevelVector(*([0.5] * 7)))


def make_model():
    rng = np.random.default_rng(71)
    w = np.full(9, 0.05)
    return fit_emotion_model(
        linear_dataset(rng, n=40, weights_arousal=w, weights_valence=-w)
    )


def make_trace():
    return EmotionTrace(
        points=(
            EmotionPoint(t=5.0, valence=0.2, arousal=0.4),
            EmotionPoint(t=6.0, valence=0.3, arousal=0.1),
            EmotionPoint(t=7.0, valence=-0.4, arousal=-0.2),
        ),
        source_id="session-a",
    )


class FakeSocket:
    def __init__(self):
        self.closed_with = None

    async def close(self, code=1000):
        self.closed_with = code


class TestHub:
    def test_broadcast_is_byte_identical_across_clients(self):
        async def run():
            hub = StreamHub()
            _, qa = hub.register(FakeSocket())
            _, qb = hub.register(FakeSocket())
            for p in make_trace().points:
                hub.publish_point(p)
            hub.publish_end()
            a = [qa.get_nowait() for _ in range(qa.qsize())]
            b = [qb.get_nowait() for _ in range(qb.qsize())]
            return a, b

        a, b = asyncio.run(run())
        assert a == b
        assert len(a) == 4
        assert json.loads(a[-1]) == {"kind": "end"}
        assert all(x is y for x, y in zip(a[:-1], b[:-1]))  # same str objects

    def test_late_registration_gets_latest_then_end(self):
        async def run():
            hub = StreamHub()
            for p in make_trace().points:
                hub.publish_point(p)
            hub.publish_end()
            _, q = hub.register(FakeSocket())
            return [q.get_nowait() for _ in range(q.qsize())], hub

        frames, hub = asyncio.run(run())
        assert len(frames) == 2
        assert json.loads(frames[0])["t"] == 7.0
        assert json.loads(frames[1]) == {"kind": "end"}
        assert hub.points_sent == 3

    def test_slow_client_is_dropped_not_blocking(self):
        async def run():
            hub = StreamHub()
            slow_ws = FakeSocket()
            fast_ws = FakeSocket()
            slow_id, slow_q = hub.register(slow_ws)
            fast_id, fast_q = hub.register(fast_ws)
            received = []
            for i in range(CLIENT_BUFFER_SIZE + 6):
                p = EmotionPoint(t=float(i + 1), valence=0.0, arousal=0.5)
                hub.publish_point(p)
                received.append(fast_q.get_nowait())
            await asyncio.sleep(0)  # let the close task run
            return hub, slow_id, fast_id, received, slow_ws, slow_q

        hub, slow_id, fast_id, received, slow_ws, slow_q = asyncio.run(run())
        assert slow_id not in hub._clients
        assert fast_id in hub._clients
        assert len(received) == CLIENT_BUFFER_SIZE + 6
        assert slow_ws.closed_with == 1013
        assert slow_q.qsize() == CLIENT_BUFFER_SIZE

    def test_publish_end_is_idempotent(self):
        async def run():
            hub = StreamHub()
            _, q = hub.register(FakeSocket())
            hub.publish_end()
            hub.publish_end()
            return [q.get_nowait() for _ in range(q.qsize())]

        frames = asyncio.run(run())
        assert frames == [end_frame()]


class TestEndpoints:
    def test_predict_round_trip(self):
        model = make_model()
        app = create_app(model=model)
        with TestClient(app) as client:
            features = [0.5] * 7 + [2.0, 0.25]
            resp = client.post("/predict", json={"features": features})
            assert resp.status_code == 200
            body = resp.json()
            want = predict(model, FeatureVector(np.array(features)))
            assert body["valence"] == pytest.approx(want.valence)
            assert body["arousal"] == pytest.approx(want.arousal)
            assert isinstance(body["word"], str)

    def test_predict_validates_length(self):
        with TestClient(create_app(model=make_model())) as client:
            assert client.post("/predict", json={"features": [0.1] * 8}).status_code == 422
            assert client.post("/predict", json={"features": "nope"}).status_code == 422

    def test_predict_without_model_is_503(self):
        with TestClient(create_app()) as client:
            assert client.post("/predict", json={"features": [0.0] * 9}).status_code == 503

    def test_status_idle_without_source(self):
        with TestClient(create_app()) as client:
            body = client.get("/status").json()
            assert body == {
                "state": "idle",
                "clients": 0,
                "points_sent": 0,
                "source_id": None,
            }


def wait_for_state(client, state, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        body = client.get("/status").json()
        if body["state"] == state:
            return body
        time.sleep(0.02)
    raise AssertionError(f"server never reached state {state!r}")


class TestReplay:
    def test_client_sees_points_then_end(self):
        source = TraceReplaySource(make_trace(), speed=1000.0, wait_for_client=True)
        with TestClient(create_app(source=source)) as client:
            with client.websocket_connect("/stream") as ws:
                frames = [json.loads(ws.receive_text()) for _ in range(4)]
        kinds = [f["kind"] for f in frames]
        assert kinds == ["point", "point", "point", "end"]
        assert [f["t"] for f in frames[:3]] == [5.0, 6.0, 7.0]
        assert all("word" in f for f in frames[:3])

    def test_late_joiner_after_end(self):
        source = TraceReplaySource(make_trace(), speed=10000.0)
        with TestClient(create_app(source=source)) as client:
            body = wait_for_state(client, "ended")
            assert body["points_sent"] == 3
            assert body["source_id"] == "session-a"
            with client.websocket_connect("/stream") as ws:
                first = json.loads(ws.receive_text())
                second = json.loads(ws.receive_text())
        assert first["kind"] == "point" and first["t"] == 7.0
        assert second == {"kind": "end"}

    def test_replay_paces_points_against_the_clock(self):
        trace = EmotionTrace(
            points=(
                EmotionPoint(t=0.2, valence=0.3, arousal=0.3),
                EmotionPoint(t=0.5, valence=0.4, arousal=0.1),
            )
        )
        source = TraceReplaySource(trace, speed=1.0, wait_for_client=True)
        with TestClient(create_app(source=source)) as client:
            with client.websocket_connect("/stream") as ws:
                t0 = time.monotonic()
                ws.receive_text()
                t1 = time.monotonic()
                ws.receive_text()
                t2 = time.monotonic()
        assert 0.3 - 0.1 <= t2 - t1 <= 0.3 + 0.25
        assert t1 - t0 >= 0.1

    def test_rejects_empty_trace_and_bad_speed(self):
        with pytest.raises(ValueError):
            TraceReplaySource(EmotionTrace(points=()), speed=1.0)
        with pytest.raises(ValueError):
            TraceReplaySource(make_trace(), speed=0.0)


class TestLiveDecode:
    def test_flat_out_decode_publishes_every_window(self):
        audio = click_train(2.0, 8.0)
        source = LiveDecodeSource(
            audio, make_model(), PROVIDER, realtime=False, source_id="live-test"
        )
        with TestClient(create_app(source=source)) as client:
            body = wait_for_state(client, "ended", timeout=30.0)
            assert body["points_sent"] == 4
            assert body["source_id"] == "live-test"
            with client.websocket_connect("/stream") as ws:
                last = json.loads(ws.receive_text())
                end = json.loads(ws.receive_text())
        assert last["kind"] == "point"
        assert last["t"] == 8.0
        assert end == {"kind": "end"}


class TestFrames:
    def test_point_frame_fields(self):
        p = EmotionPoint(t=1.5, valence=0.5, arousal=0.5)
        frame = json.loads(point_frame(p))
        assert frame == {
            "kind": "point",
            "t": 1.5,
            "valence": 0.5,
            "arousal": 0.5,
            "word": "excited",
        }
