"""Fan-out of emotion points to visualization clients over a WebSocket.

One producer (a live decode session or a trace replay) feeds a hub; any
number of clients subscribe at ``/stream``. Each message is serialized once
and every client sees the same byte sequence, modulo join time. A client
that cannot keep up is dropped after its 64-message buffer fills; the
pipeline itself never blocks on a slow consumer.

Wire frames are single JSON objects with fixed field names:
    {"kind": "point", "t": ..., "valence": ..., "arousal": ..., "word": ...}
    {"kind": "status", "state": ...}
    {"kind": "end"}
"""

from __future__ import annotations

import asyncio
import json
import threading
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .audio_io import AudioBuffer, paced_source, to_canonical
from .decoder import (
    DYNAMIC_WINDOW,
    EmotionTrace,
    WindowSpec,
    iter_dynamic_decode,
    nearest_emotion_word,
)
from .midlevel import MidLevelProvider
from .regression import EmotionModel, EmotionPoint, FeatureVector, predict

CLIENT_BUFFER_SIZE = 64


def point_frame(p: EmotionPoint) -> str:
    return json.dumps(
        {
            "kind": "point",
            "t": p.t,
            "valence": p.valence,
            "arousal": p.arousal,
            "word": nearest_emotion_word(p),
        }
    )


def status_frame(state: str) -> str:
    return json.dumps({"kind": "status", "state": state})


def end_frame() -> str:
    return json.dumps({"kind": "end"})


class StreamHub:
    """Client registry plus broadcast. All methods run on the event loop."""

    def __init__(self):
        self._clients = {}
        self._sockets = {}
        self._next_id = 0
        self.latest: Optional[str] = None
        self.state = "idle"
        self.points_sent = 0
        self.source_id: Optional[str] = None
        self.first_client = asyncio.Event()

    @property
    def client_count(self) -> int:
        return len(self._clients)

    def register(self, ws) -> tuple:
        client_id = self._next_id
        self._next_id += 1
        queue: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_BUFFER_SIZE)
        self._clients[client_id] = queue
        self._sockets[client_id] = ws
        if self.latest is not None:
            queue.put_nowait(self.latest)
        if self.state == "ended":
            queue.put_nowait(end_frame())
        self.first_client.set()
        return client_id, queue

    def unregister(self, client_id: int) -> None:
        self._clients.pop(client_id, None)
        self._sockets.pop(client_id, None)

    def _drop(self, client_id: int) -> None:
        ws = self._sockets.get(client_id)
        self.unregister(client_id)
        if ws is not None:
            # Closing the socket unblocks the client's handler task, which
            # is stuck because nobody is draining its queue.
            asyncio.get_running_loop().create_task(_close_quietly(ws))

    def broadcast(self, text: str) -> None:
        for client_id in list(self._clients):
            try:
                self._clients[client_id].put_nowait(text)
            except asyncio.QueueFull:
                self._drop(client_id)

    def publish_point(self, p: EmotionPoint) -> None:
        frame = point_frame(p)
        self.latest = frame
        self.state = "streaming"
        self.points_sent += 1
        self.broadcast(frame)

    def publish_end(self) -> None:
        if self.state == "ended":
            return
        self.state = "ended"
        self.broadcast(end_frame())


async def _close_quietly(ws) -> None:
    try:
        await ws.close(code=1013)
    except Exception:
        pass


class TraceReplaySource:
    """Re-emit a recorded trace so that the point stamped t arrives t/speed
    seconds after the session starts."""

    def __init__(self, trace: EmotionTrace, speed: float = 1.0, wait_for_client: bool = False):
        if len(trace) == 0:
            raise ValueError("cannot replay an empty trace")
        if speed <= 0:
            raise ValueError("speed must be positive")
        self.trace = trace
        self.speed = speed
        self.wait_for_client = wait_for_client

    async def run(self, hub: StreamHub) -> None:
        hub.source_id = self.trace.source_id
        if self.wait_for_client:
            await hub.first_client.wait()
        loop = asyncio.get_running_loop()
        start = loop.time()
        for p in self.trace.points:
            delay = start + p.t / self.speed - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            hub.publish_point(p)
        hub.publish_end()


class LiveDecodeSource:
    """Decode audio in a worker thread and publish points as they complete.

    With realtime=True the ingestion is paced at the sample clock, so points
    appear roughly when their window closes; with realtime=False the decode
    runs flat out (useful for tests and piping).
    """

    def __init__(
        self,
        audio: AudioBuffer,
        model: EmotionModel,
        provider: MidLevelProvider,
        spec: WindowSpec = DYNAMIC_WINDOW,
        realtime: bool = True,
        source_id: str = "live",
    ):
        self.audio = to_canonical(audio)
        self.model = model
        self.provider = provider
        self.spec = spec
        self.realtime = realtime
        self.source_id = source_id

    async def run(self, hub: StreamHub) -> None:
        hub.source_id = self.source_id
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()

        def worker():
            try:
                chunk_n = round(0.25 * self.audio.sample_rate)
                chunks = paced_source(self.audio, chunk_n, realtime=self.realtime)
                for p in iter_dynamic_decode(
                    chunks, self.model, self.provider, self.spec, rate=self.audio.sample_rate
                ):
                    loop.call_soon_threadsafe(queue.put_nowait, p)
            finally:
                loop.call_soon_threadsafe(queue.put_nowait, None)

        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        while True:
            p = await queue.get()
            if p is None:
                break
            hub.publish_point(p)
        hub.publish_end()


class StatusResponse(BaseModel):
    state: str
    clients: int
    points_sent: int
    source_id: Optional[str] = None


class PredictRequest(BaseModel):
    features: list[float] = Field(min_length=9, max_length=9)


class PredictResponse(BaseModel):
    valence: float
    arousal: float
    word: str


def create_app(
    source=None,
    model: Optional[EmotionModel] = None,
    ui_dir=None,
) -> FastAPI:
    """Build the service. ``source`` is an object with ``async run(hub)``;
    without one the server only answers /status and /predict."""
    hub = StreamHub()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(source.run(hub)) if source is not None else None
        yield
        if hub.state != "ended":
            hub.publish_end()
            # Give handler tasks one scheduling round to flush the end frame.
            await asyncio.sleep(0.05)
        if task is not None:
            task.cancel()

    app = FastAPI(title="emostream", lifespan=lifespan)
    app.state.hub = hub

    @app.get("/status", response_model=StatusResponse)
    async def status() -> StatusResponse:
        return StatusResponse(
            state=hub.state,
            clients=hub.client_count,
            points_sent=hub.points_sent,
            source_id=hub.source_id,
        )

    @app.post("/predict", response_model=PredictResponse)
    async def predict_features(req: PredictRequest) -> PredictResponse:
        if model is None:
            from fastapi import HTTPException

            raise HTTPException(status_code=503, detail="no model loaded")
        point = predict(model, FeatureVector(req.features))
        return PredictResponse(
            valence=point.valence,
            arousal=point.arousal,
            word=nearest_emotion_word(point),
        )

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        client_id, queue = hub.register(ws)
        try:
            while True:
                text = await queue.get()
                await ws.send_text(text)
                if text == end_frame():
                    await ws.close()
                    break
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            hub.unregister(client_id)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
