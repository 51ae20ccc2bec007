"""HTTP control/query API and the TCP device listener.

Endpoints (JSON unless noted):

    GET  /devices                          registry summary
    GET  /devices/{id}/latest              newest telemetry for a device
    GET  /devices/{id}/timeline?since=&kinds=   ordered timeline entries
    GET  /devices/{id}/config              gateway's config mirror
    PUT  /devices/{id}/config              set thresholds (dispatches cmd)
    POST /devices/{id}/command             set_thresholds | pump_override
    GET  /events                           server-sent events, one
                                           timeline entry per message
    GET  /stats                            ingest counters
    GET  /ui                               dashboard static files, when
                                           a UI directory is configured

The SSE stream frames each timeline entry as ``id: <seq>`` plus
``data: <entry json>``; clients reconnect and backfill via the timeline
endpoint. Devices speak the binary frame protocol over a plain TCP
stream: telemetry in, an ack per frame out, command frames pushed down
the same connection.

Endpoints are written as sync handlers, so FastAPI runs them on its
threadpool while ingestion and the event stream share the loop; all
state lives in the GatewayService, which does its own locking.
"""

import asyncio
import json
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import RedirectResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..protocol import (
    ACK_OK,
    ACK_REJECTED,
    AckPayload,
    BadPayload,
    CommandPayload,
    Frame,
    FrameError,
    FrameReassembler,
    MsgType,
    OverrideMode,
    decode_frame,
    encode_frame,
)
from .service import GatewayService
from .store import TimelineEntry


class ThresholdUpdate(BaseModel):
    low_cpct: int
    high_cpct: int


class CommandRequest(BaseModel):
    cmd: str
    low_cpct: int | None = None
    high_cpct: int | None = None
    mode: str | None = None


def _device_summary(service: GatewayService, rec) -> dict:
    return {
        "device_id": rec.device_id,
        "first_seen_ms": rec.first_seen_ms,
        "online": rec.online(service.clock_ms()),
        "last_seq": rec.last_seq,
        "last_telemetry_ts": rec.last_telemetry_ts,
        "config": _config_view(rec),
    }


def _config_view(rec) -> dict:
    return {
        "low_threshold": rec.config.low_threshold,
        "high_threshold": rec.config.high_threshold,
        "sample_interval_s": rec.config.sample_interval_s,
        "override": rec.config.override.name,
    }


def _entry_view(entry: TimelineEntry) -> dict:
    return {"seq": entry.seq, "ts": entry.ts, "kind": entry.kind,
            "device": entry.device, "body": entry.body}


def create_app(
    service: GatewayService,
    ui_dir: str | Path | None = None,
    device_server: "TcpDeviceServer | None" = None,
) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        loop = asyncio.get_running_loop()

        def publish(entry: TimelineEntry) -> None:
            payload = json.dumps(_entry_view(entry), separators=(",", ":"))
            for queue in list(app.state.subscriber_queues):
                loop.call_soon_threadsafe(queue.put_nowait, (entry.seq, payload))

        service.subscribe(publish)
        if device_server is not None:
            await device_server.start()
        try:
            yield
        finally:
            if device_server is not None:
                await device_server.stop()
            service.unsubscribe(publish)

    app = FastAPI(title="swimps gateway", lifespan=lifespan)
    app.state.service = service
    app.state.subscriber_queues = set()

    @app.get("/devices")
    def list_devices() -> list[dict]:
        return [_device_summary(service, rec) for rec in service.devices()]

    @app.get("/devices/{device_id}/latest")
    def latest(device_id: int) -> dict:
        rec = service.get_device(device_id)
        if rec is None or rec.last_telemetry is None:
            raise HTTPException(status_code=404, detail="no telemetry for device")
        t = rec.last_telemetry
        return {
            "device_id": device_id,
            "ts": rec.last_telemetry_ts,
            "seq": rec.last_seq,
            "moisture_cpct": t.moisture_cpct,
            "temp_cdegc": t.temp_cdegc,
            "rh_cpct": t.rh_cpct,
            "battery_mv": t.battery_mv,
            "solar_mv": t.solar_mv,
            "flags": t.flags,
            "pump_on": t.pump_on,
            "charging": t.charging,
            "low_latch": t.low_latch,
        }

    @app.get("/devices/{device_id}/timeline")
    def timeline(device_id: int, since: int = 0, kinds: str | None = None) -> dict:
        kind_filter = [k for k in kinds.split(",") if k] if kinds else None
        entries = service.timeline_query(device_id=device_id, since=since, kinds=kind_filter)
        return {"entries": [_entry_view(e) for e in entries]}

    @app.get("/devices/{device_id}/config")
    def get_config(device_id: int) -> dict:
        rec = service.get_device(device_id)
        if rec is None:
            raise HTTPException(status_code=404, detail="unknown device")
        return _config_view(rec)

    @app.put("/devices/{device_id}/config")
    def put_config(device_id: int, update: ThresholdUpdate) -> dict:
        rec = service.get_device(device_id)
        if rec is None:
            raise HTTPException(status_code=404, detail="unknown device")
        try:
            cmd = CommandPayload.set_thresholds(update.low_cpct, update.high_cpct)
        except BadPayload as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        status = service.dispatch_command(device_id, cmd)
        if status == "rejected":
            raise HTTPException(status_code=422, detail="device rejected thresholds")
        rec = service.get_device(device_id)
        return {"status": status, "config": _config_view(rec)}

    @app.post("/devices/{device_id}/command")
    def post_command(device_id: int, request: CommandRequest) -> dict:
        rec = service.get_device(device_id)
        if rec is None:
            raise HTTPException(status_code=404, detail="unknown device")
        if request.cmd == "set_thresholds":
            if request.low_cpct is None or request.high_cpct is None:
                raise HTTPException(status_code=422, detail="low_cpct and high_cpct required")
            try:
                cmd = CommandPayload.set_thresholds(request.low_cpct, request.high_cpct)
            except BadPayload as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        elif request.cmd == "pump_override":
            if request.mode is None or request.mode not in OverrideMode.__members__:
                raise HTTPException(status_code=422,
                                    detail="mode must be AUTO, FORCE_ON or FORCE_OFF")
            cmd = CommandPayload.pump_override(OverrideMode[request.mode])
        else:
            raise HTTPException(status_code=422, detail=f"unknown command {request.cmd!r}")
        status = service.dispatch_command(device_id, cmd)
        if status == "rejected":
            raise HTTPException(status_code=422, detail="command rejected")
        return {"status": status}

    @app.get("/stats")
    def stats() -> dict:
        return service.stats()

    @app.get("/events")
    async def events(request: Request) -> StreamingResponse:
        queue: asyncio.Queue = asyncio.Queue()
        app.state.subscriber_queues.add(queue)

        async def stream():
            try:
                while True:
                    if await request.is_disconnected():
                        break
                    try:
                        seq, payload = await asyncio.wait_for(queue.get(), timeout=15.0)
                        yield f"id: {seq}\ndata: {payload}\n\n"
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
            finally:
                app.state.subscriber_queues.discard(queue)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

        @app.get("/")
        def index() -> RedirectResponse:
            return RedirectResponse(url="/ui/")

    return app


class TcpDeviceServer:
    """Binary frame endpoint for devices over a local TCP stream.

    Each accepted telemetry frame is answered with an ack frame (ok or
    rejected), which doubles as the scenario runner's per-tick barrier.
    Commands dispatched while a device is connected are written to its
    stream; acks coming back resolve the pending dispatch. On connect,
    commands queued while the device was offline are flushed.
    """

    ACK_TIMEOUT_S = 5.0

    def __init__(self, service: GatewayService, host: str = "127.0.0.1", port: int = 9763):
        self.service = service
        self.host = host
        self.port = port
        self._server: asyncio.AbstractServer | None = None
        self._writers: dict[int, asyncio.StreamWriter] = {}
        self._pending_acks: dict[tuple[int, int], asyncio.Future] = {}
        self._loop: asyncio.AbstractEventLoop | None = None
        service.transport = self

    async def start(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._server = await asyncio.start_server(self._handle, self.host, self.port)

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    # CommandTransport interface; called from worker threads.
    def send_command(self, device_id: int, frame: bytes) -> AckPayload | None:
        if self._loop is None:
            return None
        future = asyncio.run_coroutine_threadsafe(
            self._send_and_wait(device_id, frame), self._loop
        )
        try:
            return future.result(timeout=self.ACK_TIMEOUT_S + 1.0)
        except Exception:
            return None

    async def _send_and_wait(self, device_id: int, frame_bytes: bytes) -> AckPayload | None:
        writer = self._writers.get(device_id)
        if writer is None:
            return None
        key = (device_id, decode_frame(frame_bytes).seq)
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending_acks[key] = fut
        try:
            writer.write(frame_bytes)
            await writer.drain()
            return await asyncio.wait_for(fut, timeout=self.ACK_TIMEOUT_S)
        except (asyncio.TimeoutError, ConnectionError):
            return None
        finally:
            self._pending_acks.pop(key, None)

    async def _flush_pending(self, device_id: int) -> None:
        for cmd in self.service.pending_commands(device_id):
            frame = Frame(msg_type=MsgType.COMMAND, device_id=device_id,
                          seq=self.service.next_command_seq(device_id),
                          timestamp_ms=self.service.clock_ms(), payload=cmd)
            ack = await self._send_and_wait(device_id, encode_frame(frame))
            self.service.confirm_command(device_id, cmd, ok=ack is not None and ack.status == ACK_OK)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        reassembler = FrameReassembler()
        loop = asyncio.get_running_loop()
        bound_device: int | None = None
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                for raw, item in reassembler.feed(data):
                    if isinstance(item, Frame) and item.msg_type == MsgType.ACK:
                        fut = self._pending_acks.get((item.device_id, item.payload.acked_seq))
                        if fut is not None and not fut.done():
                            fut.set_result(item.payload)
                        continue
                    # Telemetry, unexpected types and corrupt spans all go
                    # through ingest so its counters stay authoritative.
                    result = await loop.run_in_executor(
                        None, self.service.ingest_frame, raw, None
                    )
                    if isinstance(item, FrameError):
                        continue
                    if bound_device is None and item.msg_type == MsgType.TELEMETRY:
                        bound_device = item.device_id
                        self._writers[item.device_id] = writer
                        await self._flush_pending(item.device_id)
                    ack = Frame(
                        msg_type=MsgType.ACK, device_id=item.device_id, seq=item.seq,
                        timestamp_ms=self.service.clock_ms(),
                        payload=AckPayload(acked_seq=item.seq,
                                           status=ACK_OK if result.accepted else ACK_REJECTED),
                    )
                    writer.write(encode_frame(ack))
                    await writer.drain()
        except ConnectionError:
            pass
        finally:
            if bound_device is not None and self._writers.get(bound_device) is writer:
                del self._writers[bound_device]
            writer.close()
