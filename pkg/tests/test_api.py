import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from swimps.device import DeviceConfig
from swimps.gateway.api import TcpDeviceServer, create_app
from swimps.gateway.service import GatewayService
from swimps.protocol import (
    ACK_OK,
    ACK_REJECTED,
    AckPayload,
    Frame,
    MsgType,
    TelemetryPayload,
    decode_frame,
    encode_frame,
)
from swimps.scenario import DeviceLink


def telemetry_frame(device_id=1, seq=1, moisture=4000, ts=1000, flags=0):
    payload = TelemetryPayload(moisture_cpct=moisture, temp_cdegc=2800,
                               rh_cpct=6500, battery_mv=3700, solar_mv=0,
                               flags=flags)
    return encode_frame(Frame(msg_type=MsgType.TELEMETRY, device_id=device_id,
                              seq=seq, timestamp_ms=ts, payload=payload))


class EchoTransport:
    """Device stand-in that accepts every command."""

    def __init__(self):
        self.commands = []

    def send_command(self, device_id, frame):
        decoded = decode_frame(frame)
        self.commands.append((device_id, decoded.payload))
        return AckPayload(acked_seq=decoded.seq, status=ACK_OK)


@pytest.fixture
def client(tmp_path):
    service = GatewayService(tmp_path, fsync=False, transport=EchoTransport())
    service.register_device(DeviceConfig(device_id=1))
    app = create_app(service)
    with TestClient(app) as test_client:
        test_client.service = service
        yield test_client
    service.close()


class TestEndpoints:
    def test_devices_listing(self, client):
        body = client.get("/devices").json()
        assert len(body) == 1
        assert body[0]["device_id"] == 1
        assert body[0]["online"] is False
        assert body[0]["config"]["low_threshold"] == 3000

    def test_latest_404_before_first_frame(self, client):
        assert client.get("/devices/1/latest").status_code == 404
        assert client.get("/devices/99/latest").status_code == 404

    def test_latest_after_ingest(self, client):
        client.service.ingest_frame(telemetry_frame(moisture=4321, flags=0b101), 1000)
        body = client.get("/devices/1/latest").json()
        assert body["moisture_cpct"] == 4321
        assert body["pump_on"] is True
        assert body["charging"] is False
        assert body["low_latch"] is True
        assert body["seq"] == 1

    def test_timeline_since_and_kinds(self, client):
        for seq in range(1, 4):
            client.service.ingest_frame(telemetry_frame(seq=seq, ts=seq * 1000), seq * 1000)
        entries = client.get("/devices/1/timeline", params={"since": 0}).json()["entries"]
        assert [e["seq"] for e in entries] == [1, 2, 3]
        entries = client.get("/devices/1/timeline", params={"since": 2}).json()["entries"]
        assert [e["seq"] for e in entries] == [3]
        entries = client.get("/devices/1/timeline",
                             params={"kinds": "notification"}).json()["entries"]
        assert entries == []

    def test_get_config(self, client):
        body = client.get("/devices/1/config").json()
        assert body == {"low_threshold": 3000, "high_threshold": 3500,
                        "sample_interval_s": 60, "override": "AUTO"}

    def test_put_config_valid(self, client):
        response = client.put("/devices/1/config",
                              json={"low_cpct": 2500, "high_cpct": 3200})
        assert response.status_code == 200
        assert response.json()["config"]["low_threshold"] == 2500

    def test_put_config_inverted_422(self, client):
        response = client.put("/devices/1/config",
                              json={"low_cpct": 3500, "high_cpct": 3000})
        assert response.status_code == 422

    def test_post_command_override(self, client):
        response = client.post("/devices/1/command",
                               json={"cmd": "pump_override", "mode": "FORCE_ON"})
        assert response.status_code == 200
        assert response.json()["status"] == "ok"
        assert client.get("/devices/1/config").json()["override"] == "FORCE_ON"

    def test_post_command_bad_mode_422(self, client):
        response = client.post("/devices/1/command",
                               json={"cmd": "pump_override", "mode": "UP"})
        assert response.status_code == 422

    def test_post_command_bad_thresholds_422(self, client):
        response = client.post("/devices/1/command",
                               json={"cmd": "set_thresholds",
                                     "low_cpct": 4000, "high_cpct": 3000})
        assert response.status_code == 422

    def test_post_command_unknown_device_404(self, client):
        response = client.post("/devices/99/command",
                               json={"cmd": "pump_override", "mode": "AUTO"})
        assert response.status_code == 404

    def test_stats_counters(self, client):
        client.service.ingest_frame(b"garbage", 0)
        body = client.get("/stats").json()
        assert body["counters"]["truncated"] == 1


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveServer:
    def __init__(self, tmp_path):
        self.http_port = free_port()
        self.device_port = free_port()
        self.service = GatewayService(tmp_path, fsync=False)
        self.service.register_device(DeviceConfig(device_id=1))
        self.device_server = TcpDeviceServer(self.service, port=self.device_port)
        app = create_app(self.service, device_server=self.device_server)
        config = uvicorn.Config(app, host="127.0.0.1", port=self.http_port,
                                log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)
        self.service.close()

    @property
    def http(self) -> str:
        return f"http://127.0.0.1:{self.http_port}"


@pytest.fixture
def live(tmp_path):
    with LiveServer(tmp_path) as server:
        yield server


class TestLoopbackTransport:
    def test_telemetry_acked_and_ingested(self, live):
        link = DeviceLink(f"127.0.0.1:{live.device_port}")
        try:
            ack = link.send_telemetry(telemetry_frame(seq=1))
            assert ack.status == ACK_OK
            dup = link.send_telemetry(telemetry_frame(seq=1))
            assert dup.status == ACK_REJECTED
            latest = httpx.get(f"{live.http}/devices/1/latest").json()
            assert latest["seq"] == 1
        finally:
            link.close()

    def test_command_acked_by_device_thread(self, live):
        link = DeviceLink(f"127.0.0.1:{live.device_port}")
        stop = threading.Event()

        def device_loop():
            from swimps.device import DeviceConfig as Cfg, apply_command

            cfg = Cfg(device_id=1)
            while not stop.is_set():
                for frame in link.poll_commands():
                    status = apply_command(cfg, frame.payload)
                    link.send_ack(frame.device_id, frame.seq, status, 0)
                time.sleep(0.01)

        worker = threading.Thread(target=device_loop, daemon=True)
        try:
            link.send_telemetry(telemetry_frame(seq=1))
            worker.start()
            response = httpx.post(
                f"{live.http}/devices/1/command",
                json={"cmd": "pump_override", "mode": "FORCE_ON"},
                timeout=10.0,
            )
            assert response.status_code == 200
            assert response.json()["status"] == "ok"
            config = httpx.get(f"{live.http}/devices/1/config").json()
            assert config["override"] == "FORCE_ON"
        finally:
            stop.set()
            worker.join(timeout=5)
            link.close()

    def test_event_stream_pushes_new_entries(self, live):
        received = []
        ready = threading.Event()

        def listen():
            with httpx.stream("GET", f"{live.http}/events", timeout=10.0) as response:
                ready.set()
                for line in response.iter_lines():
                    if line.startswith("data: "):
                        received.append(json.loads(line[len("data: "):]))
                        return

        listener = threading.Thread(target=listen, daemon=True)
        listener.start()
        assert ready.wait(timeout=5)
        time.sleep(0.2)  # let the subscriber queue attach
        live.service.ingest_frame(telemetry_frame(seq=1, moisture=2345), 1000)
        listener.join(timeout=5)
        assert len(received) == 1
        assert received[0]["kind"] == "telemetry"
        assert received[0]["body"]["moisture_cpct"] == 2345
