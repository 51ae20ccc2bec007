"""Closed-loop scenario runner.

Wires the environment, device simulators and the gateway into one
deterministic discrete-time simulation and emits run metrics. The
per-tick component order is frozen (determinism needs one order, any
order would do): weather, soil, sensor sample, control, power, telemetry
encode, gateway ingest (which runs alerting). The soil step uses the
pump state that was in effect entering the tick; pump duty cycle and
water applied are accounted at the same point.

Scenario files are JSON; every field is optional and falls back to the
documented defaults below, so ``{}`` is a valid scenario. The single
top-level ``seed`` drives the weather noise and every sensor noise
stream.
"""

import json
import math
import socket
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import env as env_model
from .device import (
    DeviceConfig,
    DeviceState,
    PowerState,
    apply_command,
    control_step,
    make_telemetry,
    power_step,
    sample_sensors,
)
from .env import DAY_S, EnvParams, SoilState
from .gateway.service import AlertConfig, GatewayService
from .gateway.store import KIND_NOTIFICATION
from .protocol import (
    ACK_OK,
    AckPayload,
    CommandPayload,
    Frame,
    FrameReassembler,
    MsgType,
    OverrideMode,
    decode_frame,
    encode_frame,
)

METRICS_FILENAME = "metrics.json"


class ScenarioError(ValueError):
    """Scenario file failed to parse or violated an invariant."""


@dataclass(frozen=True)
class PowerParams:
    capacity_mah: float = 2000.0
    idle_ma: float = 80.0
    pump_ma: float = 500.0
    solar_limit_ma: float = 1000.0
    solar_peak_ma: float = 600.0
    solar_peak_mv: int = 12000


@dataclass
class ScenarioConfig:
    duration_s: int = 7 * 86400
    time_step_s: int = 60
    seed: int = 42
    start_time_ms: int = 0
    initial_moisture_pct: float = 45.0
    initial_soc: float = 0.8
    sensor_noise_cpct: float = 25.0
    env: EnvParams = field(default_factory=EnvParams)
    devices: list[DeviceConfig] = field(default_factory=lambda: [DeviceConfig(device_id=1)])
    alerts: AlertConfig = field(default_factory=AlertConfig)
    power: PowerParams = field(default_factory=PowerParams)
    transport: str = "in-process"
    gateway_addr: str = "127.0.0.1:9763"
    fsync: bool = False

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be > 0")
        if self.time_step_s <= 0:
            raise ScenarioError("time_step_s must be > 0")
        if not self.devices:
            raise ScenarioError("at least one device is required")
        if not 0.0 <= self.initial_moisture_pct <= 100.0:
            raise ScenarioError("initial_moisture_pct outside [0, 100]")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ScenarioError("initial_soc outside [0, 1]")
        if self.transport not in ("in-process", "socket"):
            raise ScenarioError(f"unknown transport {self.transport!r}")


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file, filling documented defaults.

    Errors name the offending file and field; JSON syntax errors keep
    the parser's line/column reference.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(raw, source=str(path))


def scenario_from_dict(raw: dict, source: str = "<scenario>") -> ScenarioConfig:
    def build(what: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{source}: {what}: {exc}") from exc

    known = {
        "duration_s", "time_step_s", "seed", "start_time_ms",
        "initial_moisture_pct", "initial_soc", "sensor_noise_cpct",
        "env", "devices", "alerts", "power", "transport", "gateway_addr",
        "fsync",
    }
    for key in raw:
        if key not in known:
            raise ScenarioError(f"{source}: unknown field {key!r}")

    seed = raw.get("seed", 42)
    env_raw = dict(raw.get("env", {}))
    env_raw.pop("seed", None)  # the scenario seed is the only seed
    env_params = build("env", EnvParams, seed=seed, **env_raw)

    devices = []
    for i, dev_raw in enumerate(raw.get("devices", [{"device_id": 1}])):
        dev = dict(dev_raw)
        if "override" in dev:
            try:
                dev["override"] = OverrideMode[dev["override"]]
            except KeyError:
                raise ScenarioError(
                    f"{source}: devices[{i}].override must be one of AUTO, FORCE_ON, FORCE_OFF"
                ) from None
        devices.append(build(f"devices[{i}]", DeviceConfig, **dev))
    if len({d.device_id for d in devices}) != len(devices):
        raise ScenarioError(f"{source}: duplicate device_id in devices")

    alerts = build("alerts", AlertConfig, **raw.get("alerts", {}))
    power = build("power", PowerParams, **raw.get("power", {}))

    return build("scenario", ScenarioConfig,
                 duration_s=raw.get("duration_s", 7 * 86400),
                 time_step_s=raw.get("time_step_s", 60),
                 seed=seed,
                 start_time_ms=raw.get("start_time_ms", 0),
                 initial_moisture_pct=raw.get("initial_moisture_pct", 45.0),
                 initial_soc=raw.get("initial_soc", 0.8),
                 sensor_noise_cpct=raw.get("sensor_noise_cpct", 25.0),
                 env=env_params,
                 devices=devices,
                 alerts=alerts,
                 power=power,
                 transport=raw.get("transport", "in-process"),
                 gateway_addr=raw.get("gateway_addr", "127.0.0.1:9763"),
                 fsync=raw.get("fsync", False))


def solar_at(t: float, power: PowerParams) -> tuple[float, int]:
    """Solar input (mA, mV) at ``t`` seconds: a half-sine day, phase
    locked to the temperature peak, dark the second half of the day."""
    frac = max(0.0, math.sin(2.0 * math.pi * t / DAY_S))
    return power.solar_peak_ma * frac, round(power.solar_peak_mv * frac)


@dataclass
class Metrics:
    pump_duty_cycle: float
    water_applied: float
    min_moisture: float
    max_moisture: float
    mean_moisture: float
    notification_count: int
    final_soc: float
    frames_sent: int
    frames_accepted: int
    frames_rejected: int

    def to_dict(self) -> dict:
        return {
            "pump_duty_cycle": round(self.pump_duty_cycle, 6),
            "water_applied": round(self.water_applied, 6),
            "min_moisture": round(self.min_moisture, 6),
            "max_moisture": round(self.max_moisture, 6),
            "mean_moisture": round(self.mean_moisture, 6),
            "notification_count": self.notification_count,
            "final_soc": round(self.final_soc, 6),
            "frames_sent": self.frames_sent,
            "frames_accepted": self.frames_accepted,
            "frames_rejected": self.frames_rejected,
        }


def emit_metrics(metrics: Metrics, out_dir: str | Path) -> Path:
    """Write metrics.json with a fixed key order (byte-stable output)."""
    out_path = Path(out_dir) / METRICS_FILENAME
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, separators=(",", ":"))
        fh.write("\n")
    return out_path


@dataclass
class SimDevice:
    """One simulated unit: its config, firmware state, and soil bucket."""

    config: DeviceConfig
    state: DeviceState
    soil: SoilState
    events: int = 0  # device-local LOW_MOISTURE count


class InProcessTransport:
    """Command delivery straight into the simulated devices."""

    def __init__(self, devices: dict[int, SimDevice]):
        self._devices = devices

    def send_command(self, device_id: int, frame: bytes) -> AckPayload | None:
        dev = self._devices.get(device_id)
        if dev is None:
            return None
        decoded = decode_frame(frame)
        status = apply_command(dev.config, decoded.payload)
        return AckPayload(acked_seq=decoded.seq, status=status)


class DeviceLink:
    """Socket-mode uplink: stream frames to a serving gateway, wait for
    its per-frame ack (the tick barrier), and field incoming commands."""

    def __init__(self, addr: str):
        host, _, port = addr.rpartition(":")
        self._sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=10.0)
        self._reassembler = FrameReassembler()
        self._acks: list[Frame] = []
        self._commands: list[Frame] = []

    def _pump(self, block: bool) -> None:
        self._sock.settimeout(10.0 if block else 0.0)
        try:
            data = self._sock.recv(4096)
        except (BlockingIOError, socket.timeout):
            return
        if not data:
            raise ConnectionError("gateway closed the device link")
        for _, item in self._reassembler.feed(data):
            if isinstance(item, Frame):
                if item.msg_type == MsgType.ACK:
                    self._acks.append(item)
                elif item.msg_type == MsgType.COMMAND:
                    self._commands.append(item)

    def send_telemetry(self, frame_bytes: bytes) -> AckPayload:
        self._sock.sendall(frame_bytes)
        while not self._acks:
            self._pump(block=True)
        return self._acks.pop(0).payload

    def poll_commands(self) -> list[Frame]:
        self._pump(block=False)
        out, self._commands = self._commands, []
        return out

    def send_ack(self, device_id: int, acked_seq: int, status: int, ts_ms: int) -> None:
        frame = Frame(msg_type=MsgType.ACK, device_id=device_id, seq=acked_seq,
                      timestamp_ms=ts_ms, payload=AckPayload(acked_seq=acked_seq, status=status))
        self._sock.sendall(encode_frame(frame))

    def close(self) -> None:
        self._sock.close()


class ScenarioRun:
    """A stepped simulation; tests drive ticks one at a time, the CLI
    runs them all. Owns the embedded gateway in in-process mode."""

    def __init__(self, cfg: ScenarioConfig, out_dir: str | Path, realtime: bool = False,
                 speed: float = 60.0):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.realtime = realtime
        self.speed = speed
        self.now_ms = cfg.start_time_ms
        self.tick = 0
        self.total_ticks = cfg.duration_s // cfg.time_step_s

        self.devices: dict[int, SimDevice] = {}
        for dev_cfg in cfg.devices:
            self.devices[dev_cfg.device_id] = SimDevice(
                config=replace_config(dev_cfg),
                state=DeviceState(power=PowerState(soc=cfg.initial_soc,
                                                   capacity_mah=cfg.power.capacity_mah)),
                soil=SoilState(moisture=cfg.initial_moisture_pct),
            )

        self.gateway: GatewayService | None = None
        self.link: DeviceLink | None = None
        if cfg.transport == "in-process":
            self.gateway = GatewayService(
                self.out_dir,
                fsync=cfg.fsync,
                alert_config=cfg.alerts,
                transport=InProcessTransport(self.devices),
                clock_ms=lambda: self.now_ms,
            )
            for dev in self.devices.values():
                self.gateway.register_device(dev.config, first_seen_ms=cfg.start_time_ms)
        else:
            self.link = DeviceLink(cfg.gateway_addr)

        # accumulators
        self.frames_sent = 0
        self.frames_accepted = 0
        self.frames_rejected = 0
        self.pump_on_ticks = 0
        self.device_ticks = 0
        self.water_applied = 0.0
        self._moisture_min = math.inf
        self._moisture_max = -math.inf
        self._moisture_sum = 0.0
        self._moisture_n = 0

    def step(self) -> None:
        """Advance one tick of ``time_step_s`` simulated seconds."""
        cfg = self.cfg
        t = self.tick * cfg.time_step_s
        self.now_ms = cfg.start_time_ms + t * 1000
        dt_min = cfg.time_step_s / 60.0
        weather = env_model.weather_at(t, cfg.env)
        rate = env_model.et_rate(weather, cfg.env)
        solar_ma, solar_mv = solar_at(t, cfg.power)

        if self.link is not None:
            self._deliver_link_commands()

        for dev in self.devices.values():
            pump_entering = dev.state.pump_on
            dev.soil = env_model.step_soil(dev.soil, rate, pump_entering, dt_min, cfg.env)
            self.device_ticks += 1
            if pump_entering:
                self.pump_on_ticks += 1
                self.water_applied += cfg.env.irr_rate * dt_min
            self._moisture_min = min(self._moisture_min, dev.soil.moisture)
            self._moisture_max = max(self._moisture_max, dev.soil.moisture)
            self._moisture_sum += dev.soil.moisture
            self._moisture_n += 1

            if t % dev.config.sample_interval_s == 0:
                reading = sample_sensors(
                    dev.soil, weather, self.now_ms,
                    noise_sigma_cpct=cfg.sensor_noise_cpct,
                    seed=cfg.seed, device_id=dev.config.device_id,
                )
                dev.state, events = control_step(dev.state, reading, dev.config)
                dev.events += len(events)
                dev.state.power = power_step(
                    dev.state.power, dev.state.pump_on, solar_ma, cfg.time_step_s,
                    idle_ma=cfg.power.idle_ma, pump_ma=cfg.power.pump_ma,
                    solar_limit_ma=cfg.power.solar_limit_ma,
                )
                payload = make_telemetry(dev.state, reading, solar_mv)
                frame = Frame(
                    msg_type=MsgType.TELEMETRY, device_id=dev.config.device_id,
                    seq=dev.state.seq, timestamp_ms=self.now_ms, payload=payload,
                )
                data = encode_frame(frame)
                self.frames_sent += 1
                if self.gateway is not None:
                    result = self.gateway.ingest_frame(data, arrival_ms=self.now_ms)
                    if result.accepted:
                        self.frames_accepted += 1
                    else:
                        self.frames_rejected += 1
                else:
                    ack = self.link.send_telemetry(data)
                    if ack.status == ACK_OK:
                        self.frames_accepted += 1
                    else:
                        self.frames_rejected += 1

        self.tick += 1
        if self.realtime and self.tick < self.total_ticks:
            time.sleep(cfg.time_step_s / self.speed)

    def _deliver_link_commands(self) -> None:
        for frame in self.link.poll_commands():
            dev = self.devices.get(frame.device_id)
            if dev is None:
                status = 1
            else:
                status = apply_command(dev.config, frame.payload)
            self.link.send_ack(frame.device_id, frame.seq, status, self.now_ms)

    def run(self) -> Metrics:
        while self.tick < self.total_ticks:
            self.step()
        return self.finalize()

    def finalize(self) -> Metrics:
        if self.gateway is not None:
            notifications = len(self.gateway.timeline_query(kinds=[KIND_NOTIFICATION]))
        else:
            # No gateway on this side: fall back to device-local events.
            notifications = sum(dev.events for dev in self.devices.values())
        socs = [dev.state.power.soc for dev in self.devices.values()]
        metrics = Metrics(
            pump_duty_cycle=self.pump_on_ticks / self.device_ticks if self.device_ticks else 0.0,
            water_applied=self.water_applied,
            min_moisture=self._moisture_min if self._moisture_n else 0.0,
            max_moisture=self._moisture_max if self._moisture_n else 0.0,
            mean_moisture=self._moisture_sum / self._moisture_n if self._moisture_n else 0.0,
            notification_count=notifications,
            final_soc=sum(socs) / len(socs),
            frames_sent=self.frames_sent,
            frames_accepted=self.frames_accepted,
            frames_rejected=self.frames_rejected,
        )
        emit_metrics(metrics, self.out_dir)
        self.close()
        return metrics

    def close(self) -> None:
        if self.gateway is not None:
            self.gateway.close()
        if self.link is not None:
            self.link.close()


def replace_config(cfg: DeviceConfig) -> DeviceConfig:
    """Fresh copy so a run never mutates the loaded scenario."""
    return DeviceConfig(
        device_id=cfg.device_id,
        low_threshold=cfg.low_threshold,
        high_threshold=cfg.high_threshold,
        sample_interval_s=cfg.sample_interval_s,
        override=cfg.override,
    )


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path, realtime: bool = False,
                 speed: float = 60.0) -> Metrics:
    """Run a whole scenario and write metrics.json and gateway.log."""
    return ScenarioRun(cfg, out_dir, realtime=realtime, speed=speed).run()
