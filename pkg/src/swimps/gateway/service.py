"""Gateway core: frame ingestion, device registry, alerts, commands.

The service is transport-agnostic. Telemetry arrives as raw frame bytes
through ``ingest_frame``; commands leave through a pluggable transport
that knows how to reach a device and collect its ack. Every accepted
frame, emitted notification, and dispatched command becomes exactly one
timeline entry, and replaying the log after a restart reconstructs the
same latest-state (ingestion is deterministic given the log).

Concurrency: all mutating paths run under one re-entrant lock, which
serializes ingestion per device, log appends, and registry updates, and
gives API readers a consistent snapshot. Event subscribers are invoked
synchronously in append order and must be cheap (enqueue and return).
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from threading import RLock
from typing import Callable, Iterable, Protocol

from ..device import DeviceConfig
from ..protocol import (
    ACK_OK,
    CMD_PUMP_OVERRIDE,
    CMD_SET_THRESHOLDS,
    AckPayload,
    BadCrc,
    BadMagic,
    BadPayload,
    CommandPayload,
    Frame,
    FrameError,
    MsgType,
    OverrideMode,
    TelemetryPayload,
    Truncated,
    UnknownMsgType,
    UnknownVersion,
    decode_frame,
    encode_frame,
)
from .store import (
    KIND_COMMAND,
    KIND_NOTIFICATION,
    KIND_TELEMETRY,
    RegistryFile,
    TimelineEntry,
    TimelineLog,
)

LOG_FILENAME = "gateway.log"
REGISTRY_FILENAME = "registry.json"

# Liveness window: a device is online while its last frame is younger
# than this many sample intervals.
ONLINE_INTERVALS = 3

_REJECT_REASONS = {
    BadMagic: "bad_magic",
    UnknownVersion: "unknown_version",
    UnknownMsgType: "unknown_msg_type",
    Truncated: "truncated",
    BadCrc: "bad_crc",
    BadPayload: "bad_payload",
}


class NotificationKind(Enum):
    LOW_MOISTURE = "LOW_MOISTURE"


@dataclass(frozen=True)
class NotificationEvent:
    device_id: int
    kind: NotificationKind
    timestamp_ms: int
    moisture_cpct: int


@dataclass(frozen=True)
class AlertConfig:
    """Debounce settings; clear_cpct=None means the device's high threshold."""

    clear_cpct: int | None = None
    cooldown_s: int = 3600

    def __post_init__(self) -> None:
        if self.cooldown_s < 0:
            raise ValueError("cooldown_s must be >= 0")


@dataclass
class AlertState:
    in_alert: bool = False
    last_emit_ms: int | None = None
    prev_latch: bool = False


@dataclass
class DeviceRecord:
    device_id: int
    first_seen_ms: int
    config: DeviceConfig
    last_telemetry: TelemetryPayload | None = None
    last_telemetry_ts: int | None = None
    last_seq: int = 0
    command_seq: int = 0
    alert: AlertState = field(default_factory=AlertState)

    def online(self, now_ms: int) -> bool:
        if self.last_telemetry_ts is None:
            return False
        window_ms = ONLINE_INTERVALS * self.config.sample_interval_s * 1000
        return now_ms - self.last_telemetry_ts <= window_ms


@dataclass(frozen=True)
class IngestResult:
    entry: TimelineEntry | None
    reason: str | None
    notifications: tuple[TimelineEntry, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.entry is not None


def evaluate_alerts(
    rec: DeviceRecord, t: TelemetryPayload, cfg: AlertConfig, now_ms: int
) -> list[NotificationEvent]:
    """Debounced low-moisture alerting for one telemetry sample.

    Fires on a 0->1 transition of the device's low latch, or on a sample
    below the device's low threshold after a recovery. While the
    condition persists nothing re-fires until moisture reaches the clear
    level or the cooldown elapses. Mutates rec.alert.
    """
    clear_cpct = cfg.clear_cpct if cfg.clear_cpct is not None else rec.config.high_threshold
    if clear_cpct <= rec.config.low_threshold:
        raise ValueError("clear_cpct must be above the device low threshold")
    state = rec.alert
    events: list[NotificationEvent] = []

    if t.moisture_cpct >= clear_cpct:
        state.in_alert = False
    latch_rose = t.low_latch and not state.prev_latch
    below = t.moisture_cpct < rec.config.low_threshold
    if latch_rose or below:
        cooled = (
            state.last_emit_ms is None
            or now_ms - state.last_emit_ms >= cfg.cooldown_s * 1000
        )
        if not state.in_alert or cooled:
            events.append(
                NotificationEvent(
                    device_id=rec.device_id,
                    kind=NotificationKind.LOW_MOISTURE,
                    timestamp_ms=now_ms,
                    moisture_cpct=t.moisture_cpct,
                )
            )
            state.last_emit_ms = now_ms
        state.in_alert = True
    state.prev_latch = t.low_latch
    return events


class CommandTransport(Protocol):
    """How the gateway reaches a device. Returns the device's ack, or
    None when the device cannot be reached."""

    def send_command(self, device_id: int, frame: bytes) -> AckPayload | None: ...


class GatewayService:
    """Ingestion and control plane for one deployment directory."""

    def __init__(
        self,
        data_dir: str | Path,
        *,
        fsync: bool = True,
        alert_config: AlertConfig | None = None,
        transport: CommandTransport | None = None,
        queue_offline_commands: bool = True,
        clock_ms: Callable[[], int] | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.alert_config = alert_config or AlertConfig()
        self.transport = transport
        self.queue_offline_commands = queue_offline_commands
        self.clock_ms = clock_ms or (lambda: int(time.time() * 1000))
        self._lock = RLock()
        self._records: dict[int, DeviceRecord] = {}
        self._pending_commands: dict[int, list[CommandPayload]] = {}
        self._subscribers: list[Callable[[TimelineEntry], None]] = []
        self.counters: dict[str, int] = {"accepted": 0}
        for reason in list(_REJECT_REASONS.values()) + ["duplicate", "unexpected_type"]:
            self.counters[reason] = 0

        self.log = TimelineLog(self.data_dir / LOG_FILENAME, fsync=fsync)
        self._registry = RegistryFile(self.data_dir / REGISTRY_FILENAME)
        self._restore()

    # -- registration -----------------------------------------------------

    def register_device(self, config: DeviceConfig, first_seen_ms: int | None = None) -> DeviceRecord:
        """Provision a device explicitly (the simulator does; field
        devices are auto-registered on first frame)."""
        with self._lock:
            rec = self._records.get(config.device_id)
            if rec is None:
                rec = DeviceRecord(
                    device_id=config.device_id,
                    first_seen_ms=first_seen_ms if first_seen_ms is not None else self.clock_ms(),
                    config=config,
                )
                self._records[config.device_id] = rec
            else:
                rec.config = config
            self._persist_record(rec)
            return rec

    def _auto_register(self, device_id: int, now_ms: int) -> DeviceRecord:
        rec = DeviceRecord(
            device_id=device_id,
            first_seen_ms=now_ms,
            config=DeviceConfig(device_id=device_id),
        )
        self._records[device_id] = rec
        self._persist_record(rec)
        return rec

    def _persist_record(self, rec: DeviceRecord) -> None:
        self._registry.put(rec.device_id, {
            "first_seen_ms": rec.first_seen_ms,
            "config": {
                "low_threshold": rec.config.low_threshold,
                "high_threshold": rec.config.high_threshold,
                "sample_interval_s": rec.config.sample_interval_s,
                "override": rec.config.override.name,
            },
        })

    def _restore(self) -> None:
        """Rebuild in-memory state: registry file first, then a replay
        of the timeline log. Replay runs the same deterministic alert
        logic as live ingestion, so the reconstructed state is
        identical to what the process held before it stopped."""
        for device_id, stored in self._registry.items():
            cfg = stored.get("config", {})
            self._records[device_id] = DeviceRecord(
                device_id=device_id,
                first_seen_ms=stored.get("first_seen_ms", 0),
                config=DeviceConfig(
                    device_id=device_id,
                    low_threshold=cfg.get("low_threshold", 3000),
                    high_threshold=cfg.get("high_threshold", 3500),
                    sample_interval_s=cfg.get("sample_interval_s", 60),
                    override=OverrideMode[cfg.get("override", "AUTO")],
                ),
            )
        for entry in self.log:
            rec = self._records.get(entry.device)
            if rec is None:
                rec = self._auto_register(entry.device, entry.ts)
            if entry.kind == KIND_TELEMETRY:
                payload = _telemetry_from_body(entry.body)
                rec.last_seq = entry.body["seq"]
                rec.last_telemetry = payload
                rec.last_telemetry_ts = entry.ts
                evaluate_alerts(rec, payload, self.alert_config, entry.ts)
            elif entry.kind == KIND_NOTIFICATION:
                rec.alert.in_alert = True
                rec.alert.last_emit_ms = entry.ts
            elif entry.kind == KIND_COMMAND and entry.body.get("status") == "ok":
                self._apply_config_mirror(rec, entry.body)

    @staticmethod
    def _apply_config_mirror(rec: DeviceRecord, body: dict) -> None:
        if body.get("cmd") == CMD_SET_THRESHOLDS:
            rec.config.low_threshold = body["low_cpct"]
            rec.config.high_threshold = body["high_cpct"]
        elif body.get("cmd") == CMD_PUMP_OVERRIDE:
            rec.config.override = OverrideMode(body["mode"])

    # -- event stream ------------------------------------------------------

    def subscribe(self, callback: Callable[[TimelineEntry], None]) -> None:
        with self._lock:
            self._subscribers.append(callback)

    def unsubscribe(self, callback: Callable[[TimelineEntry], None]) -> None:
        with self._lock:
            if callback in self._subscribers:
                self._subscribers.remove(callback)

    def _publish(self, entry: TimelineEntry) -> None:
        for callback in self._subscribers:
            callback(entry)

    # -- ingestion ---------------------------------------------------------

    def ingest_frame(self, data: bytes, arrival_ms: int | None = None) -> IngestResult:
        """Decode, validate, persist and alert on one telemetry frame.

        Rejections increment a per-reason counter and persist nothing.
        Duplicate or stale sequence numbers are dropped, not reordered.
        """
        now_ms = arrival_ms if arrival_ms is not None else self.clock_ms()
        with self._lock:
            try:
                frame = decode_frame(data)
            except FrameError as exc:
                reason = _REJECT_REASONS.get(type(exc), "bad_payload")
                self.counters[reason] += 1
                return IngestResult(entry=None, reason=reason)
            if frame.msg_type != MsgType.TELEMETRY:
                self.counters["unexpected_type"] += 1
                return IngestResult(entry=None, reason="unexpected_type")

            rec = self._records.get(frame.device_id)
            if rec is None:
                rec = self._auto_register(frame.device_id, now_ms)
            if frame.seq <= rec.last_seq:
                self.counters["duplicate"] += 1
                return IngestResult(entry=None, reason="duplicate")

            t: TelemetryPayload = frame.payload
            entry = self.log.append(
                ts=now_ms, kind=KIND_TELEMETRY, device=frame.device_id,
                body=_telemetry_body(frame, t),
            )
            rec.last_seq = frame.seq
            rec.last_telemetry = t
            rec.last_telemetry_ts = now_ms
            self.counters["accepted"] += 1

            notifications = []
            for event in evaluate_alerts(rec, t, self.alert_config, now_ms):
                notifications.append(self.log.append(
                    ts=event.timestamp_ms, kind=KIND_NOTIFICATION, device=event.device_id,
                    body={"kind": event.kind.value, "moisture_cpct": event.moisture_cpct},
                ))
            self._publish(entry)
            for n in notifications:
                self._publish(n)
            return IngestResult(entry=entry, reason=None, notifications=tuple(notifications))

    # -- queries -----------------------------------------------------------

    def devices(self) -> list[DeviceRecord]:
        with self._lock:
            return list(self._records.values())

    def get_device(self, device_id: int) -> DeviceRecord | None:
        with self._lock:
            return self._records.get(device_id)

    def timeline_query(
        self,
        device_id: int | None = None,
        since: int = 0,
        kinds: Iterable[str] | None = None,
    ) -> list[TimelineEntry]:
        with self._lock:
            return self.log.query(device=device_id, since=since, kinds=kinds)

    def stats(self) -> dict:
        with self._lock:
            return {"counters": dict(self.counters), "timeline_entries": len(self.log)}

    # -- commands ----------------------------------------------------------

    def dispatch_command(self, device_id: int, cmd: CommandPayload) -> str:
        """Send a command to a device and log the outcome.

        Returns "ok", "rejected" (invalid payload or device refused),
        "queued" (device unreachable, held for redelivery) or "failed".
        Invalid payloads never leave the gateway.
        """
        with self._lock:
            rec = self._records.get(device_id)
            if rec is None:
                raise KeyError(f"unknown device {device_id}")
            try:
                cmd.validate()
            except BadPayload:
                return "rejected"

            now_ms = self.clock_ms()
            ack = None
            if self.transport is not None:
                rec.command_seq += 1
                frame = Frame(
                    msg_type=MsgType.COMMAND,
                    device_id=device_id,
                    seq=rec.command_seq,
                    timestamp_ms=now_ms,
                    payload=cmd,
                )
                ack = self.transport.send_command(device_id, encode_frame(frame))

            if ack is None:
                if self.transport is not None and self.queue_offline_commands:
                    self._pending_commands.setdefault(device_id, []).append(cmd)
                    status = "queued"
                else:
                    status = "failed"
            elif ack.status == ACK_OK:
                status = "ok"
                self._apply_config_mirror(rec, _command_body(cmd, status))
                self._persist_record(rec)
            else:
                status = "rejected"

            entry = self.log.append(
                ts=now_ms, kind=KIND_COMMAND, device=device_id,
                body=_command_body(cmd, status),
            )
            self._publish(entry)
            return status

    def pending_commands(self, device_id: int) -> list[CommandPayload]:
        """Drain commands queued while the device was unreachable."""
        with self._lock:
            return self._pending_commands.pop(device_id, [])

    def confirm_command(self, device_id: int, cmd: CommandPayload, ok: bool) -> None:
        """Record the outcome of a redelivered queued command."""
        with self._lock:
            rec = self._records.get(device_id)
            if rec is not None and ok:
                self._apply_config_mirror(rec, _command_body(cmd, "ok"))
                self._persist_record(rec)

    def next_command_seq(self, device_id: int) -> int:
        with self._lock:
            rec = self._records[device_id]
            rec.command_seq += 1
            return rec.command_seq

    def close(self) -> None:
        self.log.close()


def _telemetry_body(frame: Frame, t: TelemetryPayload) -> dict:
    return {
        "seq": frame.seq,
        "moisture_cpct": t.moisture_cpct,
        "temp_cdegc": t.temp_cdegc,
        "rh_cpct": t.rh_cpct,
        "battery_mv": t.battery_mv,
        "solar_mv": t.solar_mv,
        "flags": t.flags,
    }


def _telemetry_from_body(body: dict) -> TelemetryPayload:
    return TelemetryPayload(
        moisture_cpct=body["moisture_cpct"],
        temp_cdegc=body["temp_cdegc"],
        rh_cpct=body["rh_cpct"],
        battery_mv=body["battery_mv"],
        solar_mv=body["solar_mv"],
        flags=body["flags"],
    )


def _command_body(cmd: CommandPayload, status: str) -> dict:
    if cmd.cmd == CMD_SET_THRESHOLDS:
        return {"cmd": cmd.cmd, "low_cpct": cmd.low_cpct, "high_cpct": cmd.high_cpct,
                "status": status}
    return {"cmd": cmd.cmd, "mode": cmd.mode, "status": status}
