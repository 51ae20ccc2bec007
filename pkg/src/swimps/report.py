"""Render run reports: a delimited trace plus matplotlib figures.

Consumes the artifacts a scenario run leaves behind (gateway.log and
metrics.json) and writes, per device, nothing the simulation did not
already record: trace.csv with one row per telemetry entry, and PNG
figures for moisture against the control thresholds, the power budget,
and pump activity with notification markers.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .gateway.store import (
    KIND_COMMAND,
    KIND_NOTIFICATION,
    KIND_TELEMETRY,
    TimelineEntry,
)

TRACE_COLUMNS = [
    "ts_ms", "device", "seq", "moisture_pct", "temp_c", "rh_pct",
    "battery_mv", "solar_mv", "pump_on", "charging", "low_latch",
]


def read_log(path: str | Path) -> list[TimelineEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(TimelineEntry.from_json(line))
    return entries


def write_trace_csv(entries: list[TimelineEntry], path: str | Path) -> int:
    """Flatten telemetry entries into one CSV row each; returns row count."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for entry in entries:
            if entry.kind != KIND_TELEMETRY:
                continue
            body = entry.body
            flags = body["flags"]
            writer.writerow([
                entry.ts, entry.device, body["seq"],
                body["moisture_cpct"] / 100.0,
                body["temp_cdegc"] / 100.0,
                body["rh_cpct"] / 100.0,
                body["battery_mv"], body["solar_mv"],
                int(bool(flags & 1)), int(bool(flags & 2)), int(bool(flags & 4)),
            ])
            rows += 1
    return rows


def _device_series(entries: list[TimelineEntry], device: int):
    hours, moisture, battery, solar, pump = [], [], [], [], []
    notif_hours, notif_moisture = [], []
    t0 = None
    for entry in entries:
        if entry.device != device:
            continue
        if t0 is None:
            t0 = entry.ts
        h = (entry.ts - t0) / 3.6e6
        if entry.kind == KIND_TELEMETRY:
            hours.append(h)
            moisture.append(entry.body["moisture_cpct"] / 100.0)
            battery.append(entry.body["battery_mv"] / 1000.0)
            solar.append(entry.body["solar_mv"] / 1000.0)
            pump.append(int(bool(entry.body["flags"] & 1)))
        elif entry.kind == KIND_NOTIFICATION:
            notif_hours.append(h)
            notif_moisture.append(entry.body.get("moisture_cpct", 0) / 100.0)
    return hours, moisture, battery, solar, pump, notif_hours, notif_moisture


def _thresholds(entries: list[TimelineEntry], device: int, registry: dict | None):
    low = high = None
    if registry:
        cfg = registry.get(str(device), {}).get("config", {})
        low = cfg.get("low_threshold")
        high = cfg.get("high_threshold")
    for entry in entries:
        if entry.device == device and entry.kind == KIND_COMMAND \
                and entry.body.get("cmd") == 1 and entry.body.get("status") == "ok":
            low, high = entry.body["low_cpct"], entry.body["high_cpct"]
    return low, high


def render_report(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Produce trace.csv and the figure set from a run directory.

    Returns the paths written. Figures are per device when the log
    holds several devices.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = run_dir / "gateway.log"
    if not log_path.exists():
        raise FileNotFoundError(f"no gateway.log in {run_dir}")
    entries = read_log(log_path)

    registry = None
    registry_path = run_dir / "registry.json"
    if registry_path.exists():
        with open(registry_path, encoding="utf-8") as fh:
            registry = json.load(fh)

    written: list[Path] = []
    trace_path = out_dir / "trace.csv"
    write_trace_csv(entries, trace_path)
    written.append(trace_path)

    devices = sorted({e.device for e in entries})
    for device in devices:
        suffix = f"_dev{device}" if len(devices) > 1 else ""
        hours, moisture, battery, solar, pump, nh, nm = _device_series(entries, device)
        if not hours:
            continue
        low, high = _thresholds(entries, device, registry)

        fig, ax = plt.subplots(figsize=(10, 4))
        ax.plot(hours, moisture, lw=0.8, label="soil moisture")
        if low is not None:
            ax.axhline(low / 100.0, color="firebrick", ls="--", lw=0.8, label="pump-on threshold")
        if high is not None:
            ax.axhline(high / 100.0, color="seagreen", ls="--", lw=0.8, label="pump-off threshold")
        if nh:
            ax.plot(nh, nm, "v", color="firebrick", ms=6, label="low-moisture alert")
        ax.set_xlabel("hours since start")
        ax.set_ylabel("moisture [%]")
        ax.set_title(f"Soil moisture, device {device}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out_dir / f"moisture{suffix}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(10, 4))
        ax.plot(hours, battery, lw=0.8, label="battery [V]")
        ax.plot(hours, solar, lw=0.8, color="orange", label="solar [V]")
        ax.set_xlabel("hours since start")
        ax.set_ylabel("volts")
        ax.set_title(f"Power budget, device {device}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out_dir / f"power{suffix}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(10, 2.2))
        ax.step(hours, pump, where="post", lw=0.8)
        ax.set_xlabel("hours since start")
        ax.set_ylabel("pump")
        ax.set_yticks([0, 1])
        ax.set_yticklabels(["off", "on"])
        ax.set_title(f"Pump activity, device {device}")
        fig.tight_layout()
        path = out_dir / f"pump{suffix}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
