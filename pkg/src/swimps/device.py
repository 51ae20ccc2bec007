"""Firmware state machine of one irrigation device.

Models what the real unit does each sample tick: read the soil probe and
the air sensor, run the two-threshold pump control with a low-moisture
latch, integrate the solar/battery budget, refresh the 16x2 display, and
emit a telemetry payload. One DeviceState belongs to exactly one caller;
all operations are synchronous and deterministic.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

from . import rng
from .env import SoilState, Weather
from .protocol import (
    ACK_OK,
    ACK_REJECTED,
    CMD_PUMP_OVERRIDE,
    CMD_SET_THRESHOLDS,
    FLAG_CHARGING,
    FLAG_LOW_LATCH,
    FLAG_PUMP_ON,
    CommandPayload,
    OverrideMode,
    TelemetryPayload,
)

# Air sensor characteristics: integer-resolution, 0-50 C and 20-90 % RH.
TEMP_MIN_C = 0
TEMP_MAX_C = 50
RH_MIN_PCT = 20
RH_MAX_PCT = 90

DISPLAY_COLS = 16


class DeviceEventKind(Enum):
    LOW_MOISTURE = "LOW_MOISTURE"


@dataclass(frozen=True)
class DeviceEvent:
    kind: DeviceEventKind
    moisture_cpct: int
    timestamp_ms: int


@dataclass
class DeviceConfig:
    """Per-device settings; thresholds are centi-percent moisture."""

    device_id: int
    low_threshold: int = 3000
    high_threshold: int = 3500
    sample_interval_s: int = 60
    override: OverrideMode = OverrideMode.AUTO

    def __post_init__(self) -> None:
        if not 0 <= self.device_id <= 0xFFFFFFFF:
            raise ValueError("device_id outside u32 range")
        if not 0 < self.low_threshold < self.high_threshold < 10000:
            raise ValueError(
                f"thresholds must satisfy 0 < low < high < 10000, "
                f"got low={self.low_threshold} high={self.high_threshold}"
            )
        if self.sample_interval_s < 1:
            raise ValueError("sample_interval_s must be >= 1")
        self.override = OverrideMode(self.override)


@dataclass(frozen=True)
class SensorReading:
    moisture_cpct: int
    temp_cdegc: int
    rh_cpct: int
    timestamp_ms: int


@dataclass(frozen=True)
class PowerState:
    """Battery charge plus the derived terminal voltage.

    battery_mv is an affine map of soc over the Li-ion 3.0-4.2 V span;
    good enough for telemetry, not chemistry.
    """

    soc: float
    capacity_mah: float = 2000.0
    charging: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.soc <= 1.0:
            raise ValueError(f"soc {self.soc} outside [0, 1]")
        if self.capacity_mah <= 0:
            raise ValueError("capacity_mah must be > 0")

    @property
    def battery_mv(self) -> int:
        return 3000 + round(1200 * self.soc)


@dataclass
class DeviceState:
    pump_on: bool = False
    low_latch: bool = False
    power: PowerState = field(default_factory=lambda: PowerState(soc=1.0))
    last_reading: SensorReading | None = None
    seq: int = 0


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _clamp_int(x: int, lo: int, hi: int) -> int:
    return lo if x < lo else hi if x > hi else x


def sample_sensors(
    soil: SoilState,
    w: Weather,
    t_ms: int,
    *,
    noise_sigma_cpct: float = 0.0,
    seed: int = 0,
    device_id: int = 0,
) -> SensorReading:
    """Quantize the environment into what the sensors actually report.

    Temperature and humidity collapse to whole degrees / whole percent
    inside the sensor's range; moisture becomes centi-percent with
    optional additive Gaussian noise keyed on (seed, device, t_ms).
    """
    temp_c = _clamp_int(_round_half_up(w.temp_c), TEMP_MIN_C, TEMP_MAX_C)
    rh = _clamp_int(_round_half_up(w.rh_pct), RH_MIN_PCT, RH_MAX_PCT)
    moisture = soil.moisture * 100.0
    if noise_sigma_cpct > 0:
        moisture += noise_sigma_cpct * rng.gauss(seed, rng.STREAM_SENSOR + device_id, t_ms)
    return SensorReading(
        moisture_cpct=_clamp_int(_round_half_up(moisture), 0, 10000),
        temp_cdegc=temp_c * 100,
        rh_cpct=rh * 100,
        timestamp_ms=t_ms,
    )


def control_step(
    state: DeviceState, reading: SensorReading, cfg: DeviceConfig
) -> tuple[DeviceState, list[DeviceEvent]]:
    """One pass of the pump/latch state machine.

    In AUTO, the pump turns on below low_threshold, off at or above
    high_threshold, and holds in between (hysteresis). The low latch
    sets on the first sample below low_threshold, emitting one
    LOW_MOISTURE event, and clears at high_threshold. Overrides force
    the pump but never touch the latch.
    """
    events: list[DeviceEvent] = []
    moisture = reading.moisture_cpct

    pump = state.pump_on
    if moisture < cfg.low_threshold:
        pump = True
    elif moisture >= cfg.high_threshold:
        pump = False
    if cfg.override is OverrideMode.FORCE_ON:
        pump = True
    elif cfg.override is OverrideMode.FORCE_OFF:
        pump = False

    latch = state.low_latch
    if moisture < cfg.low_threshold and not latch:
        latch = True
        events.append(
            DeviceEvent(
                kind=DeviceEventKind.LOW_MOISTURE,
                moisture_cpct=moisture,
                timestamp_ms=reading.timestamp_ms,
            )
        )
    elif moisture >= cfg.high_threshold:
        latch = False

    new_state = DeviceState(
        pump_on=pump,
        low_latch=latch,
        power=state.power,
        last_reading=reading,
        seq=state.seq,
    )
    return new_state, events


def power_step(
    p: PowerState,
    pump_on: bool,
    solar_ma: float,
    dt_s: float,
    *,
    idle_ma: float = 80.0,
    pump_ma: float = 500.0,
    solar_limit_ma: float = 1000.0,
) -> PowerState:
    """Integrate the charge budget over ``dt_s`` seconds.

    Load is the MCU idle draw plus the pump when running; solar input is
    capped by the charge controller. charging reflects the resulting
    state: surplus current while the battery is not full.
    """
    if dt_s < 0:
        raise ValueError("dt must be >= 0")
    if solar_ma < 0:
        raise ValueError("solar_ma must be >= 0")
    load_ma = idle_ma + (pump_ma if pump_on else 0.0)
    net_ma = min(solar_ma, solar_limit_ma) - load_ma
    soc = p.soc + net_ma * (dt_s / 3600.0) / p.capacity_mah
    soc = 0.0 if soc < 0.0 else 1.0 if soc > 1.0 else soc
    return PowerState(
        soc=soc,
        capacity_mah=p.capacity_mah,
        charging=net_ma > 0 and soc < 1.0,
    )


@dataclass(frozen=True)
class DisplayFrame:
    line1: str
    line2: str


def render_display(reading: SensorReading, pump_on: bool) -> DisplayFrame:
    """Two 16-column text lines, exactly what the OLED would show.

    Lines longer than the panel (only possible at moisture 100.0 with
    the pump off) are cut at 16 characters, as the hardware would.
    """
    line1 = f"T:{reading.temp_cdegc // 100}C H:{reading.rh_cpct // 100}%"
    line2 = f"M:{reading.moisture_cpct / 100:.1f}% PUMP:{'ON' if pump_on else 'OFF'}"
    return DisplayFrame(line1=line1[:DISPLAY_COLS], line2=line2[:DISPLAY_COLS])


def make_telemetry(state: DeviceState, reading: SensorReading, solar_mv: int) -> TelemetryPayload:
    """Build the next telemetry payload, advancing state.seq by one."""
    state.seq += 1
    flags = 0
    if state.pump_on:
        flags |= FLAG_PUMP_ON
    if state.power.charging:
        flags |= FLAG_CHARGING
    if state.low_latch:
        flags |= FLAG_LOW_LATCH
    return TelemetryPayload(
        moisture_cpct=reading.moisture_cpct,
        temp_cdegc=reading.temp_cdegc,
        rh_cpct=reading.rh_cpct,
        battery_mv=state.power.battery_mv,
        solar_mv=solar_mv,
        flags=flags,
    )


def apply_command(cfg: DeviceConfig, cmd: CommandPayload) -> int:
    """Apply a gateway command to the device config.

    Returns the ack status byte. Threshold updates are rejected when
    they violate the config invariants; overrides take effect on the
    next control step.
    """
    if cmd.cmd == CMD_SET_THRESHOLDS:
        if not 0 < cmd.low_cpct < cmd.high_cpct < 10000:
            return ACK_REJECTED
        cfg.low_threshold = cmd.low_cpct
        cfg.high_threshold = cmd.high_cpct
        return ACK_OK
    if cmd.cmd == CMD_PUMP_OVERRIDE:
        try:
            cfg.override = OverrideMode(cmd.mode)
        except ValueError:
            return ACK_REJECTED
        return ACK_OK
    return ACK_REJECTED
