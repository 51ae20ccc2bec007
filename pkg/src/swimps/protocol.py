"""Binary device<->gateway frame codec.

Wire layout (all multi-byte integers little-endian):

    offset  size  field
    0       2     magic 0x53 0x57 ("SW")
    2       1     version (currently 1)
    3       1     msg_type (1 telemetry, 2 command, 3 ack)
    4       4     device_id (u32)
    8       4     seq (u32)
    12      8     timestamp_ms (u64, unix milliseconds)
    20      2     payload_len (u16)
    22      n     payload (see payload classes)
    22+n    4     CRC-32 over bytes 0..22+n

The CRC covers the magic bytes, so any header corruption trips the one
check. Frames are self-delimiting through payload_len: ``decode_frame``
reads exactly one frame from the head of its input and never touches
bytes past it, which is what stream reassembly builds on.

``decode_frame`` is total over arbitrary byte strings: malformed input
raises a ``FrameError`` subclass, never anything else.
"""

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

MAGIC = b"\x53\x57"
VERSION = 1
HEADER_LEN = 22
CRC_LEN = 4
MAX_PAYLOAD = 1024

_HEADER = struct.Struct("<2sBBIIQH")
_TELEMETRY = struct.Struct("<HhHHHB")
_CRC = struct.Struct("<I")

TELEMETRY_FRAME_LEN = HEADER_LEN + _TELEMETRY.size + CRC_LEN  # 37 bytes


class MsgType(IntEnum):
    TELEMETRY = 1
    COMMAND = 2
    ACK = 3


class OverrideMode(IntEnum):
    AUTO = 0
    FORCE_ON = 1
    FORCE_OFF = 2


# Telemetry flag bits.
FLAG_PUMP_ON = 0x01
FLAG_CHARGING = 0x02
FLAG_LOW_LATCH = 0x04


class FrameError(Exception):
    """Base for every decode failure."""


class BadMagic(FrameError):
    pass


class UnknownVersion(FrameError):
    pass


class UnknownMsgType(FrameError):
    pass


class Truncated(FrameError):
    pass


class BadCrc(FrameError):
    pass


class BadPayload(FrameError):
    pass


class EncodeError(Exception):
    """Raised when a frame violates its invariants at encode time."""


def crc32(data: bytes) -> int:
    """CRC-32/IEEE: reflected 0xEDB88320, init and final XOR 0xFFFFFFFF."""
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class TelemetryPayload:
    """Fixed 11-byte sensor/power report."""

    moisture_cpct: int
    temp_cdegc: int
    rh_cpct: int
    battery_mv: int
    solar_mv: int
    flags: int

    @property
    def pump_on(self) -> bool:
        return bool(self.flags & FLAG_PUMP_ON)

    @property
    def charging(self) -> bool:
        return bool(self.flags & FLAG_CHARGING)

    @property
    def low_latch(self) -> bool:
        return bool(self.flags & FLAG_LOW_LATCH)

    def validate(self) -> None:
        if not 0 <= self.moisture_cpct <= 10000:
            raise BadPayload(f"moisture_cpct {self.moisture_cpct} outside [0, 10000]")
        if not 0 <= self.temp_cdegc <= 5000:
            raise BadPayload(f"temp_cdegc {self.temp_cdegc} outside [0, 5000]")
        if not 2000 <= self.rh_cpct <= 9000:
            raise BadPayload(f"rh_cpct {self.rh_cpct} outside [2000, 9000]")
        if not 3000 <= self.battery_mv <= 4200:
            raise BadPayload(f"battery_mv {self.battery_mv} outside [3000, 4200]")
        if not 0 <= self.solar_mv <= 0xFFFF:
            raise BadPayload(f"solar_mv {self.solar_mv} outside u16 range")
        if not 0 <= self.flags <= 7:
            raise BadPayload(f"flags {self.flags} uses undefined bits")

    def encode(self) -> bytes:
        return _TELEMETRY.pack(
            self.moisture_cpct, self.temp_cdegc, self.rh_cpct,
            self.battery_mv, self.solar_mv, self.flags,
        )

    @classmethod
    def decode(cls, data: bytes) -> "TelemetryPayload":
        if len(data) != _TELEMETRY.size:
            raise BadPayload(f"telemetry payload must be {_TELEMETRY.size} bytes, got {len(data)}")
        payload = cls(*_TELEMETRY.unpack(data))
        payload.validate()
        return payload


CMD_SET_THRESHOLDS = 1
CMD_PUMP_OVERRIDE = 2

_CMD_THRESHOLDS = struct.Struct("<BHH")
_CMD_OVERRIDE = struct.Struct("<BB")


@dataclass(frozen=True)
class CommandPayload:
    """Gateway->device command: threshold update or pump override."""

    cmd: int
    low_cpct: int = 0
    high_cpct: int = 0
    mode: int = 0

    @classmethod
    def set_thresholds(cls, low_cpct: int, high_cpct: int) -> "CommandPayload":
        payload = cls(cmd=CMD_SET_THRESHOLDS, low_cpct=low_cpct, high_cpct=high_cpct)
        payload.validate()
        return payload

    @classmethod
    def pump_override(cls, mode: int) -> "CommandPayload":
        payload = cls(cmd=CMD_PUMP_OVERRIDE, mode=int(mode))
        payload.validate()
        return payload

    def validate(self) -> None:
        if self.cmd == CMD_SET_THRESHOLDS:
            if not 0 <= self.low_cpct <= 0xFFFF or not 0 <= self.high_cpct <= 0xFFFF:
                raise BadPayload("thresholds outside u16 range")
            if self.low_cpct >= self.high_cpct:
                raise BadPayload(
                    f"low_cpct {self.low_cpct} must be < high_cpct {self.high_cpct}"
                )
        elif self.cmd == CMD_PUMP_OVERRIDE:
            if self.mode not in (0, 1, 2):
                raise BadPayload(f"override mode {self.mode} not in {{0, 1, 2}}")
        else:
            raise BadPayload(f"unknown command {self.cmd}")

    def encode(self) -> bytes:
        self.validate()
        if self.cmd == CMD_SET_THRESHOLDS:
            return _CMD_THRESHOLDS.pack(self.cmd, self.low_cpct, self.high_cpct)
        return _CMD_OVERRIDE.pack(self.cmd, self.mode)

    @classmethod
    def decode(cls, data: bytes) -> "CommandPayload":
        if not data:
            raise BadPayload("empty command payload")
        cmd = data[0]
        if cmd == CMD_SET_THRESHOLDS:
            if len(data) != _CMD_THRESHOLDS.size:
                raise BadPayload(f"threshold command must be {_CMD_THRESHOLDS.size} bytes")
            _, low, high = _CMD_THRESHOLDS.unpack(data)
            payload = cls(cmd=cmd, low_cpct=low, high_cpct=high)
        elif cmd == CMD_PUMP_OVERRIDE:
            if len(data) != _CMD_OVERRIDE.size:
                raise BadPayload(f"override command must be {_CMD_OVERRIDE.size} bytes")
            _, mode = _CMD_OVERRIDE.unpack(data)
            payload = cls(cmd=cmd, mode=mode)
        else:
            raise BadPayload(f"unknown command {cmd}")
        payload.validate()
        return payload


ACK_OK = 0
ACK_REJECTED = 1

_ACK = struct.Struct("<IB")


@dataclass(frozen=True)
class AckPayload:
    acked_seq: int
    status: int

    def validate(self) -> None:
        if not 0 <= self.acked_seq <= 0xFFFFFFFF:
            raise BadPayload("acked_seq outside u32 range")
        if self.status not in (ACK_OK, ACK_REJECTED):
            raise BadPayload(f"ack status {self.status} not in {{0, 1}}")

    def encode(self) -> bytes:
        self.validate()
        return _ACK.pack(self.acked_seq, self.status)

    @classmethod
    def decode(cls, data: bytes) -> "AckPayload":
        if len(data) != _ACK.size:
            raise BadPayload(f"ack payload must be {_ACK.size} bytes")
        payload = cls(*_ACK.unpack(data))
        payload.validate()
        return payload


Payload = TelemetryPayload | CommandPayload | AckPayload

_PAYLOAD_TYPES = {
    MsgType.TELEMETRY: TelemetryPayload,
    MsgType.COMMAND: CommandPayload,
    MsgType.ACK: AckPayload,
}


@dataclass(frozen=True)
class Frame:
    msg_type: int
    device_id: int
    seq: int
    timestamp_ms: int
    payload: Payload
    version: int = VERSION


def encode_frame(frame: Frame) -> bytes:
    """Serialize a frame, validating every invariant first."""
    if frame.version != VERSION:
        raise EncodeError(f"unsupported version {frame.version}")
    try:
        expected = _PAYLOAD_TYPES[MsgType(frame.msg_type)]
    except ValueError:
        raise EncodeError(f"unknown msg_type {frame.msg_type}") from None
    if type(frame.payload) is not expected:
        raise EncodeError(
            f"msg_type {frame.msg_type} does not match payload {type(frame.payload).__name__}"
        )
    if not 0 <= frame.device_id <= 0xFFFFFFFF:
        raise EncodeError("device_id outside u32 range")
    if not 0 <= frame.seq <= 0xFFFFFFFF:
        raise EncodeError("seq outside u32 range")
    if not 0 <= frame.timestamp_ms <= 0xFFFFFFFFFFFFFFFF:
        raise EncodeError("timestamp_ms outside u64 range")
    try:
        body = frame.payload.encode()
    except BadPayload as exc:
        raise EncodeError(str(exc)) from exc
    if len(body) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(body)} bytes exceeds {MAX_PAYLOAD}")
    head = _HEADER.pack(
        MAGIC, frame.version, frame.msg_type,
        frame.device_id, frame.seq, frame.timestamp_ms, len(body),
    )
    return head + body + _CRC.pack(crc32(head + body))


def frame_length(data: bytes) -> int | None:
    """Total length of the frame at the head of ``data``, or None if the
    header is not complete yet. Used by stream reassembly."""
    if len(data) < HEADER_LEN:
        return None
    payload_len = int.from_bytes(data[20:22], "little")
    return HEADER_LEN + payload_len + CRC_LEN


def decode_frame(data: bytes) -> Frame:
    """Parse one frame from the head of ``data``.

    Bytes after the declared frame end are ignored (callers slicing a
    stream pass the whole buffer). Raises BadMagic, UnknownVersion,
    UnknownMsgType, Truncated, BadCrc or BadPayload; never reads past
    the input.
    """
    if len(data) < HEADER_LEN:
        raise Truncated(f"need {HEADER_LEN} header bytes, got {len(data)}")
    magic, version, msg_type, device_id, seq, timestamp_ms, payload_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic.hex()}")
    if version != VERSION:
        raise UnknownVersion(f"unknown version {version}")
    if msg_type not in _PAYLOAD_TYPES:
        raise UnknownMsgType(f"unknown msg_type {msg_type}")
    end = HEADER_LEN + payload_len + CRC_LEN
    if len(data) < end:
        raise Truncated(f"frame declares {end} bytes, got {len(data)}")
    stored = _CRC.unpack_from(data, end - CRC_LEN)[0]
    computed = crc32(bytes(data[: end - CRC_LEN]))
    if stored != computed:
        raise BadCrc(f"crc mismatch: stored {stored:#010x}, computed {computed:#010x}")
    if payload_len > MAX_PAYLOAD:
        raise BadPayload(f"payload of {payload_len} bytes exceeds {MAX_PAYLOAD}")
    payload = _PAYLOAD_TYPES[MsgType(msg_type)].decode(bytes(data[HEADER_LEN: end - CRC_LEN]))
    return Frame(
        msg_type=msg_type,
        device_id=device_id,
        seq=seq,
        timestamp_ms=timestamp_ms,
        payload=payload,
        version=version,
    )


class FrameReassembler:
    """Accumulates stream bytes and yields complete frames.

    Each item is (raw_span, Frame-or-FrameError) so callers can hand
    the exact received bytes onward. On BadMagic the buffer advances
    one byte to hunt for the next sync point (skipped bytes are not
    reported); any other decode error consumes the declared frame span
    so one corrupt frame cannot wedge the stream.
    """

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[tuple[bytes, Frame | FrameError]]:
        self._buf.extend(data)
        out: list[tuple[bytes, Frame | FrameError]] = []
        while True:
            if len(self._buf) >= len(MAGIC) and not self._buf.startswith(MAGIC):
                del self._buf[:1]
                continue
            total = frame_length(self._buf)
            if total is None or len(self._buf) < total:
                break
            raw = bytes(self._buf[:total])
            try:
                out.append((raw, decode_frame(raw)))
                del self._buf[:total]
            except BadMagic:
                del self._buf[:1]
            except FrameError as exc:
                out.append((raw, exc))
                del self._buf[:total]
        return out
