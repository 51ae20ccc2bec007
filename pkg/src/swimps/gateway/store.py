"""Append-only timeline log and device registry files.

The timeline is line-delimited JSON, one object per line, with the field
order {"seq", "ts", "kind", "device", "body"}. Sequence numbers are
assigned here, gapless and strictly increasing within one log; after a
restart numbering continues from the persisted maximum. Appends are
serialized by a lock and fsynced before returning unless the log was
opened with fsync=False, so an acknowledged entry survives a crash.
"""

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

KIND_TELEMETRY = "telemetry"
KIND_NOTIFICATION = "notification"
KIND_COMMAND = "command"

_KINDS = (KIND_TELEMETRY, KIND_NOTIFICATION, KIND_COMMAND)


@dataclass(frozen=True)
class TimelineEntry:
    seq: int
    ts: int
    kind: str
    device: int
    body: dict

    def to_json(self) -> str:
        # Field names and order are the on-disk contract.
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind,
             "device": self.device, "body": self.body},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "TimelineEntry":
        obj = json.loads(line)
        return cls(seq=obj["seq"], ts=obj["ts"], kind=obj["kind"],
                   device=obj["device"], body=obj["body"])


class TimelineLog:
    """One deployment's append-only event log, kept mirrored in memory."""

    def __init__(self, path: str | os.PathLike, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self._entries: list[TimelineEntry] = []
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    entry = TimelineEntry.from_json(line)
                    expected = self._entries[-1].seq + 1 if self._entries else entry.seq
                    if entry.seq != expected:
                        raise ValueError(
                            f"{self.path}:{lineno}: sequence {entry.seq}, expected {expected}"
                        )
                    self._entries.append(entry)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "a", encoding="utf-8")

    @property
    def last_seq(self) -> int:
        return self._entries[-1].seq if self._entries else 0

    def append(self, ts: int, kind: str, device: int, body: dict) -> TimelineEntry:
        """Persist one entry; the assigned sequence number is durable
        before this returns."""
        if kind not in _KINDS:
            raise ValueError(f"unknown entry kind {kind!r}")
        with self._lock:
            entry = TimelineEntry(seq=self.last_seq + 1, ts=ts, kind=kind,
                                  device=device, body=body)
            self._file.write(entry.to_json() + "\n")
            self._file.flush()
            if self.fsync:
                os.fsync(self._file.fileno())
            self._entries.append(entry)
            return entry

    def query(
        self,
        device: int | None = None,
        since: int = 0,
        kinds: Iterable[str] | None = None,
    ) -> list[TimelineEntry]:
        """Entries with seq > since, ascending, optionally filtered."""
        kindset = set(kinds) if kinds is not None else None
        return [
            e for e in self._entries
            if e.seq > since
            and (device is None or e.device == device)
            and (kindset is None or e.kind in kindset)
        ]

    def __iter__(self) -> Iterator[TimelineEntry]:
        return iter(list(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def close(self) -> None:
        self._file.close()


class RegistryFile:
    """Durable device registry: first-seen time and last known config."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._data: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self._data = json.load(fh)

    def get(self, device_id: int) -> dict | None:
        return self._data.get(str(device_id))

    def items(self) -> list[tuple[int, dict]]:
        return [(int(k), v) for k, v in self._data.items()]

    def put(self, device_id: int, record: dict) -> None:
        self._data[str(device_id)] = record
        self._flush()

    def _flush(self) -> None:
        # Atomic rewrite: the registry is tiny and rarely changes.
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self._data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.path)
