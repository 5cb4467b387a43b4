"""Append-only event store: the single source of truth for replay.

Records are newline-delimited JSON with a per-record CRC32 checksum.
Segment files rotate by size; offsets are dense and strictly increasing
across segments. On open, a torn final record (power loss mid-write) is
detected by its checksum and truncated; corruption anywhere earlier is a
hard failure because replayed state would silently diverge.
"""

from __future__ import annotations

import json
import os
import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import OffsetOutOfRange, StorageFailure

LEDGER = "LEDGER"
SESSION = "SESSION"
GROWTH = "GROWTH"
PROTOCOL_AUDIT = "PROTOCOL_AUDIT"
STREAMS = frozenset({LEDGER, SESSION, GROWTH, PROTOCOL_AUDIT})

_SEGMENT_RE = re.compile(r"events-(\d{8})\.ndjson$")
DEFAULT_SEGMENT_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class StoredRecord:
    offset: int
    ts: float
    stream: str
    body: dict[str, Any]


def _canonical(offset: int, ts: float, stream: str, body: dict[str, Any]) -> str:
    return json.dumps(
        {"offset": offset, "ts": ts, "stream": stream, "body": body},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def _crc(canonical: str) -> str:
    return format(zlib.crc32(canonical.encode("utf-8")), "08x")


def encode_record(record: StoredRecord) -> str:
    canonical = _canonical(record.offset, record.ts, record.stream, record.body)
    # crc rides at the end of the object; decode strips it before verifying
    return f'{canonical[:-1]},"crc":"{_crc(canonical)}"}}'


def decode_record(line: str) -> StoredRecord:
    """Raises ValueError on any malformation, including a bad checksum."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    crc = obj.pop("crc", None)
    for key, kind in (("offset", int), ("stream", str), ("body", dict)):
        if key not in obj or not isinstance(obj[key], kind):
            raise ValueError(f"bad field {key!r}")
    if not isinstance(obj.get("ts"), (int, float)):
        raise ValueError("bad field 'ts'")
    canonical = _canonical(obj["offset"], obj["ts"], obj["stream"], obj["body"])
    if crc != _crc(canonical):
        raise ValueError("checksum mismatch")
    return StoredRecord(obj["offset"], obj["ts"], obj["stream"], obj["body"])


class EventStore:
    """Single-writer, many-reader append-only log.

    ``data_dir=None`` keeps records in memory only (tests, throwaway sims).
    """

    def __init__(self, data_dir: str | Path | None = None,
                 segment_bytes: int = DEFAULT_SEGMENT_BYTES,
                 fsync: bool = True):
        self._records: list[StoredRecord] = []
        self._dir = Path(data_dir) if data_dir is not None else None
        self._segment_bytes = segment_bytes
        self._fsync = fsync
        self._active: Path | None = None
        self._fh = None
        self._active_size = 0
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
            self._recover()

    # -- recovery ---------------------------------------------------------

    def _segments(self) -> list[Path]:
        assert self._dir is not None
        return sorted(p for p in self._dir.iterdir() if _SEGMENT_RE.search(p.name))

    def _recover(self) -> None:
        segments = self._segments()
        expected = 0
        for i, seg in enumerate(segments):
            last_segment = i == len(segments) - 1
            good_bytes = 0
            with seg.open("rb") as fh:
                for n, raw in enumerate(fh, start=1):
                    try:
                        if not raw.endswith(b"\n"):
                            raise ValueError("unterminated line")
                        record = decode_record(raw.decode("utf-8"))
                    except (ValueError, UnicodeDecodeError) as exc:
                        if last_segment:
                            # torn tail from a crash: drop it, keep the rest
                            with seg.open("r+b") as trunc:
                                trunc.truncate(good_bytes)
                            break
                        raise StorageFailure(f"{seg.name} line {n}: {exc}") from exc
                    if record.offset != expected:
                        raise StorageFailure(
                            f"{seg.name} line {n}: offset {record.offset}, expected {expected}")
                    self._records.append(record)
                    expected += 1
                    good_bytes += len(raw)
        self._active = segments[-1] if segments else None
        if self._active is not None:
            self._fh = self._active.open("ab")
            self._active_size = self._active.stat().st_size

    # -- write path ---------------------------------------------------------

    def _next_segment(self) -> Path:
        assert self._dir is not None
        index = 0
        if self._active is not None:
            index = int(_SEGMENT_RE.search(self._active.name).group(1)) + 1
        return self._dir / f"events-{index:08d}.ndjson"

    def append(self, stream: str, body: dict[str, Any], ts: float) -> int:
        if stream not in STREAMS:
            raise StorageFailure(f"unknown stream {stream!r}")
        offset = len(self._records)
        record = StoredRecord(offset=offset, ts=ts, stream=stream, body=body)
        line = encode_record(record) + "\n"
        if self._dir is not None:
            try:
                if self._active is None or self._active_size >= self._segment_bytes:
                    self._roll_segment()
                data = line.encode("utf-8")
                self._fh.write(data)
                self._fh.flush()
                if self._fsync:
                    os.fsync(self._fh.fileno())
                self._active_size += len(data)
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc
        self._records.append(record)
        return offset

    def _roll_segment(self) -> None:
        if self._fh is not None:
            self._fh.close()
        self._active = self._next_segment()
        self._fh = self._active.open("ab")
        self._active_size = 0

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- read path -------------------------------------------------------------

    @property
    def next_offset(self) -> int:
        return len(self._records)

    def replay(self, from_offset: int = 0) -> Iterator[StoredRecord]:
        if from_offset < 0 or from_offset > len(self._records):
            raise OffsetOutOfRange(f"offset {from_offset} outside [0, {len(self._records)}]")
        return iter(self._records[from_offset:])

    def stream(self, stream: str, from_offset: int = 0) -> Iterator[StoredRecord]:
        return (r for r in self.replay(from_offset) if r.stream == stream)

    def import_dataset(self, path: str | Path, stream: str = GROWTH) -> int:
        """Append every row of a documented CSV dataset; returns the row count."""
        from . import datasets
        from .errors import ParseError

        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        bodies = datasets.parse_dataset(text)
        for body in bodies:
            self.append(stream, body, body["data"].get("start", 0.0))
        return len(bodies)

    def digest(self) -> str:
        """SHA-256 over the exact log bytes (all segments in order)."""
        import hashlib

        h = hashlib.sha256()
        if self._dir is not None:
            for seg in self._segments():
                h.update(seg.read_bytes())
        else:
            for record in self._records:
                h.update((encode_record(record) + "\n").encode("utf-8"))
        return h.hexdigest()
