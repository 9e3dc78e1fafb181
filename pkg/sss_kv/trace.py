"""Structured run trace: one record per delivery or state transition."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .codec import decode_value, dumps, encode_value
from .core_types import TxnId

# Event names shared by writers and the checker
EV_SEND = "send"
EV_DELIVER = "deliver"
EV_DROP = "drop"
EV_BEGIN = "begin"
EV_READ = "read"
EV_REPLY = "reply"
EV_ABORT = "abort"
EV_LOCK = "lock"
EV_PREPARE = "prepare"
EV_DECIDE = "decide"
EV_INSTALL = "install"
EV_ENQUEUE = "enqueue"
EV_DEQUEUE = "dequeue"
EV_ACK = "ack"
EV_REMOVE = "remove"
EV_FORWARD = "forward"
EV_DEFER = "defer"
EV_BACKOFF = "backoff"


@dataclass(frozen=True, slots=True)
class TraceRecord:
    seq: int
    time: int
    event: str
    node: int | None
    txn: TxnId | None
    data: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return dumps(
            {
                "seq": self.seq,
                "time": self.time,
                "event": self.event,
                "node": self.node,
                "txn": encode_value(self.txn),
                "data": encode_value(self.data),
            }
        )

    @classmethod
    def from_json(cls, line: str) -> TraceRecord:
        raw = json.loads(line)
        return cls(
            seq=raw["seq"],
            time=raw["time"],
            event=raw["event"],
            node=raw["node"],
            txn=decode_value(raw["txn"]),
            data=decode_value(raw["data"]),
        )


class TraceLog:
    """Append-only in-memory trace with NDJSON export and a SHA-256 digest."""

    def __init__(self, *, record_messages: bool = True) -> None:
        self.record_messages = record_messages
        self._records: list[TraceRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self._records)

    @property
    def records(self) -> list[TraceRecord]:
        return self._records

    def record(
        self,
        time: int,
        event: str,
        node: int | None = None,
        txn: TxnId | None = None,
        **data: Any,
    ) -> TraceRecord:
        entry = TraceRecord(len(self._records), time, event, node, txn, data)
        self._records.append(entry)
        return entry

    def select(self, *events: str) -> list[TraceRecord]:
        wanted = set(events)
        return [r for r in self._records if r.event in wanted]

    def lines(self) -> Iterator[str]:
        for entry in self._records:
            yield entry.to_json()

    def digest(self) -> str:
        hasher = hashlib.sha256()
        for line in self.lines():
            hasher.update(line.encode())
            hasher.update(b"\n")
        return hasher.hexdigest()

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for line in self.lines():
                handle.write(line)
                handle.write("\n")
        return path


def read_trace(path: str | Path) -> list[TraceRecord]:
    with Path(path).open(encoding="utf-8") as handle:
        return [TraceRecord.from_json(line) for line in handle if line.strip()]
