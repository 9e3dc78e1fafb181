"""Lossless JSON encoding of messages and trace payloads.

Plain JSON cannot tell a tuple from a list or carry bytes, so non-JSON values
are wrapped in single-key tagged objects:

    {"$vc": [3, 8]}            VectorClock
    {"$txn": [0, 1]}           TxnId
    {"$sq": [txn, 7, "R"]}     SnapshotQueueEntry
    {"$b": "6869"}             bytes (hex)
    {"$t": [...]}              tuple
    {"$fs": [...]}             frozenset (sorted by encoded form)
    {"$d": [[k, v], ...]}      dict with non-string keys
    {"$msg": {...}}            Message envelope
"""

from __future__ import annotations

import dataclasses
import json
from typing import Any

from .core_types import (
    PAYLOAD_TYPES,
    EntryKind,
    Message,
    MessageKind,
    SnapshotQueueEntry,
    TxnId,
    VectorClock,
)


def encode_value(value: Any) -> Any:
    """Turn *value* into a JSON-compatible structure."""
    if value is None or isinstance(value, (bool, int, float)):
        return value
    if isinstance(value, str):
        # StrEnum members encode as their plain value.
        return str(value)
    if isinstance(value, Message):
        return {"$msg": encode_message(value)}
    if isinstance(value, VectorClock):
        return {"$vc": list(value.entries)}
    if isinstance(value, TxnId):
        return {"$txn": [value.origin_node, value.local_seq]}
    if isinstance(value, SnapshotQueueEntry):
        return {
            "$sq": [
                encode_value(value.txn),
                value.insertion_snapshot,
                str(value.kind),
            ]
        }
    if isinstance(value, (bytes, bytearray)):
        return {"$b": bytes(value).hex()}
    if isinstance(value, tuple):
        return {"$t": [encode_value(v) for v in value]}
    if isinstance(value, (frozenset, set)):
        items = [encode_value(v) for v in value]
        items.sort(key=lambda item: json.dumps(item, sort_keys=True))
        return {"$fs": items}
    if isinstance(value, list):
        return [encode_value(v) for v in value]
    if isinstance(value, dict):
        if all(isinstance(k, str) for k in value):
            return {k: encode_value(v) for k, v in value.items()}
        return {"$d": [[encode_value(k), encode_value(v)] for k, v in value.items()]}
    msg = f"Cannot encode value of type {type(value).__name__}"
    raise TypeError(msg)


def decode_value(data: Any) -> Any:
    """Inverse of encode_value."""
    if isinstance(data, list):
        return [decode_value(v) for v in data]
    if not isinstance(data, dict):
        return data
    if len(data) == 1:
        tag, body = next(iter(data.items()))
        if tag == "$vc":
            return VectorClock(tuple(body))
        if tag == "$txn":
            return TxnId(body[0], body[1])
        if tag == "$sq":
            return SnapshotQueueEntry(decode_value(body[0]), body[1], EntryKind(body[2]))
        if tag == "$b":
            return bytes.fromhex(body)
        if tag == "$t":
            return tuple(decode_value(v) for v in body)
        if tag == "$fs":
            return frozenset(decode_value(v) for v in body)
        if tag == "$msg":
            return decode_message(body)
        if tag == "$d":
            return {decode_value(k): decode_value(v) for k, v in body}
    return {k: decode_value(v) for k, v in data.items()}


def encode_message(message: Message) -> dict[str, Any]:
    payload = {
        f.name: encode_value(getattr(message.payload, f.name))
        for f in dataclasses.fields(message.payload)
    }
    return {
        "kind": str(message.kind),
        "sender": message.sender,
        "dest": message.dest,
        "payload": payload,
    }


def decode_message(data: dict[str, Any]) -> Message:
    payload_type = PAYLOAD_TYPES[MessageKind(data["kind"])]
    fields = {k: decode_value(v) for k, v in data["payload"].items()}
    return Message(data["sender"], data["dest"], payload_type(**fields))


def dumps(data: Any) -> str:
    """Deterministic single-line JSON of an already-encoded structure."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
