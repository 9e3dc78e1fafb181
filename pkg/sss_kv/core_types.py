"""Value types shared by the store, the coordinators, the simulator and the checker."""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import IntEnum
from typing import ClassVar

from ._compat import StrEnum
from .const import (
    PRIORITY_COMMIT,
    PRIORITY_READ,
    PRIORITY_REMOVE,
    PRIORITY_VOTE,
)
from .exceptions import ConfigurationError, TransactionStateError

# ---------------------------------------------------------------------------
# Vector clocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class VectorClock:
    """Immutable N-entry logical clock, one entry per node."""

    entries: tuple[int, ...]

    @classmethod
    def zeros(cls, size: int) -> VectorClock:
        return cls((0,) * size)

    @classmethod
    def of(cls, values: Iterable[int]) -> VectorClock:
        entries = tuple(int(v) for v in values)
        if any(v < 0 for v in entries):
            msg = f"Vector clock entries must be non-negative: {entries}"
            raise ConfigurationError(msg)
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> int:
        return self.entries[index]

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __str__(self) -> str:
        return "[" + ",".join(str(v) for v in self.entries) + "]"

    def _check(self, other: VectorClock) -> None:
        if len(self.entries) != len(other.entries):
            msg = (
                f"Vector clock length mismatch: {len(self.entries)} "
                f"vs {len(other.entries)}"
            )
            raise ConfigurationError(msg)

    def join(self, other: VectorClock) -> VectorClock:
        self._check(other)
        return VectorClock(tuple(map(max, self.entries, other.entries)))

    def leq(self, other: VectorClock) -> bool:
        self._check(other)
        return all(a <= b for a, b in zip(self.entries, other.entries))

    def increment(self, index: int) -> VectorClock:
        return self.with_entry(index, self.entries[index] + 1)

    def with_entry(self, index: int, value: int) -> VectorClock:
        entries = list(self.entries)
        entries[index] = value
        return VectorClock(tuple(entries))


def vc_join(a: VectorClock, b: VectorClock) -> VectorClock:
    """Entrywise maximum of two clocks of equal length."""
    return a.join(b)


def vc_leq(a: VectorClock, b: VectorClock) -> bool:
    """True iff every entry of *a* is at most the matching entry of *b*."""
    return a.leq(b)


def vc_join_all(clocks: Iterable[VectorClock], size: int) -> VectorClock:
    """Join of any number of clocks; the zero clock when *clocks* is empty."""
    result = VectorClock.zeros(size)
    for clock in clocks:
        result = result.join(clock)
    return result


# ---------------------------------------------------------------------------
# Transaction identity and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, order=True)
class TxnId:
    """Globally unique transaction id, ordered by (origin_node, local_seq)."""

    origin_node: int
    local_seq: int

    def __str__(self) -> str:
        if self == GENESIS_TXN:
            return "T_init"
        return f"T{self.origin_node}.{self.local_seq}"


# Writer of the initial version of every key.
GENESIS_TXN = TxnId(-1, 0)


class TxnStatus(StrEnum):
    ACTIVE = "active"
    PREPARING = "preparing"
    INTERNALLY_COMMITTED = "internally_committed"
    PRE_COMMIT = "pre_commit"
    EXTERNALLY_COMMITTED = "externally_committed"
    ABORTED = "aborted"


_STATUS_RANK = {
    TxnStatus.ACTIVE: 0,
    TxnStatus.PREPARING: 1,
    TxnStatus.INTERNALLY_COMMITTED: 2,
    TxnStatus.PRE_COMMIT: 3,
    TxnStatus.EXTERNALLY_COMMITTED: 4,
}


class EntryKind(StrEnum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True, slots=True)
class SnapshotQueueEntry:
    """One (txn, insertion-snapshot, kind) record of a snapshot-queue."""

    txn: TxnId
    insertion_snapshot: int
    kind: EntryKind

    @property
    def sort_key(self) -> tuple[int, int, TxnId]:
        # Readers precede writers at an equal snapshot.
        return (
            self.insertion_snapshot,
            0 if self.kind is EntryKind.READ else 1,
            self.txn,
        )


@dataclass(frozen=True, slots=True)
class Version:
    """A committed value of one key, stamped with its writer's commit clock."""

    value: bytes
    vc: VectorClock
    writer: TxnId
    prev: Version | None = None

    def chain(self) -> Iterator[Version]:
        """Walk from this version towards the oldest one."""
        version: Version | None = self
        while version is not None:
            yield version
            version = version.prev


@dataclass(frozen=True, slots=True)
class ReadRecord:
    """A read observed by a transaction: key, value and the version it came from."""

    key: int
    value: bytes
    vc: VectorClock | None
    writer: TxnId
    node: int


@dataclass(slots=True)
class TxnDescriptor:
    """Per-transaction state held by the coordinator.

    Unlike the other types here this one is mutable: it accumulates reads,
    buffered writes and the propagated set while the transaction runs, and it
    never leaves the coordinating node (messages carry immutable snapshots of
    the fields they need).
    """

    id: TxnId
    is_update: bool
    coordinator: int
    num_nodes: int
    vc: VectorClock | None = None
    has_read: list[bool] = field(default_factory=list)
    read_set: list[ReadRecord] = field(default_factory=list)
    write_set: dict[int, bytes] = field(default_factory=dict)
    propagated_set: set[SnapshotQueueEntry] = field(default_factory=set)
    status: TxnStatus = TxnStatus.ACTIVE
    begin_time: int = 0
    internal_commit_time: int | None = None
    external_commit_time: int | None = None
    queue_wait: int = 0

    def __post_init__(self) -> None:
        if not self.has_read:
            self.has_read = [False] * self.num_nodes

    @property
    def read_keys(self) -> list[int]:
        seen: dict[int, None] = {}
        for record in self.read_set:
            seen.setdefault(record.key, None)
        return list(seen)

    @property
    def read_writers(self) -> dict[int, TxnId]:
        """Writer of the version each key was first read from."""
        writers: dict[int, TxnId] = {}
        for record in self.read_set:
            writers.setdefault(record.key, record.writer)
        return writers

    def advance(self, status: TxnStatus, *, read_only_may_abort: bool = False) -> None:
        """Move to *status*, refusing any transition that is not monotone."""
        current = self.status
        if status is TxnStatus.ABORTED:
            if not self.is_update and not read_only_may_abort:
                msg = f"Read-only transaction {self.id} cannot abort"
                raise TransactionStateError(msg)
            if current not in (TxnStatus.ACTIVE, TxnStatus.PREPARING):
                msg = f"Transaction {self.id} cannot abort from {current}"
                raise TransactionStateError(msg)
        elif current is TxnStatus.ABORTED or _STATUS_RANK[status] < _STATUS_RANK[current]:
            msg = f"Transaction {self.id} cannot move from {current} to {status}"
            raise TransactionStateError(msg)
        self.status = status


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


class MessageKind(StrEnum):
    READ_REQUEST = "ReadRequest"
    READ_RETURN = "ReadReturn"
    PREPARE = "Prepare"
    VOTE = "Vote"
    DECIDE = "Decide"
    ACK = "Ack"
    REMOVE = "Remove"


class PriorityClass(IntEnum):
    REMOVE = PRIORITY_REMOVE
    COMMIT = PRIORITY_COMMIT
    VOTE = PRIORITY_VOTE
    READ = PRIORITY_READ


MESSAGE_PRIORITY: dict[MessageKind, PriorityClass] = {
    MessageKind.REMOVE: PriorityClass.REMOVE,
    MessageKind.DECIDE: PriorityClass.COMMIT,
    MessageKind.ACK: PriorityClass.COMMIT,
    MessageKind.VOTE: PriorityClass.VOTE,
    MessageKind.PREPARE: PriorityClass.VOTE,
    MessageKind.READ_REQUEST: PriorityClass.READ,
    MessageKind.READ_RETURN: PriorityClass.READ,
}


@dataclass(frozen=True, slots=True)
class ReadRequest:
    KIND: ClassVar[MessageKind] = MessageKind.READ_REQUEST

    txn: TxnId
    key: int
    seq: int
    vc: VectorClock | None
    has_read: tuple[bool, ...]
    is_update: bool


@dataclass(frozen=True, slots=True)
class ReadReturn:
    KIND: ClassVar[MessageKind] = MessageKind.READ_RETURN

    txn: TxnId
    key: int
    seq: int
    value: bytes
    writer: TxnId
    version_vc: VectorClock | None = None
    max_vc: VectorClock | None = None
    propagated: frozenset[SnapshotQueueEntry] = frozenset()
    counter: int = 0


@dataclass(frozen=True, slots=True)
class Prepare:
    KIND: ClassVar[MessageKind] = MessageKind.PREPARE

    txn: TxnId
    vc: VectorClock | None
    read_keys: tuple[int, ...]
    writes: tuple[tuple[int, bytes], ...]
    propagated: frozenset[SnapshotQueueEntry] = frozenset()
    read_versions: tuple[tuple[int, int], ...] = ()
    read_writers: tuple[tuple[int, TxnId], ...] = ()


@dataclass(frozen=True, slots=True)
class Vote:
    KIND: ClassVar[MessageKind] = MessageKind.VOTE

    txn: TxnId
    vc: VectorClock | None
    ok: bool


@dataclass(frozen=True, slots=True)
class Decide:
    KIND: ClassVar[MessageKind] = MessageKind.DECIDE

    txn: TxnId
    vc: VectorClock | None
    commit: bool


@dataclass(frozen=True, slots=True)
class Ack:
    KIND: ClassVar[MessageKind] = MessageKind.ACK

    txn: TxnId
    snapshot: int
    installed_at: int
    queue_wait: int = 0


@dataclass(frozen=True, slots=True)
class Remove:
    KIND: ClassVar[MessageKind] = MessageKind.REMOVE

    txn: TxnId


Payload = ReadRequest | ReadReturn | Prepare | Vote | Decide | Ack | Remove

PAYLOAD_TYPES: dict[MessageKind, type] = {
    cls.KIND: cls for cls in (ReadRequest, ReadReturn, Prepare, Vote, Decide, Ack, Remove)
}


@dataclass(frozen=True, slots=True)
class Message:
    """Envelope naming sender and destination of a protocol payload."""

    sender: int
    dest: int
    payload: Payload

    @property
    def kind(self) -> MessageKind:
        return self.payload.KIND

    @property
    def priority(self) -> int:
        return int(MESSAGE_PRIORITY[self.payload.KIND])

    @property
    def txn(self) -> TxnId:
        return self.payload.txn
