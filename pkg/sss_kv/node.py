"""Server side of a node: key store, snapshot-queues, commit queue and handlers."""

from __future__ import annotations

import bisect
import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from ._compat import StrEnum
from typing import Any

from .const import (
    BACKOFF_INITIAL,
    BACKOFF_MAX,
    HISTORY_LIMIT,
    LOCK_TIMEOUT,
    LOG_QUEUE_CHANGES,
    STARVATION_THRESHOLD,
)
from .core_types import (
    GENESIS_TXN,
    Ack,
    Decide,
    EntryKind,
    Message,
    MessageKind,
    Payload,
    Prepare,
    ReadRequest,
    ReadReturn,
    Remove,
    SnapshotQueueEntry,
    TxnId,
    Version,
    VectorClock,
    Vote,
    vc_join_all,
)
from .exceptions import ConfigurationError
from .locks import LockTable
from .partition_map import PartitionMap
from .simnet import SimNetwork, to_ticks
from .trace import (
    EV_ACK,
    EV_BACKOFF,
    EV_DECIDE,
    EV_DEFER,
    EV_DEQUEUE,
    EV_ENQUEUE,
    EV_FORWARD,
    EV_INSTALL,
    EV_PREPARE,
    EV_REMOVE,
)

_LOGGER = logging.getLogger(__name__)

INITIAL_VALUE = b""


@dataclass(frozen=True)
class NodeConfig:
    """Server tunables, in simulated time units."""

    lock_timeout: float = LOCK_TIMEOUT
    starvation_threshold: float = STARVATION_THRESHOLD
    backoff_initial: float = BACKOFF_INITIAL
    backoff_max: float = BACKOFF_MAX
    history_limit: int | None = HISTORY_LIMIT

    def __post_init__(self) -> None:
        if self.lock_timeout <= 0:
            msg = f"lock_timeout must be positive, got {self.lock_timeout}"
            raise ConfigurationError(msg)
        if self.backoff_initial <= 0 or self.backoff_max < self.backoff_initial:
            msg = "Back-off must satisfy 0 < backoff_initial <= backoff_max"
            raise ConfigurationError(msg)
        if self.history_limit is not None and self.history_limit < 1:
            msg = f"history_limit must be at least 1, got {self.history_limit}"
            raise ConfigurationError(msg)


# ---------------------------------------------------------------------------
# Shared server plumbing
# ---------------------------------------------------------------------------


class ServerNode:
    """Message dispatch, lock table and abort bookkeeping shared by both protocols.

    Subclasses fill `_handlers` with the server-side message kinds they
    serve; every other kind goes to the colocated coordinator.
    """

    def __init__(
        self,
        index: int,
        net: SimNetwork,
        pmap: PartitionMap,
        config: NodeConfig | None = None,
    ) -> None:
        self.index = index
        self.net = net
        self.pmap = pmap
        self.config = config or NodeConfig()
        self.locks = LockTable(net, index)
        self.coordinator: Any = None
        self._aborted: set[TxnId] = set()
        self._handlers: dict[MessageKind, Callable[[Message], None]] = {}
        net.register(index, self.deliver)

    def deliver(self, message: Message) -> None:
        handler = self._handlers.get(message.kind)
        if handler is not None:
            handler(message)
        elif self.coordinator is not None:
            self.coordinator.deliver(message)
        else:
            _LOGGER.warning("Node %d has no handler for %s", self.index, message.kind)

    def send(self, dest: int, payload: Payload) -> None:
        self.net.send(Message(self.index, dest, payload))

    def _trace(self, event: str, txn: TxnId | None, **data: Any) -> None:
        self.net.trace.record(self.net.now, event, self.index, txn, **data)

    def local_keys(self, keys: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(k for k in set(keys) if self.index in self.pmap.replicas(k)))

    @property
    def lock_timeout_ticks(self) -> int:
        return max(1, to_ticks(self.config.lock_timeout))

    def clear_tombstones(self) -> None:
        self._aborted.clear()

    def is_quiescent(self) -> bool:
        return self.locks.is_empty()

    def dump(self) -> dict[str, Any]:
        return {"node": self.index, "locks": self.locks.dump()}


# ---------------------------------------------------------------------------
# SSS state
# ---------------------------------------------------------------------------


class EntryStatus(StrEnum):
    PENDING = "pending"
    READY = "ready"


@dataclass
class CommitQueueEntry:
    txn: TxnId
    vc: VectorClock
    status: EntryStatus
    write_keys: tuple[int, ...]
    read_keys: tuple[int, ...]
    writes: dict[int, bytes]
    propagated: frozenset[SnapshotQueueEntry]
    coordinator: int


@dataclass(frozen=True, slots=True)
class LogEntry:
    txn: TxnId
    vc: VectorClock
    keys: tuple[int, ...]


class NodeLog:
    """Commit log of one node; entry i of the stored clocks never decreases."""

    def __init__(self, index: int, initial_vc: VectorClock) -> None:
        self._index = index
        self._entries: list[LogEntry] = [LogEntry(GENESIS_TXN, initial_vc, ())]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def most_recent_vc(self) -> VectorClock:
        return self._entries[-1].vc

    def add(self, txn: TxnId, vc: VectorClock, keys: tuple[int, ...]) -> None:
        last = self._entries[-1].vc[self._index]
        if vc[self._index] < last:
            msg = f"NLog entry {vc} for {txn} goes back on entry {self._index} ({last})"
            raise AssertionError(msg)
        self._entries.append(LogEntry(txn, vc, keys))

    def clocks(self) -> list[VectorClock]:
        return [entry.vc for entry in self._entries]


class SnapshotQueue:
    """Per-key queue, split into read-only (R) and update (W) sub-queues."""

    __slots__ = ("ro", "up")

    def __init__(self) -> None:
        self.ro: list[SnapshotQueueEntry] = []
        self.up: list[SnapshotQueueEntry] = []

    def _list(self, kind: EntryKind) -> list[SnapshotQueueEntry]:
        return self.ro if kind is EntryKind.READ else self.up

    def insert(self, entry: SnapshotQueueEntry) -> bool:
        """Insert keeping order; an existing entry of the same txn keeps the lower snapshot."""
        entries = self._list(entry.kind)
        for existing in entries:
            if existing.txn == entry.txn:
                if existing.insertion_snapshot <= entry.insertion_snapshot:
                    return False
                entries.remove(existing)
                break
        bisect.insort(entries, entry, key=lambda e: e.sort_key)
        return True

    def remove(self, txn: TxnId, kind: EntryKind) -> SnapshotQueueEntry | None:
        entries = self._list(kind)
        for existing in entries:
            if existing.txn == txn:
                entries.remove(existing)
                return existing
        return None

    def readers_before(self, writer: SnapshotQueueEntry) -> list[SnapshotQueueEntry]:
        """R entries ordered ahead of *writer* (lower snapshot, or equal: readers first)."""
        return [e for e in self.ro if e.sort_key < writer.sort_key]

    def is_empty(self) -> bool:
        return not self.ro and not self.up


@dataclass
class _PreparedTxn:
    payload: Prepare
    coordinator: int
    write_keys: tuple[int, ...]
    read_keys: tuple[int, ...]
    voted: bool = False


@dataclass
class _PrecommitState:
    entry: SnapshotQueueEntry
    vc: VectorClock
    keys: tuple[int, ...]
    coordinator: int
    installed_at: int


@dataclass
class _ParkedRead:
    request: ReadRequest
    sender: int
    required: int


@dataclass
class _RemovalState:
    forwarded: set[int] = field(default_factory=set)


class SSSNode(ServerNode):
    """One SSS storage node.

    Handlers run to completion; every "wait until" of the protocol is a
    parked continuation that a later state change re-fires.
    """

    def __init__(
        self,
        index: int,
        net: SimNetwork,
        pmap: PartitionMap,
        config: NodeConfig | None = None,
        initial_vc: VectorClock | None = None,
    ) -> None:
        super().__init__(index, net, pmap, config)
        n = pmap.num_nodes
        initial_vc = initial_vc or VectorClock.zeros(n)
        if len(initial_vc) != n:
            msg = f"Initial clock {initial_vc} does not match cluster size {n}"
            raise ConfigurationError(msg)
        self.node_vc = initial_vc
        self.nlog = NodeLog(index, initial_vc)
        self.commit_q: list[CommitQueueEntry] = []
        zero = VectorClock.zeros(n)
        self.store: dict[int, Version] = {
            key: Version(INITIAL_VALUE, zero, GENESIS_TXN) for key in pmap.keys_on(index)
        }
        self.squeues: dict[int, SnapshotQueue] = {}
        self._prepared: dict[TxnId, _PreparedTxn] = {}
        self._precommit: dict[TxnId, _PrecommitState] = {}
        self._parked: list[_ParkedRead] = []
        self._reader_keys: dict[TxnId, set[int]] = {}
        self._propagated_keys: dict[TxnId, set[int]] = {}
        self._forward_targets: dict[TxnId, set[int]] = {}
        self._removed: dict[TxnId, _RemovalState] = {}
        self._handlers = {
            MessageKind.READ_REQUEST: self._on_read_request,
            MessageKind.PREPARE: self._on_prepare,
            MessageKind.DECIDE: self._on_decide,
            MessageKind.REMOVE: self._on_remove,
        }

    @property
    def most_recent_vc(self) -> VectorClock:
        return self.nlog.most_recent_vc

    def _queue(self, key: int) -> SnapshotQueue:
        queue = self.squeues.get(key)
        if queue is None:
            queue = self.squeues[key] = SnapshotQueue()
        return queue

    def _drop_if_empty(self, key: int) -> None:
        queue = self.squeues.get(key)
        if queue is not None and queue.is_empty():
            del self.squeues[key]

    def _enqueue(self, key: int, entry: SnapshotQueueEntry, *, propagated: bool = False) -> None:
        if not self._queue(key).insert(entry):
            return
        if entry.kind is EntryKind.READ:
            self._reader_keys.setdefault(entry.txn, set()).add(key)
            if propagated:
                self._propagated_keys.setdefault(entry.txn, set()).add(key)
        if LOG_QUEUE_CHANGES:
            _LOGGER.debug("Node %d Q(%d) += %s", self.index, key, entry)
        self._trace(
            EV_ENQUEUE,
            entry.txn,
            key=key,
            kind=str(entry.kind),
            snapshot=entry.insertion_snapshot,
            propagated=propagated,
        )

    # -- 2PC participant -------------------------------------------------------

    def _on_prepare(self, message: Message) -> None:
        self.handle_prepare(message.payload, message.sender)

    def handle_prepare(self, payload: Prepare, coordinator: int) -> None:
        """Lock, validate and vote; the Vote is sent once locks resolve."""
        txn = payload.txn
        write_keys = self.local_keys(k for k, _ in payload.writes)
        read_keys = self.local_keys(payload.read_keys)
        self._note_forward_targets(payload)
        if txn in self._aborted:
            self._vote(coordinator, txn, payload.vc, ok=False, reason="already aborted")
            return
        self._prepared[txn] = _PreparedTxn(payload, coordinator, write_keys, read_keys)
        self.locks.acquire(
            txn,
            exclusive=write_keys,
            shared=read_keys,
            timeout=self.lock_timeout_ticks,
            on_done=lambda granted: self._prepare_locked(txn, granted),
        )

    def _note_forward_targets(self, payload: Prepare) -> None:
        if not payload.propagated or not payload.writes:
            return
        targets = set(self.pmap.replicas_of(k for k, _ in payload.writes))
        targets.discard(self.index)
        for entry in sorted(payload.propagated, key=lambda e: e.sort_key):
            if entry.txn in self._removed:
                self._forward_remove(entry.txn, targets)
            else:
                self._forward_targets.setdefault(entry.txn, set()).update(targets)

    def _prepare_locked(self, txn: TxnId, granted: bool) -> None:
        state = self._prepared.get(txn)
        if state is None or state.voted:
            # Decided (aborted) while waiting for locks.
            return
        state.voted = True
        payload = state.payload
        if not granted:
            del self._prepared[txn]
            self.locks.release(txn)
            self._vote(state.coordinator, txn, payload.vc, ok=False, reason="lock timeout")
            return
        if not self.validate(dict(payload.read_writers), state.read_keys):
            del self._prepared[txn]
            self.locks.release(txn)
            self._vote(state.coordinator, txn, payload.vc, ok=False, reason="validation")
            return
        if state.write_keys:
            self.node_vc = self.node_vc.increment(self.index)
            prep_vc = self.node_vc
            writes = dict(payload.writes)
            self._insert_commit_entry(
                CommitQueueEntry(
                    txn=txn,
                    vc=prep_vc,
                    status=EntryStatus.PENDING,
                    write_keys=state.write_keys,
                    read_keys=state.read_keys,
                    writes={k: writes[k] for k in state.write_keys},
                    propagated=payload.propagated,
                    coordinator=state.coordinator,
                )
            )
        else:
            prep_vc = self.most_recent_vc
        self._vote(state.coordinator, txn, prep_vc, ok=True)

    def _vote(
        self, coordinator: int, txn: TxnId, vc: VectorClock | None, *, ok: bool, reason: str = ""
    ) -> None:
        self._trace(EV_PREPARE, txn, ok=ok, vc=vc, reason=reason)
        if not ok:
            _LOGGER.debug("Node %d votes against %s: %s", self.index, txn, reason)
        self.send(coordinator, Vote(txn, vc, ok))

    def validate(self, read_writers: Mapping[int, TxnId], read_keys: Iterable[int]) -> bool:
        """False iff a local read key has moved past the version the transaction read.

        Versions are identified by their writer. Later reads on other nodes join
        their maxVC into the transaction clock, so its entry for this node can
        already exceed a head the transaction never saw.
        """
        for key in read_keys:
            head = self.store.get(key)
            if head is None:
                continue
            if read_writers.get(key) != head.writer:
                return False
        return True

    def _commit_key(self, entry: CommitQueueEntry) -> tuple[int, TxnId]:
        return (entry.vc[self.index], entry.txn)

    def _insert_commit_entry(self, entry: CommitQueueEntry) -> None:
        bisect.insort(self.commit_q, entry, key=self._commit_key)

    def _on_decide(self, message: Message) -> None:
        payload: Decide = message.payload
        self.handle_decide(payload.txn, payload.vc, payload.commit)

    def handle_decide(self, txn: TxnId, commit_vc: VectorClock | None, outcome: bool) -> None:
        state = self._prepared.pop(txn, None)
        self._trace(EV_DECIDE, txn, commit=outcome, vc=commit_vc)
        if state is None:
            if outcome:
                _LOGGER.warning("Node %d got Decide(commit) for unknown %s", self.index, txn)
            else:
                # Abort overtook (or replaced) the Prepare.
                self._aborted.add(txn)
            return
        if not outcome:
            self.commit_q = [e for e in self.commit_q if e.txn != txn]
            self.locks.release(txn)
            self.try_commit_head()
            return
        if commit_vc is None:
            msg = f"Decide(commit) for {txn} carries no clock"
            raise ConfigurationError(msg)
        self.node_vc = self.node_vc.join(commit_vc)
        if not state.write_keys:
            self.locks.release(txn)
            return
        for entry in self.commit_q:
            if entry.txn == txn:
                self.commit_q.remove(entry)
                entry.vc = commit_vc
                entry.status = EntryStatus.READY
                self._insert_commit_entry(entry)
                break
        self.try_commit_head()

    def try_commit_head(self) -> None:
        """Install every ready entry at the head of the commit queue."""
        installed = False
        while self.commit_q and self.commit_q[0].status is EntryStatus.READY:
            entry = self.commit_q.pop(0)
            self._install(entry)
            installed = True
        if installed:
            self._resume_parked()

    def _install(self, entry: CommitQueueEntry) -> None:
        for key in entry.write_keys:
            head = Version(entry.writes[key], entry.vc, entry.txn, self.store[key])
            self.store[key] = self._truncate(head)
            self._trace(EV_INSTALL, entry.txn, key=key, vc=entry.vc, writer=entry.txn)
        self.nlog.add(entry.txn, entry.vc, entry.write_keys)
        self.locks.release(entry.txn)
        self.start_precommit(entry)

    def _truncate(self, head: Version) -> Version:
        limit = self.config.history_limit
        if limit is None:
            return head
        kept = list(head.chain())[:limit]
        if len(kept) == sum(1 for _ in head.chain()):
            return head
        rebuilt: Version | None = None
        for version in reversed(kept):
            rebuilt = Version(version.value, version.vc, version.writer, rebuilt)
        return rebuilt

    # -- pre-commit ------------------------------------------------------------

    def start_precommit(self, entry: CommitQueueEntry) -> None:
        i = self.index
        marker = SnapshotQueueEntry(entry.txn, entry.vc[i], EntryKind.WRITE)
        for key in entry.write_keys:
            self._enqueue(key, marker)
            for reader in sorted(entry.propagated, key=lambda e: e.sort_key):
                if reader.txn in self._removed:
                    continue
                self._enqueue(
                    key,
                    SnapshotQueueEntry(reader.txn, reader.insertion_snapshot, EntryKind.READ),
                    propagated=True,
                )
        self._precommit[entry.txn] = _PrecommitState(
            marker, entry.vc, entry.write_keys, entry.coordinator, self.net.now
        )
        self.end_precommit(entry.txn)

    def blocking_readers(self, txn: TxnId) -> list[SnapshotQueueEntry]:
        state = self._precommit[txn]
        blocking: list[SnapshotQueueEntry] = []
        for key in state.keys:
            blocking.extend(self._queue(key).readers_before(state.entry))
        return blocking

    def end_precommit(self, txn: TxnId) -> None:
        state = self._precommit.get(txn)
        if state is None or self.blocking_readers(txn):
            return
        del self._precommit[txn]
        for key in state.keys:
            self._queue(key).remove(txn, EntryKind.WRITE)
            self._trace(EV_DEQUEUE, txn, key=key, kind=str(EntryKind.WRITE))
            self._drop_if_empty(key)
        snapshot = state.entry.insertion_snapshot
        waited = self.net.now - state.installed_at
        self._trace(EV_ACK, txn, snapshot=snapshot, waited=waited)
        self.send(state.coordinator, Ack(txn, snapshot, state.installed_at, waited))

    # -- reads -----------------------------------------------------------------

    def _on_read_request(self, message: Message) -> None:
        self.handle_read_request(message.payload, message.sender)

    def handle_read_request(self, request: ReadRequest, sender: int, attempt: int = 0) -> None:
        if request.txn in self._removed:
            # The transaction finished before this (slower) replica saw the read.
            return
        key = request.key
        if request.is_update:
            queue = self.squeues.get(key)
            propagated = frozenset(queue.ro) if queue else frozenset()
            head = self.store[key]
            self._reply_read(request, sender, head, self.most_recent_vc, propagated)
            return
        if self._starving_writer(key) and self._backoff(request, sender, attempt):
            return
        i = self.index
        t_vc = request.vc
        if not request.has_read[i] and self.most_recent_vc[i] < t_vc[i]:
            self._trace(EV_DEFER, request.txn, key=key, required=t_vc[i])
            self._parked.append(_ParkedRead(request, sender, t_vc[i]))
            return
        self._serve_read_only(request, sender)

    def _starving_writer(self, key: int) -> bool:
        """True iff the writer of *key*'s newest version is held in pre-commit past the threshold."""
        state = self._precommit.get(self.store[key].writer)
        if state is None:
            return False
        return self.net.now - state.installed_at > to_ticks(self.config.starvation_threshold)

    def _backoff(self, request: ReadRequest, sender: int, attempt: int) -> bool:
        """Re-run the read after a doubling delay; False once a capped delay was served."""
        initial, cap = self.config.backoff_initial, self.config.backoff_max
        if attempt > 0 and initial * 2 ** (attempt - 1) >= cap:
            return False
        delay = min(initial * 2**attempt, cap)
        self._trace(EV_BACKOFF, request.txn, key=request.key, delay=to_ticks(delay))
        self.net.call_later(to_ticks(delay), self.handle_read_request, request, sender, attempt + 1)
        return True

    def _resume_parked(self) -> None:
        if not self._parked:
            return
        i = self.index
        current = self.most_recent_vc[i]
        ready = [p for p in self._parked if p.required <= current]
        if not ready:
            return
        self._parked = [p for p in self._parked if p.required > current]
        for parked in ready:
            if parked.request.txn in self._removed:
                continue
            self._serve_read_only(parked.request, parked.sender)

    def visible_clocks(
        self,
        t_vc: VectorClock,
        has_read: tuple[bool, ...],
        excluded: Iterable[TxnId] = (),
    ) -> list[VectorClock]:
        """Logged clocks within the has_read bounds of t_vc, minus excluded writers."""
        bounds = [w for w, seen in enumerate(has_read) if seen]
        skip = set(excluded)
        return [
            entry.vc
            for entry in self.nlog
            if entry.txn not in skip and all(entry.vc[w] <= t_vc[w] for w in bounds)
        ]

    def excluded_writers(self, key: int, t_vc: VectorClock) -> set[TxnId]:
        """Pre-committing writers of *key* whose snapshot lies beyond t_vc here."""
        queue = self.squeues.get(key)
        if queue is None:
            return set()
        i = self.index
        return {e.txn for e in queue.up if e.insertion_snapshot > t_vc[i]}

    def select_version(
        self,
        key: int,
        max_vc: VectorClock,
        has_read: tuple[bool, ...],
        excluded: Iterable[TxnId] = (),
    ) -> Version:
        """Newest version within the has_read bounds of *max_vc* and not excluded."""
        bounds = [w for w, seen in enumerate(has_read) if seen]
        skip = set(excluded)
        oldest = None
        for version in self.store[key].chain():
            oldest = version
            if version.writer in skip:
                continue
            if any(version.vc[w] > max_vc[w] for w in bounds):
                continue
            return version
        _LOGGER.warning(
            "Node %d: no admissible version of key %d retained, returning oldest", self.index, key
        )
        return oldest

    def _serve_read_only(self, request: ReadRequest, sender: int) -> None:
        i = self.index
        key = request.key
        t_vc = request.vc
        if request.has_read[i]:
            max_vc = t_vc
            excluded: set[TxnId] = set()
        else:
            excluded = self.excluded_writers(key, t_vc)
            visible = self.visible_clocks(t_vc, request.has_read, excluded)
            max_vc = vc_join_all(visible, len(t_vc))
        self._enqueue(key, SnapshotQueueEntry(request.txn, max_vc[i], EntryKind.READ))
        version = self.select_version(key, max_vc, request.has_read, excluded)
        self._reply_read(request, sender, version, max_vc, frozenset())

    def _reply_read(
        self,
        request: ReadRequest,
        sender: int,
        version: Version,
        max_vc: VectorClock,
        propagated: frozenset[SnapshotQueueEntry],
    ) -> None:
        self.send(
            sender,
            ReadReturn(
                txn=request.txn,
                key=request.key,
                seq=request.seq,
                value=version.value,
                writer=version.writer,
                version_vc=version.vc,
                max_vc=max_vc,
                propagated=propagated,
            ),
        )

    # -- garbage collection ----------------------------------------------------

    def _on_remove(self, message: Message) -> None:
        payload: Remove = message.payload
        self.handle_remove(payload.txn)

    def handle_remove(self, txn: TxnId) -> None:
        """Drop *txn*'s R entries here, forward along propagation, release writers."""
        first = txn not in self._removed
        self._removed.setdefault(txn, _RemovalState())
        affected = sorted(self._reader_keys.pop(txn, set()))
        for key in affected:
            if self._queue(key).remove(txn, EntryKind.READ) is not None:
                self._trace(EV_DEQUEUE, txn, key=key, kind=str(EntryKind.READ))
        if first:
            self._trace(EV_REMOVE, txn, keys=tuple(affected))
        self._parked = [p for p in self._parked if p.request.txn != txn]
        targets = self._forward_targets.pop(txn, set())
        for key in sorted(self._propagated_keys.pop(txn, set())):
            targets.update(self.pmap.replicas(key))
        targets.discard(self.index)
        self._forward_remove(txn, targets)
        writers: set[TxnId] = set()
        for key in affected:
            queue = self.squeues.get(key)
            if queue is not None:
                writers.update(e.txn for e in queue.up)
            self._drop_if_empty(key)
        for writer in sorted(writers):
            self.end_precommit(writer)

    def _forward_remove(self, txn: TxnId, targets: Iterable[int]) -> None:
        state = self._removed.setdefault(txn, _RemovalState())
        for dest in sorted(set(targets) - state.forwarded - {self.index}):
            state.forwarded.add(dest)
            self._trace(EV_FORWARD, txn, dest=dest)
            self.send(dest, Remove(txn))

    # -- inspection ------------------------------------------------------------

    def clear_tombstones(self) -> None:
        super().clear_tombstones()
        self._removed.clear()
        self._forward_targets.clear()

    def is_quiescent(self) -> bool:
        return (
            super().is_quiescent()
            and not self.squeues
            and not self.commit_q
            and not self._precommit
            and not self._prepared
            and not self._parked
        )

    def dump(self) -> dict[str, Any]:
        data = super().dump()
        data.update(
            {
                "node_vc": str(self.node_vc),
                "most_recent_vc": str(self.most_recent_vc),
                "commit_q": [(str(e.txn), str(e.vc), str(e.status)) for e in self.commit_q],
                "squeues": {
                    key: {
                        "ro": [(str(e.txn), e.insertion_snapshot) for e in q.ro],
                        "up": [(str(e.txn), e.insertion_snapshot) for e in q.up],
                    }
                    for key, q in sorted(self.squeues.items())
                },
                "parked_reads": [str(p.request.txn) for p in self._parked],
            }
        )
        return data
