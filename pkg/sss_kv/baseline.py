"""2PC baseline: single-version store, every transaction validates and runs 2PC.

Read-only transactions go through the same prepare/validate round as update
transactions, so unlike SSS they can abort. With `validate_read_only=False`
they skip the round entirely and reply after their last read; that mode is
not consistent and only exists as a negative control for the checker.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .core_types import (
    GENESIS_TXN,
    Ack,
    Decide,
    Message,
    MessageKind,
    Prepare,
    ReadRecord,
    ReadRequest,
    ReadReturn,
    TxnDescriptor,
    TxnId,
    TxnStatus,
    Vote,
)
from .coordinator import CoordinatorBase, CoordinatorConfig, Outcome
from .node import INITIAL_VALUE, NodeConfig, ServerNode
from .partition_map import PartitionMap
from .simnet import SimNetwork
from .trace import EV_DECIDE, EV_INSTALL, EV_PREPARE, EV_READ

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class StoredValue:
    value: bytes
    counter: int
    writer: TxnId


@dataclass
class _BaselinePrepared:
    payload: Prepare
    coordinator: int
    write_keys: tuple[int, ...]
    read_keys: tuple[int, ...]
    voted: bool = False


class BaselineNode(ServerNode):
    """Storage node of the baseline: one version per key plus a lock table."""

    def __init__(
        self,
        index: int,
        net: SimNetwork,
        pmap: PartitionMap,
        config: NodeConfig | None = None,
    ) -> None:
        super().__init__(index, net, pmap, config)
        self.store: dict[int, StoredValue] = {
            key: StoredValue(INITIAL_VALUE, 0, GENESIS_TXN) for key in pmap.keys_on(index)
        }
        self._prepared: dict[TxnId, _BaselinePrepared] = {}
        self._handlers = {
            MessageKind.READ_REQUEST: self._on_read_request,
            MessageKind.PREPARE: self._on_prepare,
            MessageKind.DECIDE: self._on_decide,
        }

    def _on_read_request(self, message: Message) -> None:
        request: ReadRequest = message.payload
        stored = self.store[request.key]
        self.send(
            message.sender,
            ReadReturn(
                txn=request.txn,
                key=request.key,
                seq=request.seq,
                value=stored.value,
                writer=stored.writer,
                counter=stored.counter,
            ),
        )

    def _on_prepare(self, message: Message) -> None:
        payload: Prepare = message.payload
        txn = payload.txn
        if txn in self._aborted:
            self._vote(message.sender, txn, ok=False, reason="already aborted")
            return
        write_keys = self.local_keys(k for k, _ in payload.writes)
        read_keys = self.local_keys(payload.read_keys)
        self._prepared[txn] = _BaselinePrepared(payload, message.sender, write_keys, read_keys)
        self.locks.acquire(
            txn,
            exclusive=write_keys,
            shared=read_keys,
            timeout=self.lock_timeout_ticks,
            on_done=lambda granted: self._prepare_locked(txn, granted),
        )

    def validate(self, read_versions: dict[int, int], read_keys: tuple[int, ...]) -> bool:
        """True iff every local read key still holds the counter the txn saw."""
        return all(self.store[key].counter == read_versions[key] for key in read_keys)

    def _prepare_locked(self, txn: TxnId, granted: bool) -> None:
        state = self._prepared.get(txn)
        if state is None or state.voted:
            return
        state.voted = True
        reason = ""
        if not granted:
            reason = "lock timeout"
        elif not self.validate(dict(state.payload.read_versions), state.read_keys):
            reason = "validation"
        if reason:
            del self._prepared[txn]
            self.locks.release(txn)
            self._vote(state.coordinator, txn, ok=False, reason=reason)
            return
        self._vote(state.coordinator, txn, ok=True)

    def _vote(self, coordinator: int, txn: TxnId, *, ok: bool, reason: str = "") -> None:
        self._trace(EV_PREPARE, txn, ok=ok, vc=None, reason=reason)
        self.send(coordinator, Vote(txn, None, ok))

    def _on_decide(self, message: Message) -> None:
        payload: Decide = message.payload
        txn = payload.txn
        state = self._prepared.pop(txn, None)
        self._trace(EV_DECIDE, txn, commit=payload.commit, vc=None)
        if state is None:
            if payload.commit:
                _LOGGER.warning("Node %d got Decide(commit) for unknown %s", self.index, txn)
            else:
                self._aborted.add(txn)
            return
        if payload.commit and state.write_keys:
            writes = dict(state.payload.writes)
            for key in state.write_keys:
                counter = self.store[key].counter + 1
                self.store[key] = StoredValue(writes[key], counter, txn)
                self._trace(EV_INSTALL, txn, key=key, counter=counter, writer=txn)
            self.locks.release(txn)
            self.send(state.coordinator, Ack(txn, 0, self.net.now, 0))
            return
        self.locks.release(txn)

    def is_quiescent(self) -> bool:
        return super().is_quiescent() and not self._prepared


class BaselineCoordinator(CoordinatorBase):
    """Coordinator of the baseline; every commit is a full 2PC round."""

    READ_ONLY_MAY_ABORT = True

    def __init__(
        self,
        node: BaselineNode,
        config: CoordinatorConfig | None = None,
        *,
        validate_read_only: bool = True,
    ) -> None:
        super().__init__(node, config)
        self.validate_read_only = validate_read_only
        self._counters: dict[TxnId, dict[int, int]] = {}

    async def read(self, descriptor: TxnDescriptor, key: int) -> bytes:
        self._require_active(descriptor)
        if key in descriptor.write_set:
            return descriptor.write_set[key]
        seen = self._counters.setdefault(descriptor.id, {})

        def build(seq: int) -> ReadRequest:
            return ReadRequest(descriptor.id, key, seq, None, (), descriptor.is_update)

        sender, reply = await self._fetch(descriptor, key, build)
        descriptor.has_read[sender] = True
        seen.setdefault(key, reply.counter)
        descriptor.read_set.append(ReadRecord(key, reply.value, None, reply.writer, sender))
        self._trace(EV_READ, descriptor.id, key=key, writer=reply.writer, server=sender, seq=reply.seq)
        return reply.value

    async def commit(self, descriptor: TxnDescriptor) -> Outcome:
        self._require_active(descriptor)
        try:
            return await self._commit(descriptor)
        finally:
            self._counters.pop(descriptor.id, None)

    async def _commit(self, descriptor: TxnDescriptor) -> Outcome:
        if not descriptor.is_update and not self.validate_read_only:
            self._reply(descriptor)
            return Outcome.COMMITTED
        read_keys = descriptor.read_keys
        write_keys = sorted(descriptor.write_set)
        participants = tuple(sorted(set(self.pmap.replicas_of([*read_keys, *write_keys])) | {self.index}))
        seen = self._counters.get(descriptor.id, {})
        descriptor.advance(TxnStatus.PREPARING)
        prepare = Prepare(
            txn=descriptor.id,
            vc=None,
            read_keys=tuple(read_keys),
            writes=tuple((k, descriptor.write_set[k]) for k in write_keys),
            read_versions=tuple((k, seen[k]) for k in read_keys),
        )
        votes = await self._prepare_round(descriptor, participants, prepare)
        if votes is None:
            self._broadcast_decide(descriptor, participants, None, commit=False)
            self._abort(descriptor, "prepare refused")
            return Outcome.ABORTED
        descriptor.advance(TxnStatus.INTERNALLY_COMMITTED)
        self._broadcast_decide(descriptor, participants, None, commit=True)
        write_replicas = self.pmap.replicas_of(write_keys)
        if write_replicas:
            acks = await self._collect_acks(descriptor, write_replicas)
            self._finish_acks(descriptor, acks)
        self._reply(descriptor)
        return Outcome.COMMITTED
