"""Client-facing transaction execution: reads, buffered writes and commit."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from ._compat import StrEnum
from typing import TYPE_CHECKING, Any

from .const import REQUEST_TIMEOUT, VOTE_TIMEOUT
from .core_types import (
    Ack,
    Decide,
    Message,
    MessageKind,
    Payload,
    Prepare,
    ReadRecord,
    ReadRequest,
    ReadReturn,
    Remove,
    TxnDescriptor,
    TxnId,
    TxnStatus,
    VectorClock,
    Vote,
)
from .exceptions import (
    ConfigurationError,
    ReadOnlyWriteError,
    RequestTimeoutError,
    TransactionAbortedError,
    TransactionStateError,
)
from .simnet import SimFuture, to_ticks
from .trace import EV_ABORT, EV_BEGIN, EV_READ, EV_REPLY

if TYPE_CHECKING:
    from .node import ServerNode, SSSNode

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoordinatorConfig:
    """Coordinator timeouts, in simulated time units."""

    request_timeout: float = REQUEST_TIMEOUT
    vote_timeout: float = VOTE_TIMEOUT

    def __post_init__(self) -> None:
        if self.request_timeout <= 0 or self.vote_timeout <= 0:
            msg = "Coordinator timeouts must be positive"
            raise ConfigurationError(msg)


class Outcome(StrEnum):
    COMMITTED = "committed"
    ABORTED = "aborted"


class Transaction:
    """Handle returned by `begin`; all calls go through the coordinator."""

    def __init__(self, coordinator: CoordinatorBase, descriptor: TxnDescriptor) -> None:
        self._coordinator = coordinator
        self.descriptor = descriptor

    @property
    def id(self) -> TxnId:
        return self.descriptor.id

    @property
    def is_update(self) -> bool:
        return self.descriptor.is_update

    @property
    def status(self) -> TxnStatus:
        return self.descriptor.status

    async def read(self, key: int) -> bytes:
        return await self._coordinator.read(self.descriptor, key)

    def write(self, key: int, value: bytes) -> None:
        self._coordinator.write(self.descriptor, key, value)

    async def commit(self) -> Outcome:
        return await self._coordinator.commit(self.descriptor)

    def abort(self) -> None:
        self._coordinator.abort(self.descriptor)


@dataclass
class _VoteRound:
    participants: frozenset[int]
    future: SimFuture
    votes: dict[int, Vote] = field(default_factory=dict)

    def add(self, sender: int, vote: Vote) -> None:
        if self.future.done() or sender not in self.participants:
            return
        self.votes[sender] = vote
        if not vote.ok:
            self.future.set_result(None)
        elif len(self.votes) == len(self.participants):
            self.future.set_result(dict(self.votes))


@dataclass
class _AckRound:
    replicas: frozenset[int]
    future: SimFuture
    acks: dict[int, Ack] = field(default_factory=dict)

    def add(self, sender: int, ack: Ack) -> None:
        if self.future.done() or sender not in self.replicas:
            return
        self.acks[sender] = ack
        if len(self.acks) == len(self.replicas):
            self.future.set_result(dict(self.acks))


class CoordinatorBase:
    """Transaction bookkeeping shared by the SSS and baseline coordinators."""

    READ_ONLY_MAY_ABORT = False

    def __init__(self, node: ServerNode, config: CoordinatorConfig | None = None) -> None:
        self.node = node
        self.index = node.index
        self.net = node.net
        self.pmap = node.pmap
        self.config = config or CoordinatorConfig()
        self.completed: list[TxnDescriptor] = []
        self._local_seq = 0
        self._read_seq = 0
        self._reads: dict[tuple[TxnId, int], SimFuture] = {}
        self._votes: dict[TxnId, _VoteRound] = {}
        self._acks: dict[TxnId, _AckRound] = {}
        node.coordinator = self

    # -- plumbing --------------------------------------------------------------

    def send(self, dest: int, payload: Payload) -> None:
        self.net.send(Message(self.index, dest, payload))

    def _trace(self, event: str, txn: TxnId, **data: Any) -> None:
        self.net.trace.record(self.net.now, event, self.index, txn, **data)

    def deliver(self, message: Message) -> None:
        payload = message.payload
        if message.kind is MessageKind.READ_RETURN:
            future = self._reads.pop((payload.txn, payload.seq), None)
            if future is not None and not future.done():
                future.set_result((message.sender, payload))
        elif message.kind is MessageKind.VOTE:
            round_ = self._votes.get(payload.txn)
            if round_ is not None:
                round_.add(message.sender, payload)
        elif message.kind is MessageKind.ACK:
            round_ = self._acks.get(payload.txn)
            if round_ is not None:
                round_.add(message.sender, payload)
        else:
            _LOGGER.warning("Coordinator %d ignores %s", self.index, message.kind)

    # -- lifecycle -------------------------------------------------------------

    def begin(self, is_update: bool) -> Transaction:
        self._local_seq += 1
        descriptor = TxnDescriptor(
            id=TxnId(self.index, self._local_seq),
            is_update=is_update,
            coordinator=self.index,
            num_nodes=self.pmap.num_nodes,
            begin_time=self.net.now,
        )
        self._on_begin(descriptor)
        self._trace(EV_BEGIN, descriptor.id, update=is_update, vc=descriptor.vc)
        return Transaction(self, descriptor)

    def _on_begin(self, descriptor: TxnDescriptor) -> None:
        """Protocol hook run before the begin event is traced."""

    def _require_active(self, descriptor: TxnDescriptor) -> None:
        if descriptor.status is not TxnStatus.ACTIVE:
            msg = f"Transaction {descriptor.id} is {descriptor.status}, not active"
            raise TransactionStateError(msg)

    def write(self, descriptor: TxnDescriptor, key: int, value: bytes) -> None:
        self._require_active(descriptor)
        if not descriptor.is_update:
            msg = f"Write on read-only transaction {descriptor.id}"
            raise ReadOnlyWriteError(msg)
        self.pmap.replicas(key)
        descriptor.write_set[key] = bytes(value)

    def abort(self, descriptor: TxnDescriptor) -> None:
        """Client-requested abort of an active update transaction."""
        self._require_active(descriptor)
        self._abort(descriptor, "client abort")

    def _abort(self, descriptor: TxnDescriptor, reason: str) -> None:
        descriptor.advance(TxnStatus.ABORTED, read_only_may_abort=self.READ_ONLY_MAY_ABORT)
        self._trace(EV_ABORT, descriptor.id, reason=reason, update=descriptor.is_update)
        self.net.note_progress("aborted_update" if descriptor.is_update else "aborted_read_only")
        self.completed.append(descriptor)

    def _reply(self, descriptor: TxnDescriptor) -> None:
        """External commit: the client learns the outcome now."""
        descriptor.advance(TxnStatus.EXTERNALLY_COMMITTED)
        descriptor.external_commit_time = self.net.now
        if descriptor.internal_commit_time is None:
            descriptor.internal_commit_time = self.net.now
        self._trace(
            EV_REPLY,
            descriptor.id,
            committed=True,
            update=descriptor.is_update,
            internal=descriptor.internal_commit_time,
            queue_wait=descriptor.queue_wait,
            vc=descriptor.vc,
        )
        self.net.note_progress(
            "committed_update" if descriptor.is_update else "committed_read_only"
        )
        self.completed.append(descriptor)

    # -- message rounds ----------------------------------------------------------

    async def _fetch(
        self, descriptor: TxnDescriptor, key: int, build: Any
    ) -> tuple[int, ReadReturn]:
        """Send a read to every replica of *key*; the first answer wins.

        Update transactions abort on timeout, read-only ones retry.
        """
        replicas = self.pmap.replicas(key)
        while True:
            self._read_seq += 1
            seq = self._read_seq
            future = self.net.create_future()
            self._reads[(descriptor.id, seq)] = future
            request = build(seq)
            for dest in replicas:
                self.send(dest, request)
            try:
                return await self.net.with_timeout(
                    future, to_ticks(self.config.request_timeout), f"read of key {key}"
                )
            except RequestTimeoutError as err:
                self._reads.pop((descriptor.id, seq), None)
                if descriptor.is_update:
                    self._abort(descriptor, "read timeout")
                    raise TransactionAbortedError(descriptor.id, "read timeout") from err
                _LOGGER.debug("Read of key %d by %s timed out, retrying", key, descriptor.id)

    async def _prepare_round(
        self, descriptor: TxnDescriptor, participants: tuple[int, ...], prepare: Prepare
    ) -> dict[int, Vote] | None:
        """Collect votes; None means some participant refused or the round timed out."""
        round_ = _VoteRound(frozenset(participants), self.net.create_future())
        self._votes[descriptor.id] = round_
        for dest in participants:
            self.send(dest, prepare)
        try:
            return await self.net.with_timeout(
                round_.future, to_ticks(self.config.vote_timeout), f"prepare of {descriptor.id}"
            )
        except RequestTimeoutError:
            return None
        finally:
            del self._votes[descriptor.id]

    def _broadcast_decide(
        self, descriptor: TxnDescriptor, participants: tuple[int, ...], vc: VectorClock | None, commit: bool
    ) -> None:
        decide = Decide(descriptor.id, vc, commit)
        for dest in participants:
            self.send(dest, decide)

    async def _collect_acks(self, descriptor: TxnDescriptor, replicas: tuple[int, ...]) -> dict[int, Ack]:
        round_ = _AckRound(frozenset(replicas), self.net.create_future())
        self._acks[descriptor.id] = round_
        try:
            return await round_.future
        finally:
            del self._acks[descriptor.id]

    def _finish_acks(self, descriptor: TxnDescriptor, acks: dict[int, Ack]) -> None:
        descriptor.internal_commit_time = max(ack.installed_at for ack in acks.values())
        descriptor.queue_wait = max(ack.queue_wait for ack in acks.values())

    # -- protocol surface ----------------------------------------------------------

    async def read(self, descriptor: TxnDescriptor, key: int) -> bytes:
        raise NotImplementedError

    async def commit(self, descriptor: TxnDescriptor) -> Outcome:
        raise NotImplementedError


class SSSCoordinator(CoordinatorBase):
    """Coordinator side of the SSS protocol."""

    node: SSSNode

    def _on_begin(self, descriptor: TxnDescriptor) -> None:
        if descriptor.is_update:
            descriptor.vc = self.node.most_recent_vc

    async def read(self, descriptor: TxnDescriptor, key: int) -> bytes:
        self._require_active(descriptor)
        if key in descriptor.write_set:
            return descriptor.write_set[key]
        self.pmap.replicas(key)
        if descriptor.vc is None:
            # First read of a read-only transaction fixes its starting snapshot.
            descriptor.vc = self.node.most_recent_vc

        def build(seq: int) -> ReadRequest:
            return ReadRequest(
                txn=descriptor.id,
                key=key,
                seq=seq,
                vc=descriptor.vc,
                has_read=tuple(descriptor.has_read),
                is_update=descriptor.is_update,
            )

        sender, reply = await self._fetch(descriptor, key, build)
        descriptor.has_read[sender] = True
        descriptor.vc = descriptor.vc.join(reply.max_vc)
        descriptor.read_set.append(ReadRecord(key, reply.value, reply.version_vc, reply.writer, sender))
        descriptor.propagated_set.update(reply.propagated)
        self._trace(EV_READ, descriptor.id, key=key, writer=reply.writer, server=sender, seq=reply.seq)
        return reply.value

    async def commit(self, descriptor: TxnDescriptor) -> Outcome:
        self._require_active(descriptor)
        if not descriptor.is_update:
            return self._commit_read_only(descriptor)
        return await self._commit_update(descriptor)

    def _commit_read_only(self, descriptor: TxnDescriptor) -> Outcome:
        self._reply(descriptor)
        for dest in self.pmap.replicas_of(descriptor.read_keys):
            self.send(dest, Remove(descriptor.id))
        return Outcome.COMMITTED

    async def _commit_update(self, descriptor: TxnDescriptor) -> Outcome:
        read_keys = descriptor.read_keys
        write_keys = sorted(descriptor.write_set)
        participants = tuple(sorted(set(self.pmap.replicas_of([*read_keys, *write_keys])) | {self.index}))
        descriptor.advance(TxnStatus.PREPARING)
        prepare = Prepare(
            txn=descriptor.id,
            vc=descriptor.vc,
            read_keys=tuple(read_keys),
            writes=tuple((k, descriptor.write_set[k]) for k in write_keys),
            propagated=frozenset(descriptor.propagated_set),
            read_writers=tuple(descriptor.read_writers.items()),
        )
        votes = await self._prepare_round(descriptor, participants, prepare)
        if votes is None:
            self._broadcast_decide(descriptor, participants, descriptor.vc, commit=False)
            self._abort(descriptor, "prepare refused")
            return Outcome.ABORTED
        commit_vc = descriptor.vc
        for vote in votes.values():
            commit_vc = commit_vc.join(vote.vc)
        write_replicas = self.pmap.replicas_of(write_keys)
        if write_replicas:
            xact_vn = max(commit_vc[w] for w in write_replicas)
            for w in write_replicas:
                commit_vc = commit_vc.with_entry(w, xact_vn)
        descriptor.vc = commit_vc
        descriptor.advance(TxnStatus.INTERNALLY_COMMITTED)
        self._broadcast_decide(descriptor, participants, commit_vc, commit=True)
        if write_replicas:
            acks = await self._collect_acks(descriptor, write_replicas)
            descriptor.advance(TxnStatus.PRE_COMMIT)
            self._finish_acks(descriptor, acks)
        self._reply(descriptor)
        return Outcome.COMMITTED

    def abort(self, descriptor: TxnDescriptor) -> None:
        if not descriptor.is_update:
            msg = f"Read-only transaction {descriptor.id} cannot abort; commit it instead"
            raise TransactionStateError(msg)
        super().abort(descriptor)
