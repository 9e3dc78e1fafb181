"""Tests for sss_kv/node.py.

Covers:
  - NodeConfig validation
  - NodeLog monotonicity
  - SnapshotQueue ordering and duplicate handling
  - Prepare validation by version identity, lock contention, aborts overtaking prepares
  - commit queue: install order under either Decide order, re-keyed entries waiting
  - read-only reads: deferral, version selection against a full scan, writer exclusion
  - pre-commit: writers wait for every earlier reader until Remove; Remove is idempotent
  - starvation back-off (keyed on the newest version, capped delay) and history truncation
"""

from __future__ import annotations

import random

import pytest

from sss_kv.core_types import (
    GENESIS_TXN,
    Ack,
    EntryKind,
    Message,
    MessageKind,
    Prepare,
    ReadRequest,
    SnapshotQueueEntry,
    TxnId,
    Version,
    VectorClock,
)
from sss_kv.exceptions import ConfigurationError
from sss_kv.node import NodeConfig, NodeLog, SnapshotQueue, SSSNode
from sss_kv.partition_map import PartitionMap, PlacementConfig
from sss_kv.simnet import SimNetwork
from sss_kv.trace import EV_BACKOFF, EV_DEFER, EV_INSTALL, EV_PREPARE

from .conftest import SEEDS, vc

_KEY = 0
_W1 = TxnId(0, 1)
_W2 = TxnId(0, 2)
_R1 = TxnId(0, 3)
_R2 = TxnId(0, 4)


class _Inbox:
    """Stands in for the coordinator colocated with node 0."""

    def __init__(self) -> None:
        self.messages: list[Message] = []

    def deliver(self, message: Message) -> None:
        self.messages.append(message)

    def of(self, kind: MessageKind) -> list:
        return [m.payload for m in self.messages if m.kind == kind]


def _make_pair(
    config: NodeConfig | None = None, num_keys: int = 1
) -> tuple[SimNetwork, SSSNode, _Inbox]:
    """Node 0 coordinates, node 1 stores every key."""
    net = SimNetwork()
    overrides = {key: (1,) for key in range(num_keys)}
    pmap = PartitionMap(PlacementConfig(2, num_keys, replication_degree=1, overrides=overrides))
    front = SSSNode(0, net, pmap)
    server = SSSNode(1, net, pmap, config)
    inbox = _Inbox()
    front.coordinator = inbox
    return net, server, inbox


def _write(server: SSSNode, txn: TxnId, value: bytes = b"v", keys: tuple[int, ...] = (_KEY,)) -> VectorClock:
    server.handle_prepare(Prepare(txn, vc(0, 0), (), tuple((key, value) for key in keys)), 0)
    commit_vc = server.node_vc
    server.handle_decide(txn, commit_vc, True)
    return commit_vc


def _read_only(txn: TxnId, t_vc: VectorClock, seq: int = 1, key: int = _KEY) -> ReadRequest:
    return ReadRequest(txn, key, seq, t_vc, (False, False), False)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


class TestNodeConfig:
    """Tests for NodeConfig validation."""

    def test_non_positive_lock_timeout_rejected(self):
        with pytest.raises(ConfigurationError):
            NodeConfig(lock_timeout=0)

    def test_backoff_bounds(self):
        with pytest.raises(ConfigurationError):
            NodeConfig(backoff_initial=8, backoff_max=4)

    def test_history_limit(self):
        with pytest.raises(ConfigurationError):
            NodeConfig(history_limit=0)


class TestNodeLog:
    def test_starts_at_initial_clock(self):
        log = NodeLog(1, vc(5, 4))
        assert log.most_recent_vc == vc(5, 4)
        assert len(log) == 1

    def test_own_entry_never_decreases(self):
        log = NodeLog(1, vc(0, 4))
        log.add(_W1, vc(0, 5), (0,))
        with pytest.raises(AssertionError):
            log.add(_W2, vc(9, 3), (0,))
        assert log.clocks() == [vc(0, 4), vc(0, 5)]


class TestSnapshotQueue:
    """Tests for SnapshotQueue."""

    def test_duplicate_keeps_lower_snapshot(self):
        queue = SnapshotQueue()
        assert queue.insert(SnapshotQueueEntry(_R1, 5, EntryKind.READ))
        assert not queue.insert(SnapshotQueueEntry(_R1, 7, EntryKind.READ))
        assert queue.insert(SnapshotQueueEntry(_R1, 3, EntryKind.READ))
        assert [e.insertion_snapshot for e in queue.ro] == [3]

    def test_readers_before_writer(self):
        queue = SnapshotQueue()
        writer = SnapshotQueueEntry(_W1, 8, EntryKind.WRITE)
        queue.insert(writer)
        queue.insert(SnapshotQueueEntry(_R1, 8, EntryKind.READ))
        queue.insert(SnapshotQueueEntry(_R2, 9, EntryKind.READ))
        assert [e.txn for e in queue.readers_before(writer)] == [_R1]

    def test_remove(self):
        queue = SnapshotQueue()
        queue.insert(SnapshotQueueEntry(_R1, 1, EntryKind.READ))
        assert queue.remove(_R1, EntryKind.WRITE) is None
        assert queue.remove(_R1, EntryKind.READ) is not None
        assert queue.is_empty()


# ---------------------------------------------------------------------------
# 2PC participant
# ---------------------------------------------------------------------------


class TestPrepare:
    """Tests for SSSNode.handle_prepare and validate."""

    def test_write_installs_and_acks(self):
        net, server, inbox = _make_pair()
        commit_vc = _write(server, _W1, b"hello")
        net.run()
        assert commit_vc == vc(0, 1)
        assert server.store[_KEY].value == b"hello"
        assert server.store[_KEY].writer == _W1
        assert server.most_recent_vc == vc(0, 1)
        (vote,) = inbox.of(MessageKind.VOTE)
        assert vote.ok and vote.vc == vc(0, 1)
        (ack,) = inbox.of(MessageKind.ACK)
        assert ack == Ack(_W1, 1, 0, 0)
        assert server.is_quiescent()

    def test_stale_read_fails_validation(self):
        net, server, inbox = _make_pair()
        _write(server, _W1)
        # The clock covers the newer head; the version read is still the old one.
        stale = Prepare(_W2, vc(0, 1), (_KEY,), ((_KEY, b"x"),), read_writers=((_KEY, GENESIS_TXN),))
        server.handle_prepare(stale, 0)
        net.run()
        votes = inbox.of(MessageKind.VOTE)
        assert [v.ok for v in votes] == [True, False]
        assert server.is_quiescent()

    def test_fresh_read_passes_validation(self):
        _, server, _ = _make_pair()
        _write(server, _W1)
        assert server.validate({_KEY: _W1}, [_KEY])
        assert not server.validate({_KEY: GENESIS_TXN}, [_KEY])
        assert not server.validate({}, [_KEY])
        assert server.validate({}, [])

    def test_validate_matches_chain_head(self):
        for seed in SEEDS:
            rng = random.Random(seed)
            _, server, _ = _make_pair()
            for seq in range(1, rng.randint(1, 6)):
                _write(server, TxnId(rng.randrange(2), seq))
            chain = list(server.store[_KEY].chain())
            for _ in range(20):
                if rng.random() < 0.2:
                    read = TxnId(1, 99)
                else:
                    read = rng.choice(chain).writer
                expected = read == chain[0].writer
                # key 1 is not stored here and never affects the outcome
                assert server.validate({_KEY: read, 1: TxnId(1, 98)}, [_KEY, 1]) is expected

    def test_abort_overtaking_prepare(self):
        net, server, inbox = _make_pair()
        server.handle_decide(_W1, None, False)
        server.handle_prepare(Prepare(_W1, vc(0, 0), (), ((_KEY, b"x"),)), 0)
        net.run()
        (vote,) = inbox.of(MessageKind.VOTE)
        assert not vote.ok
        assert server.store[_KEY].writer == GENESIS_TXN

    def test_abort_after_prepare_releases_locks(self):
        _, server, _ = _make_pair()
        server.handle_prepare(Prepare(_W1, vc(0, 0), (), ((_KEY, b"x"),)), 0)
        assert server.locks.holds(_W1)
        server.handle_decide(_W1, None, False)
        assert not server.locks.holds(_W1)
        assert server.commit_q == []

    def test_lock_contention_has_a_single_winner(self):
        net, server, inbox = _make_pair()
        server.handle_prepare(Prepare(_W1, vc(0, 0), (), ((_KEY, b"a"),)), 0)
        server.handle_prepare(Prepare(_W2, vc(0, 0), (), ((_KEY, b"b"),)), 0)
        net.run()
        assert [(v.txn, v.ok) for v in inbox.of(MessageKind.VOTE)] == [(_W1, True), (_W2, False)]
        (refused,) = [r for r in net.trace.select(EV_PREPARE) if not r.data["ok"]]
        assert refused.txn == _W2
        assert refused.data["reason"] == "lock timeout"
        assert refused.time == 5000
        assert server.locks.holds(_W1)
        assert not server.locks.holds(_W2)

    def test_history_limit_truncates_chain(self):
        _, server, _ = _make_pair(NodeConfig(history_limit=2))
        for seq in range(1, 4):
            _write(server, TxnId(0, seq))
        assert [v.writer for v in server.store[_KEY].chain()] == [TxnId(0, 3), TxnId(0, 2)]


class TestCommitQueue:
    """Ready entries install in commit-clock order, whatever the Decide order."""

    def _prepare_two(self) -> tuple[SimNetwork, SSSNode]:
        net, server, _ = _make_pair(num_keys=2)
        server.handle_prepare(Prepare(_W1, vc(0, 0), (), ((0, b"a"),)), 0)
        server.handle_prepare(Prepare(_W2, vc(0, 0), (), ((1, b"b"),)), 0)
        return net, server

    def test_install_order_ignores_decide_order(self):
        for first, second in ((_W1, _W2), (_W2, _W1)):
            net, server = self._prepare_two()
            commit_vcs = {_W1: vc(0, 1), _W2: vc(0, 2)}
            server.handle_decide(first, commit_vcs[first], True)
            server.handle_decide(second, commit_vcs[second], True)
            net.run()
            assert [e.txn for e in server.nlog][1:] == [_W1, _W2]
            installs = [r.txn for r in net.trace.select(EV_INSTALL)]
            assert installs == [_W1, _W2]
            assert server.commit_q == []

    def test_rekeyed_entry_waits_behind_pending_one(self):
        net, server = self._prepare_two()
        server.handle_decide(_W1, vc(0, 3), True)
        assert [e.txn for e in server.commit_q] == [_W2, _W1]
        assert server.store[0].writer == GENESIS_TXN
        server.handle_decide(_W2, vc(0, 2), True)
        net.run()
        assert [e.txn for e in server.nlog][1:] == [_W2, _W1]
        assert server.store[0].writer == _W1
        assert server.store[1].writer == _W2
        assert server.most_recent_vc == vc(0, 3)


# ---------------------------------------------------------------------------
# Read-only reads
# ---------------------------------------------------------------------------


class TestSelectVersion:
    """Tests for SSSNode.select_version."""

    def _store(self) -> SSSNode:
        _, server, _ = _make_pair()
        v0 = server.store[_KEY]
        v1 = Version(b"a", vc(0, 1), TxnId(0, 1), v0)
        v2 = Version(b"b", vc(0, 2), TxnId(0, 2), v1)
        server.store[_KEY] = Version(b"c", vc(0, 3), TxnId(0, 3), v2)
        return server

    def test_unbounded_returns_head(self):
        server = self._store()
        assert server.select_version(_KEY, vc(0, 0), (False, False)).writer == TxnId(0, 3)

    def test_bounded_by_has_read_entries(self):
        server = self._store()
        assert server.select_version(_KEY, vc(0, 2), (False, True)).writer == TxnId(0, 2)

    def test_excluded_writer_skipped(self):
        server = self._store()
        version = server.select_version(_KEY, vc(0, 3), (False, True), {TxnId(0, 3)})
        assert version.writer == TxnId(0, 2)

    def test_matches_a_scan_of_every_version(self):
        for seed in SEEDS:
            rng = random.Random(seed)
            _, server, _ = _make_pair()
            head = server.store[_KEY]
            for seq in range(1, 8):
                stamp = vc(rng.randint(0, 9), seq)
                head = Version(b"%d" % seq, stamp, TxnId(0, seq), head)
            server.store[_KEY] = head
            versions = list(head.chain())
            for _ in range(50):
                max_vc = vc(rng.randint(0, 9), rng.randint(0, 7))
                has_read = (rng.random() < 0.5, rng.random() < 0.5)
                excluded = {v.writer for v in versions if rng.random() < 0.2}
                admissible = [
                    v
                    for v in versions
                    if v.writer not in excluded
                    and all(v.vc[w] <= max_vc[w] for w in range(2) if has_read[w])
                ]
                expected = admissible[0] if admissible else versions[-1]
                assert server.select_version(_KEY, max_vc, has_read, excluded) is expected


class TestReadOnly:
    """Tests for read-only reads, pre-commit holds, Remove and starvation back-off."""

    def test_read_deferred_until_node_catches_up(self):
        net, server, inbox = _make_pair()
        server.handle_read_request(_read_only(_R1, vc(0, 1)), 0)
        assert len(net.trace.select(EV_DEFER)) == 1
        net.run()
        assert inbox.of(MessageKind.READ_RETURN) == []
        _write(server, _W1)
        net.run()
        (reply,) = inbox.of(MessageKind.READ_RETURN)
        assert reply.writer == _W1
        assert reply.max_vc == vc(0, 1)

    def test_earlier_reader_blocks_ack_until_remove(self):
        net, server, inbox = _make_pair()
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        _write(server, _W1)
        assert [e.txn for e in server.blocking_readers(_W1)] == [_R1]
        net.run()
        assert inbox.of(MessageKind.ACK) == []
        net.call_at(500, server.handle_remove, _R1)
        net.run()
        (ack,) = inbox.of(MessageKind.ACK)
        assert ack.snapshot == 1
        assert ack.queue_wait == 500
        assert server.is_quiescent()

    def test_two_readers_hold_the_writer_until_both_leave(self):
        net, server, inbox = _make_pair()
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        server.handle_read_request(_read_only(_R2, vc(0, 0)), 0)
        _write(server, _W1)
        assert [e.txn for e in server.blocking_readers(_W1)] == [_R1, _R2]
        net.call_at(500, server.handle_remove, _R1)
        net.run()
        assert inbox.of(MessageKind.ACK) == []
        assert [e.txn for e in server.blocking_readers(_W1)] == [_R2]
        net.call_at(800, server.handle_remove, _R2)
        net.run()
        (ack,) = inbox.of(MessageKind.ACK)
        assert ack.queue_wait == 800
        assert server.is_quiescent()

    def test_second_remove_is_a_no_op(self):
        net, server, inbox = _make_pair()
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        _write(server, _W1)
        server.handle_remove(_R1)
        net.run()
        records = len(net.trace)
        state = server.dump()
        server.handle_remove(_R1)
        net.run()
        assert len(net.trace) == records
        assert server.dump() == state
        assert len(inbox.of(MessageKind.ACK)) == 1
        assert server.is_quiescent()

    def test_pre_committing_writer_hidden_from_older_snapshot(self):
        net, server, inbox = _make_pair()
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        _write(server, _W1)
        server.handle_read_request(_read_only(_R2, vc(0, 0)), 0)
        net.run()
        writers = [r.writer for r in inbox.of(MessageKind.READ_RETURN)]
        assert writers == [GENESIS_TXN, GENESIS_TXN]

    def test_remove_before_read_drops_the_read(self):
        net, server, inbox = _make_pair()
        server.handle_remove(_R1)
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        net.run()
        assert inbox.of(MessageKind.READ_RETURN) == []
        assert server.squeues == {}

    def test_starving_writer_makes_readers_back_off(self):
        config = NodeConfig(starvation_threshold=1, backoff_initial=1, backoff_max=4)
        net, server, inbox = _make_pair(config)
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        _write(server, _W1)
        net.call_at(2000, server.handle_read_request, _read_only(_R2, vc(0, 0)), 0)
        net.run()
        delays = [r.data["delay"] for r in net.trace.select(EV_BACKOFF)]
        assert delays == [1000, 2000, 4000]
        assert len(inbox.of(MessageKind.READ_RETURN)) == 2

    def test_backoff_delay_is_capped(self):
        config = NodeConfig(starvation_threshold=1, backoff_initial=1, backoff_max=3)
        net, server, inbox = _make_pair(config)
        server.handle_read_request(_read_only(_R1, vc(0, 0)), 0)
        _write(server, _W1)
        net.call_at(2000, server.handle_read_request, _read_only(_R2, vc(0, 0)), 0)
        net.run()
        delays = [r.data["delay"] for r in net.trace.select(EV_BACKOFF)]
        assert delays == [1000, 2000, 3000]
        replies = [r for r in inbox.of(MessageKind.READ_RETURN) if r.txn == _R2]
        assert len(replies) == 1

    def test_backoff_only_for_the_newest_version_writer(self):
        config = NodeConfig(starvation_threshold=1, backoff_initial=1, backoff_max=4)
        net, server, inbox = _make_pair(config, num_keys=2)
        # R1 holds W1 through key 1; W2 then overwrites key 0 and leaves at once.
        server.handle_read_request(_read_only(_R1, vc(0, 0), key=1), 0)
        _write(server, _W1, keys=(0, 1))
        _write(server, _W2, keys=(0,))
        net.run()
        assert [a.txn for a in inbox.of(MessageKind.ACK)] == [_W2]
        assert [e.txn for e in server.squeues[0].up] == [_W1]
        net.call_at(2000, server.handle_read_request, _read_only(_R2, vc(0, 0), key=0), 0)
        net.run()
        assert net.trace.select(EV_BACKOFF) == []
        net.call_at(3000, server.handle_read_request, _read_only(TxnId(0, 5), vc(0, 0), key=1), 0)
        net.run()
        assert [r.txn for r in net.trace.select(EV_BACKOFF)] == [TxnId(0, 5)] * 3
        assert len(inbox.of(MessageKind.READ_RETURN)) == 3
