"""Tests for sss_kv/core_types.py and sss_kv/codec.py.

Covers:
  - VectorClock join / leq / increment and length checks, plus join and order laws on random clocks
  - TxnId ordering and rendering
  - TxnDescriptor status transitions (abort-freedom of read-only txns)
  - SnapshotQueueEntry ordering
  - Message priorities
  - codec encoding of messages with nested clocks and queue entries
"""

from __future__ import annotations

import random

import pytest

from sss_kv.codec import decode_message, dumps, encode_message
from sss_kv.core_types import (
    GENESIS_TXN,
    EntryKind,
    Message,
    Prepare,
    PriorityClass,
    ReadRecord,
    ReadRequest,
    Remove,
    SnapshotQueueEntry,
    TxnDescriptor,
    TxnId,
    TxnStatus,
    Version,
    VectorClock,
    vc_join,
    vc_join_all,
    vc_leq,
)
from sss_kv.exceptions import ConfigurationError, TransactionStateError

from .conftest import SEEDS, vc


# ---------------------------------------------------------------------------
# VectorClock
# ---------------------------------------------------------------------------


class TestVectorClock:
    """Tests for VectorClock and the vc_* helpers."""

    def test_join_is_entrywise_max(self):
        assert vc_join(vc(5, 4), vc(3, 7)) == vc(5, 7)

    def test_join_commit_example(self):
        assert vc_join(vc(3, 7), vc(3, 8)) == vc(3, 8)

    def test_join_length_mismatch_is_fatal(self):
        with pytest.raises(ConfigurationError):
            vc_join(vc(1, 2), vc(1, 2, 3))

    def test_leq(self):
        assert vc_leq(vc(3, 7), vc(3, 8))
        assert not vc_leq(vc(4, 7), vc(3, 8))
        assert vc_leq(vc(2, 2), vc(2, 2))

    def test_leq_length_mismatch_is_fatal(self):
        with pytest.raises(ConfigurationError):
            vc_leq(vc(1), vc(1, 1))

    def test_negative_entries_rejected(self):
        with pytest.raises(ConfigurationError):
            VectorClock.of([1, -1])

    def test_increment_and_with_entry(self):
        clock = vc(3, 7, 9)
        assert clock.increment(1) == vc(3, 8, 9)
        assert clock.with_entry(2, 11) == vc(3, 7, 11)
        assert clock == vc(3, 7, 9)

    def test_join_all_of_nothing_is_zero(self):
        assert vc_join_all([], 3) == VectorClock.zeros(3)

    def test_join_all(self):
        assert vc_join_all([vc(1, 0, 4), vc(0, 6, 2), vc(3, 3, 3)], 3) == vc(3, 6, 4)

    def test_incomparable_clocks(self):
        a, b = vc(5, 4), vc(3, 7)
        assert not vc_leq(a, b)
        assert not vc_leq(b, a)
        assert vc_leq(a, vc_join(a, b)) and vc_leq(b, vc_join(a, b))

    def test_join_and_leq_laws_on_random_clocks(self):
        rng = random.Random(SEEDS[0])

        def _random() -> VectorClock:
            return VectorClock.of(rng.randint(0, 4) for _ in range(3))

        for _ in range(1000):
            a, b, c = _random(), _random(), _random()
            assert vc_join(a, b) == vc_join(b, a)
            assert vc_join(vc_join(a, b), c) == vc_join(a, vc_join(b, c))
            assert vc_join(a, a) == a
            assert vc_leq(a, a)
            if vc_leq(a, b) and vc_leq(b, a):
                assert a == b
            if vc_leq(a, b) and vc_leq(b, c):
                assert vc_leq(a, c)
            assert vc_leq(a, b) == (vc_join(a, b) == b)

    def test_str(self):
        assert str(vc(3, 8)) == "[3,8]"


# ---------------------------------------------------------------------------
# TxnId / TxnDescriptor
# ---------------------------------------------------------------------------


class TestTxnId:
    """Tests for TxnId."""

    def test_lexicographic_order(self):
        assert TxnId(0, 9) < TxnId(1, 1) < TxnId(1, 2)

    def test_str(self):
        assert str(TxnId(2, 5)) == "T2.5"
        assert str(GENESIS_TXN) == "T_init"


def _descriptor(is_update: bool) -> TxnDescriptor:
    return TxnDescriptor(id=TxnId(0, 1), is_update=is_update, coordinator=0, num_nodes=3)


class TestTxnDescriptor:
    """Tests for TxnDescriptor status transitions and read bookkeeping."""

    def test_has_read_sized_to_cluster(self):
        assert _descriptor(False).has_read == [False, False, False]

    def test_monotone_path(self):
        d = _descriptor(True)
        for status in (
            TxnStatus.PREPARING,
            TxnStatus.INTERNALLY_COMMITTED,
            TxnStatus.PRE_COMMIT,
            TxnStatus.EXTERNALLY_COMMITTED,
        ):
            d.advance(status)
        assert d.status is TxnStatus.EXTERNALLY_COMMITTED

    def test_backwards_transition_rejected(self):
        d = _descriptor(True)
        d.advance(TxnStatus.INTERNALLY_COMMITTED)
        with pytest.raises(TransactionStateError):
            d.advance(TxnStatus.PREPARING)

    def test_update_may_abort_while_preparing(self):
        d = _descriptor(True)
        d.advance(TxnStatus.PREPARING)
        d.advance(TxnStatus.ABORTED)
        assert d.status is TxnStatus.ABORTED

    def test_update_cannot_abort_after_internal_commit(self):
        d = _descriptor(True)
        d.advance(TxnStatus.INTERNALLY_COMMITTED)
        with pytest.raises(TransactionStateError):
            d.advance(TxnStatus.ABORTED)

    def test_read_only_never_aborts(self):
        with pytest.raises(TransactionStateError):
            _descriptor(False).advance(TxnStatus.ABORTED)

    def test_read_only_abort_allowed_when_protocol_permits(self):
        d = _descriptor(False)
        d.advance(TxnStatus.ABORTED, read_only_may_abort=True)
        assert d.status is TxnStatus.ABORTED

    def test_nothing_follows_abort(self):
        d = _descriptor(True)
        d.advance(TxnStatus.ABORTED)
        with pytest.raises(TransactionStateError):
            d.advance(TxnStatus.EXTERNALLY_COMMITTED)

    def test_read_writers_keep_the_first_read_of_each_key(self):
        d = _descriptor(True)
        d.read_set.append(ReadRecord(4, b"a", vc(0, 1, 0), TxnId(1, 1), 1))
        d.read_set.append(ReadRecord(5, b"b", None, GENESIS_TXN, 2))
        d.read_set.append(ReadRecord(4, b"c", vc(0, 2, 0), TxnId(1, 2), 1))
        assert d.read_keys == [4, 5]
        assert d.read_writers == {4: TxnId(1, 1), 5: GENESIS_TXN}


# ---------------------------------------------------------------------------
# Queue entries, versions, messages
# ---------------------------------------------------------------------------


class TestSnapshotQueueEntry:
    """Tests for SnapshotQueueEntry.sort_key."""

    def test_orders_by_snapshot_first(self):
        a = SnapshotQueueEntry(TxnId(3, 1), 7, EntryKind.WRITE)
        b = SnapshotQueueEntry(TxnId(0, 1), 8, EntryKind.READ)
        assert a.sort_key < b.sort_key

    def test_reader_precedes_writer_at_equal_snapshot(self):
        reader = SnapshotQueueEntry(TxnId(3, 1), 8, EntryKind.READ)
        writer = SnapshotQueueEntry(TxnId(0, 1), 8, EntryKind.WRITE)
        assert reader.sort_key < writer.sort_key


class TestVersion:
    def test_chain_walks_newest_first(self):
        v0 = Version(b"", VectorClock.zeros(2), GENESIS_TXN)
        v1 = Version(b"a", vc(0, 1), TxnId(1, 1), v0)
        v2 = Version(b"b", vc(0, 2), TxnId(1, 2), v1)
        assert [v.writer for v in v2.chain()] == [TxnId(1, 2), TxnId(1, 1), GENESIS_TXN]


class TestMessage:
    """Tests for Message priority and accessors."""

    def test_remove_has_the_highest_priority(self):
        remove = Message(0, 1, Remove(TxnId(0, 1)))
        read = Message(0, 1, ReadRequest(TxnId(0, 1), 0, 1, vc(0, 0), (False, False), False))
        assert remove.priority == PriorityClass.REMOVE
        assert remove.priority < read.priority

    def test_txn_and_kind(self):
        msg = Message(2, 0, Remove(TxnId(1, 4)))
        assert msg.txn == TxnId(1, 4)
        assert msg.kind == "Remove"


class TestCodec:
    """Tests for the tagged-JSON message codec."""

    def test_prepare_survives_encoding(self):
        prepare = Prepare(
            txn=TxnId(1, 3),
            vc=vc(3, 7, 9),
            read_keys=(4,),
            writes=((4, b"\x00value"),),
            propagated=frozenset({SnapshotQueueEntry(TxnId(0, 2), 5, EntryKind.READ)}),
            read_writers=((4, TxnId(0, 1)),),
        )
        message = Message(1, 2, prepare)
        assert decode_message(encode_message(message)) == message

    def test_dumps_is_canonical(self):
        assert dumps({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
