"""Tests for sss_kv/baseline.py.

Covers:
  - update commit through full 2PC, counters bumped on install
  - read-only transactions validated by a prepare round
  - read-only aborts on a concurrent overwrite (and the unvalidated mode)
"""

from __future__ import annotations

from sss_kv.baseline import BaselineCoordinator, StoredValue
from sss_kv.const import PROTOCOL_BASELINE
from sss_kv.coordinator import Outcome
from sss_kv.trace import EV_ABORT, EV_PREPARE
from sss_kv.workload import Op, TxnScript

from .conftest import HOP

_READ_SKEW_RO = TxnScript(False, (Op.read(0), Op.pause(8 * HOP), Op.read(1)))
_WRITE_BOTH = TxnScript(True, (Op.write(0, b"x1"), Op.write(1, b"y1")))


def _baseline(make_cluster, **kwargs):
    return make_cluster(protocol=PROTOCOL_BASELINE, **kwargs)


class TestBaselineUpdate:
    """Tests for update transactions under the 2PC baseline."""

    def test_commit_installs_new_counter(self, make_cluster):
        cluster = _baseline(make_cluster)
        task = cluster.submit(0, TxnScript(True, (Op.read(0), Op.write(0, b"v"))))
        cluster.run()
        outcome, txn = task.result()
        assert outcome is Outcome.COMMITTED
        assert cluster.nodes[1].store[0] == StoredValue(b"v", 1, txn.id)
        assert txn.internal_commit_time == 5 * HOP
        assert txn.external_commit_time == 6 * HOP
        assert cluster.gc_clean()

    def test_coordinators_allow_read_only_aborts(self, make_cluster):
        cluster = _baseline(make_cluster)
        assert all(isinstance(c, BaselineCoordinator) for c in cluster.coordinators)
        assert BaselineCoordinator.READ_ONLY_MAY_ABORT


class TestBaselineReadOnly:
    """Tests for read-only transactions validated (or not) by a prepare round."""

    def test_read_only_runs_a_prepare_round(self, make_cluster):
        cluster = _baseline(make_cluster)
        task = cluster.submit(0, TxnScript(False, (Op.read(0), Op.read(1))))
        cluster.run()
        outcome, txn = task.result()
        assert outcome is Outcome.COMMITTED
        assert {r.node for r in cluster.trace.select(EV_PREPARE) if r.txn == txn.id} == {0, 1, 2}
        assert txn.external_commit_time == 6 * HOP

    def test_read_only_aborts_on_concurrent_overwrite(self, make_cluster):
        cluster = _baseline(make_cluster)
        ro = cluster.submit(0, _READ_SKEW_RO)
        writer = cluster.submit(0, _WRITE_BOTH, start=3 * HOP)
        cluster.run()
        assert writer.result()[0] is Outcome.COMMITTED
        outcome, txn = ro.result()
        assert outcome is Outcome.ABORTED
        (abort,) = cluster.trace.select(EV_ABORT)
        assert abort.txn == txn.id
        assert abort.data["update"] is False
        assert cluster.gc_clean()

    def test_unvalidated_read_only_commits_the_skew(self, make_cluster):
        cluster = _baseline(make_cluster, validate_read_only=False)
        ro = cluster.submit(0, _READ_SKEW_RO)
        cluster.submit(0, _WRITE_BOTH, start=3 * HOP)
        cluster.run()
        outcome, txn = ro.result()
        assert outcome is Outcome.COMMITTED
        assert [r.writer for r in txn.read_set][0] != [r.writer for r in txn.read_set][1]
        assert not [r for r in cluster.trace.select(EV_PREPARE) if r.txn == txn.id]
