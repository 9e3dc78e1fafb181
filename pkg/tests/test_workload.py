"""Tests for sss_kv/workload.py.

Covers:
  - WorkloadConfig validation
  - read-only / update script shapes and transaction lengths
  - local_mix key distribution
  - per-client script streams are reproducible
"""

from __future__ import annotations

import itertools
import random

import pytest

from sss_kv.const import KEY_DIST_LOCAL_MIX, MAX_RO_TXN_LEN
from sss_kv.exceptions import ConfigurationError
from sss_kv.partition_map import PartitionMap, PlacementConfig
from sss_kv.workload import OpKind, WorkloadConfig, generate_txn, script_stream


def _draw(cfg: WorkloadConfig, count: int = 500, pmap: PartitionMap | None = None, node: int = 0):
    rng = random.Random(11)
    return [generate_txn(cfg, rng, pmap, node) for _ in range(count)]


class TestWorkloadConfig:
    def test_ro_txn_len_bounds(self):
        with pytest.raises(ConfigurationError):
            WorkloadConfig(ro_txn_len=(0, 2))
        with pytest.raises(ConfigurationError):
            WorkloadConfig(ro_txn_len=(2, MAX_RO_TXN_LEN + 1))
        with pytest.raises(ConfigurationError):
            WorkloadConfig(ro_txn_len=(4, 2))

    def test_not_enough_keys(self):
        with pytest.raises(ConfigurationError):
            WorkloadConfig(num_keys=3, ro_txn_len=(2, 4))

    def test_percentages(self):
        with pytest.raises(ConfigurationError):
            WorkloadConfig(read_only_pct=101)
        with pytest.raises(ConfigurationError):
            WorkloadConfig(local_pct=-1)

    def test_unknown_distribution_and_protocol(self):
        with pytest.raises(ConfigurationError):
            WorkloadConfig(key_distribution="zipf")
        with pytest.raises(ConfigurationError):
            WorkloadConfig(protocol="paxos")


class TestGenerateTxn:
    """Tests for generate_txn."""

    def test_all_read_only(self):
        scripts = _draw(WorkloadConfig(read_only_pct=100, ro_txn_len=(2, 4)))
        assert not any(s.is_update for s in scripts)
        assert {len(s.ops) for s in scripts} == {2, 3, 4}
        assert all(op.kind is OpKind.READ for s in scripts for op in s.ops)

    def test_all_updates_read_then_write_two_keys(self):
        scripts = _draw(WorkloadConfig(read_only_pct=0))
        for script in scripts:
            assert script.is_update
            assert [op.kind for op in script.ops] == [OpKind.READ] * 2 + [OpKind.WRITE] * 2
            assert script.read_keys == script.write_keys
            assert len(set(script.read_keys)) == 2

    def test_longest_read_only_reads_distinct_keys(self):
        scripts = _draw(WorkloadConfig(read_only_pct=100, ro_txn_len=(16, 16), num_keys=100), count=50)
        assert all(len(set(s.read_keys)) == 16 for s in scripts)

    def test_mix_follows_read_only_pct(self):
        scripts = _draw(WorkloadConfig(read_only_pct=80), count=2000)
        share = sum(not s.is_update for s in scripts) / len(scripts)
        assert share == pytest.approx(0.8, abs=0.05)

    def test_keys_within_key_space(self):
        scripts = _draw(WorkloadConfig(num_keys=7, read_only_pct=50, ro_txn_len=(2, 5)))
        assert all(0 <= k < 7 for s in scripts for k in s.read_keys)


class TestLocalMix:
    def _pmap(self) -> PartitionMap:
        return PartitionMap(PlacementConfig(4, 200, replication_degree=2))

    def test_all_local(self):
        pmap = self._pmap()
        cfg = WorkloadConfig(num_nodes=4, num_keys=200, key_distribution=KEY_DIST_LOCAL_MIX, local_pct=100)
        local = set(pmap.keys_on(2))
        assert all(set(s.read_keys) <= local for s in _draw(cfg, pmap=pmap, node=2))

    def test_all_remote(self):
        pmap = self._pmap()
        cfg = WorkloadConfig(num_nodes=4, num_keys=200, key_distribution=KEY_DIST_LOCAL_MIX, local_pct=0)
        local = set(pmap.keys_on(1))
        assert not any(set(s.read_keys) & local for s in _draw(cfg, pmap=pmap, node=1))

    def test_local_share(self):
        pmap = self._pmap()
        cfg = WorkloadConfig(num_nodes=4, num_keys=200, key_distribution=KEY_DIST_LOCAL_MIX, local_pct=70)
        local = set(pmap.keys_on(0))
        keys = [k for s in _draw(cfg, count=2000, pmap=pmap) for k in s.read_keys]
        share = sum(k in local for k in keys) / len(keys)
        assert share == pytest.approx(0.7, abs=0.05)


class TestScriptStream:
    """Tests for script_stream."""

    def test_reproducible_per_client(self):
        cfg = WorkloadConfig(seed=3)
        first = list(itertools.islice(script_stream(cfg, None, 5, 0), 20))
        again = list(itertools.islice(script_stream(cfg, None, 5, 0), 20))
        other = list(itertools.islice(script_stream(cfg, None, 6, 0), 20))
        assert first == again
        assert first != other
