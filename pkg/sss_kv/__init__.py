"""
SSS transactional key-value store.

Partially replicated, multi-version key-value store with externally consistent
transactions and abort-free read-only transactions, run over a deterministic
simulated network. Ships with a 2PC baseline, an external-consistency checker
and a benchmark harness.
"""

from __future__ import annotations

from .bench import MetricsReport, run_benchmark
from .checker import brute_force_external_order, build_dsg, check_trace, detect_cycle
from .cluster import Cluster
from .config import BenchConfig, load_config
from .core_types import TxnId, VectorClock, vc_join, vc_leq
from .partition_map import PartitionMap, PlacementConfig
from .simnet import SimConfig, SimNetwork
from .workload import WorkloadConfig, generate_txn

__all__ = [
    "BenchConfig",
    "Cluster",
    "MetricsReport",
    "PartitionMap",
    "PlacementConfig",
    "SimConfig",
    "SimNetwork",
    "TxnId",
    "VectorClock",
    "WorkloadConfig",
    "brute_force_external_order",
    "build_dsg",
    "check_trace",
    "detect_cycle",
    "generate_txn",
    "load_config",
    "run_benchmark",
    "vc_join",
    "vc_leq",
]
