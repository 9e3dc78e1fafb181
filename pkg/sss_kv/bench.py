"""Benchmark harness: closed-loop clients, metrics, sweeps."""

from __future__ import annotations

import csv
import json
import logging
import random
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .checker import CheckReport, brute_force_external_order, build_dsg, check_trace, detect_cycle
from .cluster import Cluster, CommitBudget, TxnSample
from .config import BenchConfig, parse_config
from .const import BRUTE_FORCE_LIMIT, KEY_PRESETS, PROTOCOL_SSS, READ_ONLY_PRESETS, TICKS_PER_UNIT
from .exceptions import SimulationStalledError
from .workload import script_stream

_LOGGER = logging.getLogger(__name__)

PERCENTILES = (50, 90, 99)


def _units(ticks: float) -> float:
    return float(ticks) / TICKS_PER_UNIT


@dataclass
class LatencySummary:
    count: int = 0
    mean: float = 0.0
    percentiles: dict[str, float] = field(default_factory=dict)

    @classmethod
    def of(cls, values: Iterable[int]) -> LatencySummary:
        data = np.asarray(list(values), dtype=float) / TICKS_PER_UNIT
        if data.size == 0:
            return cls()
        points = np.percentile(data, PERCENTILES)
        return cls(
            count=int(data.size),
            mean=float(data.mean()),
            percentiles={f"p{p}": float(v) for p, v in zip(PERCENTILES, points)},
        )

    def to_dict(self) -> dict[str, Any]:
        return {"count": self.count, "mean": self.mean, **self.percentiles}


@dataclass
class MetricsReport:
    protocol: str
    seed: int
    commits_update: int = 0
    commits_read_only: int = 0
    aborts_update: int = 0
    aborts_read_only: int = 0
    elapsed: float = 0.0  # units, until the last reply
    throughput: float = 0.0  # committed transactions per unit
    latency_update: LatencySummary = field(default_factory=LatencySummary)
    latency_read_only: LatencySummary = field(default_factory=LatencySummary)
    internal_latency: LatencySummary = field(default_factory=LatencySummary)
    external_wait: LatencySummary = field(default_factory=LatencySummary)
    queue_wait: LatencySummary = field(default_factory=LatencySummary)
    queue_wait_fraction: float = 0.0
    external_wait_fraction: float = 0.0
    trace_digest: str = ""
    trace_path: str | None = None
    gc_clean: bool = True
    check: CheckReport | None = None
    run: dict[str, Any] = field(default_factory=dict)
    samples: list[TxnSample] = field(default_factory=list, repr=False)

    @property
    def commits(self) -> int:
        return self.commits_update + self.commits_read_only

    @property
    def consistent(self) -> bool | None:
        return None if self.check is None else self.check.consistent

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "commits": {"update": self.commits_update, "read_only": self.commits_read_only},
            "aborts": {"update": self.aborts_update, "read_only": self.aborts_read_only},
            "elapsed": self.elapsed,
            "throughput": self.throughput,
            "latency": {
                "update": self.latency_update.to_dict(),
                "read_only": self.latency_read_only.to_dict(),
                "internal": self.internal_latency.to_dict(),
                "external_wait": self.external_wait.to_dict(),
                "queue_wait": self.queue_wait.to_dict(),
            },
            "queue_wait_fraction": self.queue_wait_fraction,
            "external_wait_fraction": self.external_wait_fraction,
            "trace_digest": self.trace_digest,
            "trace_path": self.trace_path,
            "gc_clean": self.gc_clean,
            "check": self.check.to_dict() if self.check is not None else None,
            "run": self.run,
        }


def build_cluster(cfg: BenchConfig) -> Cluster:
    """Cluster plus one closed-loop client per (node, slot)."""
    cluster = Cluster(
        cfg.placement,
        protocol=cfg.protocol,
        sim=cfg.sim,
        node_config=cfg.node,
        coordinator_config=cfg.coordinator,
        validate_read_only=cfg.validate_read_only,
    )
    budget = CommitBudget(cfg.workload.duration)
    client_id = 0
    for node in range(cfg.placement.num_nodes):
        for _ in range(cfg.workload.clients_per_node):
            scripts = script_stream(cfg.workload, cluster.pmap, client_id, node)
            cluster.add_client(node, scripts, budget, random.Random(f"retry:{cfg.seed}:{client_id}"))
            client_id += 1
    return cluster


def summarize(cluster: Cluster, cfg: BenchConfig) -> MetricsReport:
    report = MetricsReport(protocol=cfg.protocol, seed=cfg.seed)
    for client in cluster.clients:
        report.commits_update += client.stats.commits_update
        report.commits_read_only += client.stats.commits_read_only
        report.aborts_update += client.stats.aborts_update
        report.aborts_read_only += client.stats.aborts_read_only
    samples = sorted(cluster.samples(), key=lambda s: (s.external, s.txn))
    report.samples = samples
    if samples:
        report.elapsed = _units(max(s.external for s in samples))
    if report.elapsed > 0:
        report.throughput = report.commits / report.elapsed
    updates = [s for s in samples if s.is_update]
    report.latency_update = LatencySummary.of(s.latency for s in updates)
    report.latency_read_only = LatencySummary.of(s.latency for s in samples if not s.is_update)
    report.internal_latency = LatencySummary.of(s.internal_latency for s in updates)
    report.external_wait = LatencySummary.of(s.external_wait for s in updates)
    report.queue_wait = LatencySummary.of(s.queue_wait for s in updates)
    total = sum(s.latency for s in updates)
    if total:
        report.queue_wait_fraction = sum(s.queue_wait for s in updates) / total
        report.external_wait_fraction = sum(s.external_wait for s in updates) / total
    report.trace_digest = cluster.trace.digest()
    report.gc_clean = cluster.gc_clean()
    return report


def run_benchmark(
    cfg: BenchConfig,
    *,
    check: bool = True,
    trace_path: str | Path | None = None,
) -> MetricsReport:
    _LOGGER.info(
        "Starting %s benchmark: %d nodes, %d keys, %s%% read-only, seed %d",
        cfg.protocol,
        cfg.placement.num_nodes,
        cfg.placement.num_keys,
        cfg.workload.read_only_pct,
        cfg.seed,
    )
    cluster = build_cluster(cfg)
    run = cluster.run()
    report = summarize(cluster, cfg)
    report.run = run.to_dict()
    if trace_path is not None:
        report.trace_path = str(cluster.trace.write(trace_path))
    if check:
        report.check = check_trace(cluster.trace.records)
        if not report.check.consistent:
            _LOGGER.error("Seed %d produced an inconsistent history", cfg.seed)
    if not report.gc_clean:
        _LOGGER.error("Snapshot-queues or lock tables not empty after the run: %s", cluster.dump())
    _LOGGER.info(
        "Finished: %d commits in %.1f units (%.2f/unit), %d read-only aborts",
        report.commits,
        report.elapsed,
        report.throughput,
        report.aborts_read_only,
    )
    return report


def write_report(report: MetricsReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    return path


def write_samples(samples: Iterable[TxnSample], path: str | Path) -> Path:
    """Per-transaction latency samples, in units."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["txn", "client", "type", "begin", "internal", "external", "latency", "queue_wait", "attempts"]
        )
        for s in samples:
            writer.writerow(
                [
                    str(s.txn),
                    s.client,
                    "update" if s.is_update else "read_only",
                    _units(s.begin),
                    _units(s.internal),
                    _units(s.external),
                    _units(s.latency),
                    _units(s.queue_wait),
                    s.attempts,
                ]
            )
    return path


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepReport:
    runs: int = 0
    violations: list[dict[str, Any]] = field(default_factory=list)
    read_only_aborts: int = 0
    stalls: list[dict[str, Any]] = field(default_factory=list)
    gc_failures: list[int] = field(default_factory=list)
    disagreements: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.violations or self.stalls or self.gc_failures or self.disagreements or self.read_only_aborts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "violations": self.violations,
            "read_only_aborts": self.read_only_aborts,
            "stalls": self.stalls,
            "gc_failures": self.gc_failures,
            "disagreements": self.disagreements,
            "ok": self.ok,
        }


def random_config(seed: int, *, protocol: str = PROTOCOL_SSS, duration: int = 200) -> BenchConfig:
    """One randomized desk-scale configuration, a pure function of *seed*."""
    rng = random.Random(f"sweep:{seed}")
    return parse_config(
        {
            "num_nodes": rng.randint(4, 8),
            "num_keys": rng.randint(100, 1000),
            "replication_degree": 2,
            "read_only_pct": rng.choice(READ_ONLY_PRESETS),
            "ro_txn_len": [2, rng.randint(2, 4)],
            "clients_per_node": rng.randint(2, 6),
            "duration": duration,
            "seed": seed,
            "protocol": protocol,
        }
    )


def run_sweep(runs: int, *, base_seed: int = 0, duration: int = 200, protocol: str = PROTOCOL_SSS) -> SweepReport:
    """Run *runs* randomized configurations through the checker."""
    sweep = SweepReport()
    for offset in range(runs):
        seed = base_seed + offset
        cfg = random_config(seed, protocol=protocol, duration=duration)
        try:
            report = run_benchmark(cfg)
        except SimulationStalledError as err:
            sweep.stalls.append({"seed": seed, "dump": err.dump})
            continue
        finally:
            sweep.runs += 1
        if protocol == PROTOCOL_SSS:
            sweep.read_only_aborts += report.aborts_read_only
        if not report.consistent:
            sweep.violations.append({"seed": seed, "check": report.check.to_dict()})
        if not report.gc_clean:
            sweep.gc_failures.append(seed)
    return sweep


def small_config(seed: int, *, protocol: str = PROTOCOL_SSS) -> BenchConfig:
    """A contended run small enough for the brute-force search."""
    rng = random.Random(f"small:{seed}")
    return parse_config(
        {
            "num_nodes": rng.randint(2, 4),
            "num_keys": rng.randint(3, 6),
            "replication_degree": 2,
            "read_only_pct": rng.choice(READ_ONLY_PRESETS),
            "ro_txn_len": [2, 3],
            "clients_per_node": 1,
            "duration": rng.randint(2, BRUTE_FORCE_LIMIT),
            "seed": seed,
            "protocol": protocol,
        }
    )


def oracle_agreement(runs: int, *, base_seed: int = 0, protocol: str = PROTOCOL_SSS) -> SweepReport:
    """Compare the graph verdict with the brute-force search on small runs."""
    sweep = SweepReport()
    for offset in range(runs):
        seed = base_seed + offset
        cfg = small_config(seed, protocol=protocol)
        cluster = build_cluster(cfg)
        cluster.run()
        sweep.runs += 1
        records = cluster.trace.records
        acyclic = detect_cycle(build_dsg(records)) is None
        ordered = brute_force_external_order(records) is not None
        if acyclic != ordered:
            _LOGGER.error("Oracles disagree on seed %d: graph acyclic=%s, order found=%s", seed, acyclic, ordered)
            sweep.disagreements.append(seed)
        if not acyclic:
            sweep.violations.append({"seed": seed})
    return sweep


def with_protocol(cfg: BenchConfig, protocol: str) -> BenchConfig:
    return replace(cfg, workload=replace(cfg.workload, protocol=protocol))


def preset_configs(cfg: BenchConfig) -> list[BenchConfig]:
    """The key-space by read-only-share grid, everything else taken from *cfg*."""
    grid = []
    for num_keys in KEY_PRESETS:
        placement = replace(cfg.placement, num_keys=num_keys)
        for read_only_pct in READ_ONLY_PRESETS:
            workload = replace(cfg.workload, num_keys=num_keys, read_only_pct=read_only_pct)
            grid.append(replace(cfg, placement=placement, workload=workload))
    return grid
