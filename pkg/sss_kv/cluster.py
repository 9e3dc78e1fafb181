"""Wires nodes and coordinators onto a simulated network and drives clients."""

from __future__ import annotations

import logging
import random
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

from .baseline import BaselineCoordinator, BaselineNode
from .const import PROTOCOL_BASELINE, PROTOCOL_SSS, PROTOCOLS, RETRY_BACKOFF_MAX, RETRY_BACKOFF_MIN
from .coordinator import CoordinatorBase, CoordinatorConfig, Outcome, SSSCoordinator
from .core_types import TxnDescriptor, TxnId, VectorClock
from .exceptions import ConfigurationError, SimulationStalledError, TransactionAbortedError
from .node import NodeConfig, ServerNode, SSSNode
from .partition_map import PartitionMap, PlacementConfig
from .simnet import RunReport, SimConfig, SimNetwork, SimTask, to_ticks
from .trace import TraceLog
from .workload import OpKind, TxnScript

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class TxnSample:
    txn: TxnId
    client: int | None
    is_update: bool
    begin: int
    internal: int
    external: int
    queue_wait: int
    attempts: int

    @property
    def latency(self) -> int:
        return self.external - self.begin

    @property
    def internal_latency(self) -> int:
        return self.internal - self.begin

    @property
    def external_wait(self) -> int:
        return self.external - self.internal


@dataclass
class ClientStats:
    commits_update: int = 0
    commits_read_only: int = 0
    aborts_update: int = 0
    aborts_read_only: int = 0
    samples: list[TxnSample] = field(default_factory=list)

    def record_commit(self, sample: TxnSample) -> None:
        if sample.is_update:
            self.commits_update += 1
        else:
            self.commits_read_only += 1
        self.samples.append(sample)

    def record_abort(self, is_update: bool) -> None:
        if is_update:
            self.aborts_update += 1
        else:
            self.aborts_read_only += 1


@dataclass
class ClientHandle:
    """A closed-loop client colocated with one node."""

    client_id: int
    node: int
    pending: TxnDescriptor | None = None
    stats: ClientStats = field(default_factory=ClientStats)


class CommitBudget:
    """Number of scripts still to be issued across all clients."""

    def __init__(self, total: int) -> None:
        self.remaining = total

    def take(self) -> bool:
        if self.remaining <= 0:
            return False
        self.remaining -= 1
        return True


def _sample(descriptor: TxnDescriptor, client: int | None, attempts: int) -> TxnSample:
    return TxnSample(
        txn=descriptor.id,
        client=client,
        is_update=descriptor.is_update,
        begin=descriptor.begin_time,
        internal=descriptor.internal_commit_time,
        external=descriptor.external_commit_time,
        queue_wait=descriptor.queue_wait,
        attempts=attempts,
    )


class Cluster:
    """A full simulated deployment for one protocol."""

    def __init__(
        self,
        placement: PlacementConfig,
        *,
        protocol: str = PROTOCOL_SSS,
        sim: SimConfig | None = None,
        node_config: NodeConfig | None = None,
        coordinator_config: CoordinatorConfig | None = None,
        initial_vcs: Mapping[int, VectorClock] | None = None,
        validate_read_only: bool = True,
        trace: TraceLog | None = None,
    ) -> None:
        if protocol not in PROTOCOLS:
            msg = f"Unknown protocol {protocol!r}"
            raise ConfigurationError(msg)
        self.protocol = protocol
        self.pmap = PartitionMap(placement)
        self.net = SimNetwork(sim, trace)
        self.nodes: list[ServerNode] = []
        self.coordinators: list[CoordinatorBase] = []
        self.clients: list[ClientHandle] = []
        self._tasks: list[SimTask] = []
        initial_vcs = initial_vcs or {}
        for index in range(placement.num_nodes):
            if protocol == PROTOCOL_BASELINE:
                node = BaselineNode(index, self.net, self.pmap, node_config)
                coordinator = BaselineCoordinator(
                    node, coordinator_config, validate_read_only=validate_read_only
                )
            else:
                node = SSSNode(index, self.net, self.pmap, node_config, initial_vcs.get(index))
                coordinator = SSSCoordinator(node, coordinator_config)
            self.nodes.append(node)
            self.coordinators.append(coordinator)

    @property
    def trace(self) -> TraceLog:
        return self.net.trace

    def coordinator(self, node: int) -> CoordinatorBase:
        return self.coordinators[node]

    # -- executing scripts -----------------------------------------------------

    async def execute(
        self, node: int, script: TxnScript, client: ClientHandle | None = None
    ) -> tuple[Outcome, TxnDescriptor]:
        """Run *script* once as a transaction coordinated by *node*."""
        txn = self.coordinators[node].begin(script.is_update)
        if client is not None:
            client.pending = txn.descriptor
        try:
            for op in script.ops:
                if op.kind is OpKind.READ:
                    await txn.read(op.key)
                elif op.kind is OpKind.WRITE:
                    value = op.value if op.value is not None else f"{txn.id}:{op.key}".encode()
                    txn.write(op.key, value)
                else:
                    await self.net.sleep(op.ticks)
            outcome = await txn.commit()
        except TransactionAbortedError:
            outcome = Outcome.ABORTED
        finally:
            if client is not None:
                client.pending = None
        return outcome, txn.descriptor

    def submit(self, node: int, script: TxnScript, start: int = 0, name: str | None = None) -> SimTask:
        """Schedule a one-shot script at tick *start*; the task yields (outcome, descriptor)."""

        async def _once() -> tuple[Outcome, TxnDescriptor]:
            if start:
                await self.net.sleep(start - self.net.now)
            return await self.execute(node, script)

        task = self.net.spawn(_once(), name or f"script@{node}")
        self._tasks.append(task)
        return task

    def add_client(
        self,
        node: int,
        scripts: Iterator[TxnScript],
        budget: CommitBudget,
        rng: random.Random | None = None,
    ) -> ClientHandle:
        client = ClientHandle(len(self.clients), node)
        self.clients.append(client)
        rng = rng or random.Random(client.client_id)
        task = self.net.spawn(self._client_loop(client, scripts, budget, rng), f"client-{client.client_id}")
        self._tasks.append(task)
        return client

    async def _client_loop(
        self,
        client: ClientHandle,
        scripts: Iterator[TxnScript],
        budget: CommitBudget,
        rng: random.Random,
    ) -> None:
        while budget.take():
            script = next(scripts)
            attempts = 0
            while True:
                attempts += 1
                outcome, descriptor = await self.execute(client.node, script, client)
                if outcome is Outcome.COMMITTED:
                    client.stats.record_commit(_sample(descriptor, client.client_id, attempts))
                    break
                client.stats.record_abort(script.is_update)
                delay = rng.uniform(RETRY_BACKOFF_MIN, RETRY_BACKOFF_MAX)
                await self.net.sleep(to_ticks(delay))

    # -- running ---------------------------------------------------------------

    def run(self, until: int | None = None, max_events: int | None = None) -> RunReport:
        report = self.net.run(until=until, max_events=max_events)
        if report.quiescent:
            unfinished = [t.name for t in self._tasks if not t.done()]
            if unfinished:
                dump = self.dump()
                dump["unfinished"] = unfinished
                msg = f"Event queue drained with {len(unfinished)} unfinished client(s)"
                _LOGGER.error("%s: %s", msg, dump)
                raise SimulationStalledError(msg, dump)
            for node in self.nodes:
                node.clear_tombstones()
        return report

    def gc_clean(self) -> bool:
        """True when every queue, commit queue and lock table is empty."""
        return all(node.is_quiescent() for node in self.nodes)

    def samples(self) -> list[TxnSample]:
        return [s for client in self.clients for s in client.stats.samples]

    def dump(self) -> dict[str, Any]:
        return {
            "time": self.net.now,
            "nodes": [node.dump() for node in self.nodes if not node.is_quiescent()],
        }
