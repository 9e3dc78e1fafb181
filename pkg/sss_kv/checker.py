"""External-consistency checker.

Rebuilds the history of a finished run from its trace, turns it into a
dependency graph over transactions (wr, ww, rw plus external-commit ``ext`` order)
and looks for a cycle. A brute-force search over serial orders cross-checks
the graph verdict on small histories.

``ext`` edges: A -> B whenever A committed externally strictly before B. A
transaction's external commit is its reply, lifted to the latest external
commit of any transaction it read from or overwrote: a read-only transaction
may return a version whose writer is still held in pre-commit, and it commits
externally together with that writer. Equal times give no edge. Instead of
adding one edge per ordered pair the graph threads them through one barrier
vertex per distinct time; witnesses collapse those paths back into a single
``ext`` edge.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from ._compat import StrEnum
from typing import Any

import networkx as nx

from .const import BRUTE_FORCE_LIMIT
from .core_types import GENESIS_TXN, TxnId
from .exceptions import CheckerError, TooManyTransactionsError
from .trace import EV_ABORT, EV_BEGIN, EV_INSTALL, EV_READ, EV_REPLY, TraceRecord

_LOGGER = logging.getLogger(__name__)


class EdgeKind(StrEnum):
    WR = "wr"
    WW = "ww"
    RW = "rw"
    EXT = "ext"


_KIND_ORDER = (EdgeKind.WR, EdgeKind.WW, EdgeKind.RW, EdgeKind.EXT)


class HistoryEventKind(StrEnum):
    BEGIN = "begin"
    READ = "read"
    REPLY = "reply"
    ABORT = "abort"


@dataclass(frozen=True, slots=True)
class HistoryEvent:
    txn: TxnId
    kind: HistoryEventKind
    node: int | None
    time: int
    key: int | None = None
    writer: TxnId | None = None
    seq: int = -1


@dataclass
class TxnRecord:
    """Everything the checker knows about one transaction."""

    txn: TxnId
    is_update: bool
    begin: int
    reply: int | None = None
    aborted: bool = False
    reads: list[tuple[int, TxnId]] = field(default_factory=list)
    writes: set[int] = field(default_factory=set)

    @property
    def committed(self) -> bool:
        return self.reply is not None and not self.aborted


@dataclass(frozen=True, slots=True)
class TimeBarrier:
    """Graph vertex standing for "after every external commit at or before *time*"."""

    time: int


@dataclass
class History:
    txns: dict[TxnId, TxnRecord]
    version_order: dict[int, list[TxnId]]
    events: list[HistoryEvent] = field(default_factory=list)
    divergent_keys: dict[int, dict[int, list[TxnId]]] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Iterable[TraceRecord]) -> History:
        txns: dict[TxnId, TxnRecord] = {}
        events: list[HistoryEvent] = []
        # (key, node) -> writers in install order at that replica
        installs: dict[int, dict[int, list[TxnId]]] = {}
        for record in records:
            if record.event == EV_BEGIN:
                txns[record.txn] = TxnRecord(record.txn, bool(record.data.get("update")), record.time)
                events.append(HistoryEvent(record.txn, HistoryEventKind.BEGIN, record.node, record.time, seq=record.seq))
            elif record.event == EV_READ:
                state = cls._known(txns, record)
                key = record.data["key"]
                writer = record.data["writer"]
                state.reads.append((key, writer))
                events.append(
                    HistoryEvent(
                        record.txn, HistoryEventKind.READ, record.node, record.time, key, writer, record.seq
                    )
                )
            elif record.event == EV_REPLY:
                cls._known(txns, record).reply = record.time
                events.append(HistoryEvent(record.txn, HistoryEventKind.REPLY, record.node, record.time, seq=record.seq))
            elif record.event == EV_ABORT:
                cls._known(txns, record).aborted = True
                events.append(HistoryEvent(record.txn, HistoryEventKind.ABORT, record.node, record.time, seq=record.seq))
            elif record.event == EV_INSTALL:
                key = record.data["key"]
                installs.setdefault(key, {}).setdefault(record.node, []).append(record.data["writer"])
        version_order: dict[int, list[TxnId]] = {}
        divergent: dict[int, dict[int, list[TxnId]]] = {}
        for key, per_node in sorted(installs.items()):
            orders = [per_node[n] for n in sorted(per_node)]
            version_order[key] = list(orders[0])
            if any(order != orders[0] for order in orders[1:]):
                divergent[key] = {n: list(per_node[n]) for n in sorted(per_node)}
                _LOGGER.error("Replicas of key %d installed different writer sequences: %s", key, divergent[key])
        for key, writers in version_order.items():
            for writer in writers:
                if writer in txns:
                    txns[writer].writes.add(key)
        return cls(txns, version_order, events, divergent)

    @staticmethod
    def _known(txns: dict[TxnId, TxnRecord], record: TraceRecord) -> TxnRecord:
        state = txns.get(record.txn)
        if state is None:
            msg = f"Trace event {record.event} #{record.seq} for {record.txn} precedes its begin"
            raise CheckerError(msg)
        return state

    def committed(self) -> list[TxnRecord]:
        return sorted((t for t in self.txns.values() if t.committed), key=lambda t: t.txn)

    def project(self, keep: Iterable[TxnId]) -> History:
        """Restrict to *keep*; writers of versions read by kept txns must be kept too."""
        wanted = set(keep)
        txns = {txn: state for txn, state in self.txns.items() if txn in wanted}
        order = {key: [w for w in writers if w in wanted] for key, writers in self.version_order.items()}
        events = [e for e in self.events if e.txn in wanted]
        return History(txns, order, events, dict(self.divergent_keys))


def _as_history(trace: History | Iterable[TraceRecord]) -> History:
    if isinstance(trace, History):
        return trace
    return History.from_records(trace)


# ---------------------------------------------------------------------------
# DSG
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class WitnessEdge:
    src: TxnId
    dst: TxnId
    kind: EdgeKind

    def __str__(self) -> str:
        return f"{self.src} -{self.kind}-> {self.dst}"


class DSG:
    """Direct serialization graph; vertices are transactions and time barriers."""

    def __init__(self) -> None:
        self.graph = nx.DiGraph()

    def add_txn(self, txn: TxnId) -> None:
        self.graph.add_node(txn)

    def add_edge(self, src: Any, dst: Any, kind: EdgeKind) -> None:
        if src == dst:
            return
        if self.graph.has_edge(src, dst):
            self.graph.edges[src, dst]["kinds"].add(kind)
        else:
            self.graph.add_edge(src, dst, kinds={kind})

    @property
    def txns(self) -> list[TxnId]:
        return sorted(n for n in self.graph.nodes if isinstance(n, TxnId))

    def edge_counts(self) -> dict[str, int]:
        """Edges per kind; barrier paths count once per barrier hop."""
        counts = {str(kind): 0 for kind in _KIND_ORDER}
        for _, _, kinds in self.graph.edges(data="kinds"):
            for kind in kinds:
                counts[str(kind)] += 1
        return counts

    def has_edge(self, src: TxnId, dst: TxnId, kind: EdgeKind | None = None) -> bool:
        if not self.graph.has_edge(src, dst):
            return False
        return kind is None or kind in self.graph.edges[src, dst]["kinds"]


def build_dsg(trace: History | Iterable[TraceRecord]) -> DSG:
    history = _as_history(trace)
    committed = history.committed()
    members = {t.txn for t in committed}
    dsg = DSG()
    for state in committed:
        dsg.add_txn(state.txn)

    for key, writers in history.version_order.items():
        kept = [w for w in writers if w in members]
        for older, newer in zip(kept, kept[1:]):
            dsg.add_edge(older, newer, EdgeKind.WW)

    for state in committed:
        for key, writer in state.reads:
            writers = [w for w in history.version_order.get(key, []) if w in members]
            if writer == GENESIS_TXN:
                position = -1
            elif writer in writers:
                position = writers.index(writer)
                dsg.add_edge(writer, state.txn, EdgeKind.WR)
            else:
                msg = f"{state.txn} read key {key} from {writer}, which installed no such version"
                raise CheckerError(msg)
            if position + 1 < len(writers):
                dsg.add_edge(state.txn, writers[position + 1], EdgeKind.RW)

    _add_ext_edges(dsg, external_commit_times(history))
    return dsg


def external_commit_times(trace: History | Iterable[TraceRecord]) -> dict[TxnId, int]:
    """External commit time of every committed transaction.

    The reply time, raised to the external commit time of each transaction
    whose version it read or overwrote (transitively).
    """
    history = _as_history(trace)
    committed = history.committed()
    members = {t.txn for t in committed}
    deps = nx.DiGraph()
    deps.add_nodes_from(members)
    for writers in history.version_order.values():
        kept = [w for w in writers if w in members]
        deps.add_edges_from(zip(kept, kept[1:]))
    for state in committed:
        deps.add_edges_from((writer, state.txn) for _, writer in state.reads if writer in members)
    # Dependency cycles are reported by the DSG; here each one shares a single time.
    condensed = nx.condensation(deps)
    lifted: dict[int, int] = {}
    for component in nx.topological_sort(condensed):
        own = max(history.txns[txn].reply for txn in condensed.nodes[component]["members"])
        lifted[component] = max([own, *(lifted[p] for p in condensed.predecessors(component))])
    mapping = condensed.graph["mapping"]
    return {txn: lifted[mapping[txn]] for txn in members}


def _add_ext_edges(dsg: DSG, external: Mapping[TxnId, int]) -> None:
    times = sorted(set(external.values()))
    barriers = [TimeBarrier(time) for time in times]
    for earlier, later in zip(barriers, barriers[1:]):
        dsg.add_edge(earlier, later, EdgeKind.EXT)
    for txn, time in external.items():
        index = bisect_left(times, time)
        dsg.add_edge(txn, barriers[index], EdgeKind.EXT)
        # Latest barrier strictly before this commit.
        if index > 0:
            dsg.add_edge(barriers[index - 1], txn, EdgeKind.EXT)


def _collapse(cycle: list[tuple[Any, Any]], dsg: DSG) -> list[WitnessEdge]:
    """Turn a raw cycle into transaction-to-transaction edges."""
    # Rotate so the cycle starts at a transaction.
    start = next(i for i, (src, _) in enumerate(cycle) if isinstance(src, TxnId))
    cycle = cycle[start:] + cycle[:start]
    witness: list[WitnessEdge] = []
    src: TxnId | None = None
    for u, v in cycle:
        if isinstance(u, TxnId):
            src = u
        if not isinstance(v, TxnId):
            continue
        if isinstance(u, TxnId):
            kinds = dsg.graph.edges[u, v]["kinds"]
            kind = next(k for k in _KIND_ORDER if k in kinds)
        else:
            kind = EdgeKind.EXT
        witness.append(WitnessEdge(src, v, kind))
    return witness


def detect_cycle(dsg: DSG) -> list[WitnessEdge] | None:
    try:
        cycle = nx.find_cycle(dsg.graph, orientation="original")
    except nx.NetworkXNoCycle:
        return None
    witness = _collapse([(u, v) for u, v, _ in cycle], dsg)
    _LOGGER.error("Dependency cycle: %s", ", ".join(str(e) for e in witness))
    return witness


def topological_order(dsg: DSG) -> list[TxnId]:
    """A serial order consistent with every edge; the graph must be acyclic."""
    order = nx.lexicographical_topological_sort(dsg.graph, key=_vertex_key)
    return [v for v in order if isinstance(v, TxnId)]


def _vertex_key(vertex: Any) -> tuple[int, int, int]:
    if isinstance(vertex, TimeBarrier):
        return (1, vertex.time, 0)
    return (0, vertex.origin_node, vertex.local_seq)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_external_order(
    trace: History | Iterable[TraceRecord], limit: int = BRUTE_FORCE_LIMIT
) -> list[TxnId] | None:
    """Search serial orders that respect external commit, reads and install order.

    Returns the first valid order in TxnId-lexicographic enumeration, or None.
    """
    history = _as_history(trace)
    committed = history.committed()
    if len(committed) > limit:
        msg = f"Brute-force search refused: {len(committed)} transactions exceed the limit of {limit}"
        raise TooManyTransactionsError(msg)
    members = {t.txn for t in committed}
    by_id = {t.txn: t for t in committed}
    external = external_commit_times(history)
    must_follow: dict[TxnId, set[TxnId]] = {t.txn: set() for t in committed}
    for a in committed:
        for b in committed:
            if external[a.txn] < external[b.txn]:
                must_follow[b.txn].add(a.txn)
    for writers in history.version_order.values():
        kept = [w for w in writers if w in members]
        for older, newer in zip(kept, kept[1:]):
            must_follow[newer].add(older)
    ids = sorted(members)
    order: list[TxnId] = []
    last_writer: dict[int, TxnId] = {}

    def extend() -> bool:
        if len(order) == len(ids):
            return True
        placed = set(order)
        for txn in ids:
            if txn in placed or not must_follow[txn] <= placed:
                continue
            state = by_id[txn]
            if any(last_writer.get(key, GENESIS_TXN) != writer for key, writer in state.reads):
                continue
            saved = {key: last_writer.get(key) for key in state.writes}
            for key in state.writes:
                last_writer[key] = txn
            order.append(txn)
            if extend():
                return True
            order.pop()
            for key, writer in saved.items():
                if writer is None:
                    last_writer.pop(key, None)
                else:
                    last_writer[key] = writer
        return False

    return list(order) if extend() else None


# ---------------------------------------------------------------------------
# Projections and reports
# ---------------------------------------------------------------------------


def projections(history: History) -> dict[str, History]:
    """Updates only, updates plus each single read-only txn, and everything."""
    committed = history.committed()
    updates = [t.txn for t in committed if t.is_update]
    result = {"updates": history.project(updates)}
    for state in committed:
        if not state.is_update:
            result[f"updates+{state.txn}"] = history.project([*updates, state.txn])
    result["all"] = history
    return result


def check_projections(history: History) -> dict[str, list[WitnessEdge]]:
    """Witness per projection that has a cycle; empty when all are acyclic."""
    failures: dict[str, list[WitnessEdge]] = {}
    for name, projected in projections(history).items():
        witness = detect_cycle(build_dsg(projected))
        if witness is not None:
            failures[name] = witness
    return failures


@dataclass
class CheckReport:
    consistent: bool
    num_txns: int
    num_read_only: int
    edge_counts: dict[str, int]
    witness: list[WitnessEdge] | None = None
    order: list[TxnId] = field(default_factory=list)
    divergent_keys: Mapping[int, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "consistent": self.consistent,
            "num_txns": self.num_txns,
            "num_read_only": self.num_read_only,
            "edge_counts": self.edge_counts,
            "witness": [str(e) for e in self.witness] if self.witness else None,
            "divergent_keys": {
                str(key): {str(n): [str(w) for w in ws] for n, ws in per_node.items()}
                for key, per_node in self.divergent_keys.items()
            },
        }


def check_trace(trace: History | Iterable[TraceRecord]) -> CheckReport:
    history = _as_history(trace)
    dsg = build_dsg(history)
    witness = detect_cycle(dsg)
    committed = history.committed()
    report = CheckReport(
        consistent=witness is None and not history.divergent_keys,
        num_txns=len(committed),
        num_read_only=sum(1 for t in committed if not t.is_update),
        edge_counts=dsg.edge_counts(),
        witness=witness,
        order=topological_order(dsg) if witness is None else [],
        divergent_keys=history.divergent_keys,
    )
    if report.consistent:
        _LOGGER.info("History of %d transactions is externally consistent", report.num_txns)
    return report
