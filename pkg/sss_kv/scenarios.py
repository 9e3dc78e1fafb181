"""Directed scenarios with hand-derived expected traces.

All scenarios run with a fixed 100-tick hop latency (1 tick for loopback) and
one transaction per coordinator, so every expected milestone has an exact
time. Nodes are numbered from 0.
"""

from __future__ import annotations

import difflib
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .checker import CheckReport, check_trace
from .cluster import Cluster
from .const import PROTOCOL_BASELINE, PROTOCOL_SSS
from .coordinator import Outcome
from .core_types import TxnDescriptor, TxnId, VectorClock
from .exceptions import ConfigurationError
from .partition_map import PlacementConfig
from .simnet import SimConfig
from .trace import EV_ACK, EV_ENQUEUE, EV_FORWARD, EV_INSTALL, EV_REMOVE, EV_REPLY, TraceRecord
from .workload import Op, TxnScript

_LOGGER = logging.getLogger(__name__)

MILESTONE_EVENTS = (EV_ENQUEUE, EV_INSTALL, EV_REPLY, EV_REMOVE, EV_FORWARD, EV_ACK)


@dataclass(frozen=True, slots=True)
class Milestone:
    time: int
    node: int
    event: str
    txn: str
    detail: str = ""

    def __str__(self) -> str:
        return f"t={self.time} N{self.node} {self.event} {self.txn} {self.detail}".rstrip()


@dataclass(frozen=True)
class ScriptedTxn:
    label: str
    node: int
    start: int
    script: TxnScript


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    placement: PlacementConfig
    txns: tuple[ScriptedTxn, ...]
    key_names: Mapping[int, str]
    initial_vcs: Mapping[int, VectorClock] = field(default_factory=dict)
    expected: tuple[Milestone, ...] | None = None
    protocol: str = PROTOCOL_SSS
    validate_read_only: bool = True
    expect_consistent: bool = True


@dataclass
class ScenarioResult:
    scenario: Scenario
    cluster: Cluster
    labels: dict[TxnId, str]
    outcomes: dict[str, Outcome]
    descriptors: dict[str, TxnDescriptor]
    milestones: list[Milestone]
    diff: list[str]
    check: CheckReport

    @property
    def ok(self) -> bool:
        return not self.diff and self.check.consistent == self.scenario.expect_consistent

    def txn(self, label: str) -> TxnId:
        return self.descriptors[label].id

    def read_values(self, label: str) -> dict[str, TxnId]:
        """Key name -> writer of the version each read observed."""
        names = self.scenario.key_names
        return {names[r.key]: r.writer for r in self.descriptors[label].read_set}


def _vc(*entries: int) -> VectorClock:
    return VectorClock.of(entries)


def _read(key: int) -> Op:
    return Op.read(key)


def _only_on(*nodes: int) -> dict[int, tuple[int, ...]]:
    return {key: (node,) for key, node in enumerate(nodes)}


# ---------------------------------------------------------------------------
# Scenario definitions
# ---------------------------------------------------------------------------

X, Y = 0, 1

SINGLE_KEY_WAIT = Scenario(
    name="single-key-wait",
    description=(
        "Anti-dependency on one key: read-only T1 reads y and stays open; T2 then "
        "writes y, installs, and is held until Remove(T1) arrives."
    ),
    placement=PlacementConfig(2, 2, replication_degree=1, overrides=_only_on(0, 1)),
    initial_vcs={0: _vc(5, 4), 1: _vc(3, 7)},
    key_names={X: "x", Y: "y"},
    txns=(
        ScriptedTxn("T1", 0, 0, TxnScript(False, (_read(Y), Op.pause(1800)))),
        ScriptedTxn("T2", 1, 500, TxnScript(True, (Op.write(Y),))),
    ),
    expected=(
        Milestone(100, 1, EV_ENQUEUE, "T1", "y:R@7"),
        Milestone(503, 1, EV_INSTALL, "T2", "y:[3,8]"),
        Milestone(503, 1, EV_ENQUEUE, "T2", "y:W@8"),
        Milestone(2000, 0, EV_REPLY, "T1"),
        Milestone(2100, 1, EV_REMOVE, "T1"),
        Milestone(2100, 1, EV_ACK, "T2", "@8"),
        Milestone(2101, 1, EV_REPLY, "T2"),
    ),
)

CROSSED_READERS = Scenario(
    name="crossed-readers",
    description=(
        "Two non-conflicting updates T2 (x) and T3 (y) with two read-only "
        "transactions reading x and y in opposite orders; both readers must "
        "see the initial versions."
    ),
    placement=PlacementConfig(4, 2, replication_degree=1, overrides=_only_on(1, 2)),
    initial_vcs={
        0: _vc(4, 6, 9, 2),
        1: _vc(3, 7, 9, 2),
        2: _vc(3, 6, 10, 2),
        3: _vc(3, 6, 9, 5),
    },
    key_names={X: "x", Y: "y"},
    txns=(
        ScriptedTxn("T1", 0, 0, TxnScript(False, (_read(X), Op.pause(300), _read(Y), Op.pause(300)))),
        ScriptedTxn("T2", 1, 300, TxnScript(True, (Op.write(X),))),
        ScriptedTxn("T3", 2, 300, TxnScript(True, (Op.write(Y),))),
        ScriptedTxn("T4", 3, 0, TxnScript(False, (_read(Y), Op.pause(300), _read(X), Op.pause(300)))),
    ),
    expected=(
        Milestone(100, 1, EV_ENQUEUE, "T1", "x:R@7"),
        Milestone(100, 2, EV_ENQUEUE, "T4", "y:R@10"),
        Milestone(303, 1, EV_INSTALL, "T2", "x:[3,8,9,2]"),
        Milestone(303, 1, EV_ENQUEUE, "T2", "x:W@8"),
        Milestone(303, 2, EV_INSTALL, "T3", "y:[3,6,11,2]"),
        Milestone(303, 2, EV_ENQUEUE, "T3", "y:W@11"),
        Milestone(600, 2, EV_ENQUEUE, "T1", "y:R@10"),
        Milestone(600, 1, EV_ENQUEUE, "T4", "x:R@7"),
        Milestone(1000, 0, EV_REPLY, "T1"),
        Milestone(1000, 3, EV_REPLY, "T4"),
        Milestone(1100, 1, EV_REMOVE, "T1"),
        Milestone(1100, 2, EV_REMOVE, "T1"),
        Milestone(1100, 1, EV_REMOVE, "T4"),
        Milestone(1100, 1, EV_ACK, "T2", "@8"),
        Milestone(1100, 2, EV_REMOVE, "T4"),
        Milestone(1100, 2, EV_ACK, "T3", "@11"),
        Milestone(1101, 1, EV_REPLY, "T2"),
        Milestone(1101, 2, EV_REPLY, "T3"),
    ),
)

A, C = 0, 1

TRANSITIVE = Scenario(
    name="transitive",
    description=(
        "Chain Tro -> Tw -> Tw2: Tw2 reads a from the pre-committing Tw, picks up "
        "Tro's queue entry and carries it into Q(c); Tw2 is released only after "
        "node 1 forwards Remove(Tro) to node 2."
    ),
    placement=PlacementConfig(3, 2, replication_degree=1, overrides=_only_on(1, 2)),
    initial_vcs={1: _vc(0, 5, 0), 2: _vc(0, 0, 9)},
    key_names={A: "a", C: "c"},
    txns=(
        ScriptedTxn("Tro", 0, 0, TxnScript(False, (_read(A), Op.pause(2800)))),
        ScriptedTxn("Tw", 1, 300, TxnScript(True, (Op.write(A),))),
        ScriptedTxn("Tw2", 2, 500, TxnScript(True, (_read(A), Op.write(C)))),
    ),
    expected=(
        Milestone(100, 1, EV_ENQUEUE, "Tro", "a:R@5"),
        Milestone(303, 1, EV_INSTALL, "Tw", "a:[0,6,0]"),
        Milestone(303, 1, EV_ENQUEUE, "Tw", "a:W@6"),
        Milestone(901, 2, EV_INSTALL, "Tw2", "c:[0,6,10]"),
        Milestone(901, 2, EV_ENQUEUE, "Tw2", "c:W@10"),
        Milestone(901, 2, EV_ENQUEUE, "Tro", "c:R@5+propagated"),
        Milestone(3000, 0, EV_REPLY, "Tro"),
        Milestone(3100, 1, EV_REMOVE, "Tro"),
        Milestone(3100, 1, EV_FORWARD, "Tro", "->N2"),
        Milestone(3100, 1, EV_ACK, "Tw", "@6"),
        Milestone(3101, 1, EV_REPLY, "Tw"),
        Milestone(3200, 2, EV_REMOVE, "Tro"),
        Milestone(3200, 2, EV_ACK, "Tw2", "@10"),
        Milestone(3201, 2, EV_REPLY, "Tw2"),
    ),
)


def read_skew(protocol: str = PROTOCOL_SSS, *, validate_read_only: bool = True) -> Scenario:
    """A reader straddling a two-key update; consistent unless validation is off."""
    consistent = protocol == PROTOCOL_SSS or validate_read_only
    if protocol == PROTOCOL_SSS:
        name = "read-skew"
    else:
        name = "read-skew-baseline" if validate_read_only else "read-skew-unvalidated"
    return Scenario(
        name=name,
        description="Tro reads x, Tw overwrites x and y, then Tro reads y.",
        placement=PlacementConfig(3, 2, replication_degree=1, overrides=_only_on(1, 2)),
        key_names={X: "x", Y: "y"},
        txns=(
            ScriptedTxn("Tro", 0, 0, TxnScript(False, (_read(X), Op.pause(800), _read(Y)))),
            ScriptedTxn("Tw", 1, 300, TxnScript(True, (Op.write(X), Op.write(Y)))),
        ),
        protocol=protocol,
        validate_read_only=validate_read_only,
        expect_consistent=consistent,
    )


SCENARIOS: dict[str, Scenario] = {
    SINGLE_KEY_WAIT.name: SINGLE_KEY_WAIT,
    CROSSED_READERS.name: CROSSED_READERS,
    TRANSITIVE.name: TRANSITIVE,
    **{
        s.name: s
        for s in (
            read_skew(),
            read_skew(PROTOCOL_BASELINE),
            read_skew(PROTOCOL_BASELINE, validate_read_only=False),
        )
    },
}

# Short names accepted wherever a scenario name is.
SCENARIO_ALIASES: dict[str, str] = {"fig3": SINGLE_KEY_WAIT.name, "fig4": CROSSED_READERS.name}


# ---------------------------------------------------------------------------
# Running and diffing
# ---------------------------------------------------------------------------


def _detail(record: TraceRecord, key_names: Mapping[int, str]) -> str:
    data = record.data
    if record.event == EV_ENQUEUE:
        detail = f"{key_names[data['key']]}:{data['kind']}@{data['snapshot']}"
        return detail + ("+propagated" if data.get("propagated") else "")
    if record.event == EV_INSTALL:
        stamp = data.get("vc")
        return f"{key_names[data['key']]}:{stamp if stamp is not None else data.get('counter')}"
    if record.event == EV_FORWARD:
        return f"->N{data['dest']}"
    if record.event == EV_ACK:
        return f"@{data['snapshot']}"
    return ""


def milestones(
    records: Iterable[TraceRecord],
    labels: Mapping[TxnId, str],
    key_names: Mapping[int, str],
    events: Iterable[str] = MILESTONE_EVENTS,
) -> list[Milestone]:
    wanted = set(events)
    return [
        Milestone(r.time, r.node, r.event, labels.get(r.txn, str(r.txn)), _detail(r, key_names))
        for r in records
        if r.event in wanted
    ]


def diff_milestones(expected: Iterable[Milestone], actual: Iterable[Milestone]) -> list[str]:
    """Unified diff of the two milestone lists; empty when they match exactly."""
    return list(
        difflib.unified_diff(
            [str(m) for m in expected],
            [str(m) for m in actual],
            fromfile="expected",
            tofile="actual",
            lineterm="",
        )
    )


def run_scenario(scenario: Scenario | str) -> ScenarioResult:
    if isinstance(scenario, str):
        try:
            scenario = SCENARIOS[SCENARIO_ALIASES.get(scenario, scenario)]
        except KeyError as err:
            msg = f"Unknown scenario {scenario!r}, expected one of {sorted([*SCENARIOS, *SCENARIO_ALIASES])}"
            raise ConfigurationError(msg) from err
    cluster = Cluster(
        scenario.placement,
        protocol=scenario.protocol,
        sim=SimConfig(latency=(0.1,)),
        initial_vcs=scenario.initial_vcs,
        validate_read_only=scenario.validate_read_only,
    )
    tasks = {t.label: cluster.submit(t.node, t.script, t.start, t.label) for t in scenario.txns}
    cluster.run()
    outcomes: dict[str, Outcome] = {}
    descriptors: dict[str, TxnDescriptor] = {}
    for label, task in tasks.items():
        outcomes[label], descriptors[label] = task.result()
    labels = {d.id: label for label, d in descriptors.items()}
    actual = milestones(cluster.trace.records, labels, scenario.key_names)
    diff = diff_milestones(scenario.expected, actual) if scenario.expected is not None else []
    check = check_trace(cluster.trace.records)
    result = ScenarioResult(scenario, cluster, labels, outcomes, descriptors, actual, diff, check)
    if diff:
        _LOGGER.error("Scenario %s diverged from its expected trace:\n%s", scenario.name, "\n".join(diff))
    return result
