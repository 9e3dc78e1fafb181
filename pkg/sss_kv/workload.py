"""YCSB-style transaction scripts and the generator that produces them."""

from __future__ import annotations

import random
from collections.abc import Iterator
from dataclasses import dataclass
from ._compat import StrEnum

from .const import (
    DEFAULT_CLIENTS_PER_NODE,
    DEFAULT_DURATION,
    DEFAULT_NUM_KEYS,
    DEFAULT_NUM_NODES,
    DEFAULT_READ_ONLY_PCT,
    DEFAULT_RO_TXN_LEN,
    KEY_DIST_LOCAL_MIX,
    KEY_DIST_UNIFORM,
    MAX_RO_TXN_LEN,
    PROTOCOL_SSS,
    PROTOCOLS,
    UPDATE_TXN_KEYS,
)
from .exceptions import ConfigurationError
from .partition_map import PartitionMap


class OpKind(StrEnum):
    READ = "read"
    WRITE = "write"
    PAUSE = "pause"


@dataclass(frozen=True, slots=True)
class Op:
    kind: OpKind
    key: int | None = None
    value: bytes | None = None
    ticks: int = 0

    @classmethod
    def read(cls, key: int) -> Op:
        return cls(OpKind.READ, key)

    @classmethod
    def write(cls, key: int, value: bytes | None = None) -> Op:
        return cls(OpKind.WRITE, key, value)

    @classmethod
    def pause(cls, ticks: int) -> Op:
        return cls(OpKind.PAUSE, ticks=ticks)


@dataclass(frozen=True, slots=True)
class TxnScript:
    """What one transaction does; the coordinator learns it op by op."""

    is_update: bool
    ops: tuple[Op, ...]

    @property
    def read_keys(self) -> tuple[int, ...]:
        return tuple(op.key for op in self.ops if op.kind is OpKind.READ)

    @property
    def write_keys(self) -> tuple[int, ...]:
        return tuple(op.key for op in self.ops if op.kind is OpKind.WRITE)


@dataclass(frozen=True)
class WorkloadConfig:
    num_nodes: int = DEFAULT_NUM_NODES
    num_keys: int = DEFAULT_NUM_KEYS
    read_only_pct: float = DEFAULT_READ_ONLY_PCT
    ro_txn_len: tuple[int, int] = DEFAULT_RO_TXN_LEN
    update_keys: int = UPDATE_TXN_KEYS
    clients_per_node: int = DEFAULT_CLIENTS_PER_NODE
    key_distribution: str = KEY_DIST_UNIFORM
    local_pct: float = 50
    duration: int = DEFAULT_DURATION
    seed: int = 0
    protocol: str = PROTOCOL_SSS

    def __post_init__(self) -> None:
        lo, hi = self.ro_txn_len
        if not 1 <= lo <= hi <= MAX_RO_TXN_LEN:
            msg = f"ro_txn_len must satisfy 1 <= min <= max <= {MAX_RO_TXN_LEN}, got {self.ro_txn_len}"
            raise ConfigurationError(msg)
        if hi > self.num_keys or self.update_keys > self.num_keys:
            msg = f"Transactions need more distinct keys than the {self.num_keys} available"
            raise ConfigurationError(msg)
        if not 0 <= self.read_only_pct <= 100 or not 0 <= self.local_pct <= 100:
            msg = "Percentages must lie in [0, 100]"
            raise ConfigurationError(msg)
        if self.key_distribution not in (KEY_DIST_UNIFORM, KEY_DIST_LOCAL_MIX):
            msg = f"Unknown key distribution {self.key_distribution!r}"
            raise ConfigurationError(msg)
        if self.protocol not in PROTOCOLS:
            msg = f"Unknown protocol {self.protocol!r}, expected one of {PROTOCOLS}"
            raise ConfigurationError(msg)
        if self.clients_per_node < 0 or self.duration < 0:
            msg = "clients_per_node and duration must be non-negative"
            raise ConfigurationError(msg)


def _pick_keys(
    cfg: WorkloadConfig,
    rng: random.Random,
    count: int,
    pmap: PartitionMap | None,
    node: int,
) -> list[int]:
    """Draw *count* distinct keys according to the key distribution."""
    local: tuple[int, ...] = ()
    remote: tuple[int, ...] = ()
    if cfg.key_distribution == KEY_DIST_LOCAL_MIX and pmap is not None:
        local = pmap.keys_on(node)
        remote = pmap.keys_not_on(node)
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < count:
        if local and (not remote or rng.random() * 100 < cfg.local_pct):
            key = rng.choice(local)
        elif remote:
            key = rng.choice(remote)
        else:
            key = rng.randrange(cfg.num_keys)
        if key not in seen:
            seen.add(key)
            chosen.append(key)
    return chosen


def generate_txn(
    cfg: WorkloadConfig,
    rng: random.Random,
    pmap: PartitionMap | None = None,
    node: int = 0,
) -> TxnScript:
    """Draw one script: read-only with probability read_only_pct, else update."""
    if rng.random() * 100 < cfg.read_only_pct:
        lo, hi = cfg.ro_txn_len
        keys = _pick_keys(cfg, rng, rng.randint(lo, hi), pmap, node)
        return TxnScript(False, tuple(Op.read(k) for k in keys))
    keys = _pick_keys(cfg, rng, cfg.update_keys, pmap, node)
    ops = [Op.read(k) for k in keys] + [Op.write(k) for k in keys]
    return TxnScript(True, tuple(ops))


def script_stream(
    cfg: WorkloadConfig, pmap: PartitionMap | None, client_id: int, node: int
) -> Iterator[TxnScript]:
    """Endless per-client scripts, seeded by (workload seed, client id)."""
    rng = random.Random(f"{cfg.seed}:{client_id}")
    while True:
        yield generate_txn(cfg, rng, pmap, node)
