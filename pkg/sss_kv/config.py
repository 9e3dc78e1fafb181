"""Benchmark configuration: YAML loading and voluptuous validation."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import voluptuous as vol
import yaml

from .const import (
    BACKOFF_INITIAL,
    BACKOFF_MAX,
    DEFAULT_CLIENTS_PER_NODE,
    DEFAULT_DURATION,
    DEFAULT_LATENCY,
    DEFAULT_NUM_KEYS,
    DEFAULT_NUM_NODES,
    DEFAULT_PLACEMENT_SEED,
    DEFAULT_READ_ONLY_PCT,
    DEFAULT_REPLICATION_DEGREE,
    DEFAULT_RO_TXN_LEN,
    KEY_DIST_LOCAL_MIX,
    KEY_DIST_UNIFORM,
    LATENCY_FIXED,
    LATENCY_MODELS,
    LIVELOCK_EVENT_WINDOW,
    LOCK_TIMEOUT,
    MAX_RO_TXN_LEN,
    PROTOCOL_SSS,
    PROTOCOLS,
    REQUEST_TIMEOUT,
    STARVATION_THRESHOLD,
    UPDATE_TXN_KEYS,
    VOTE_TIMEOUT,
)
from .coordinator import CoordinatorConfig
from .exceptions import ConfigurationError
from .node import NodeConfig
from .partition_map import PlacementConfig
from .simnet import SimConfig
from .workload import WorkloadConfig

_LOGGER = logging.getLogger(__name__)

LOG_LEVELS = ("debug", "info", "warning", "error", "critical")


def _pair(value: Any) -> tuple[int, int]:
    """Accept ``4`` or ``[2, 16]`` for a length range."""
    if isinstance(value, int):
        return (value, value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return (int(value[0]), int(value[1]))
    msg = f"expected an integer or a [min, max] pair, got {value!r}"
    raise vol.Invalid(msg)


def _floats(value: Any) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (list, tuple)) and value:
        return tuple(float(v) for v in value)
    msg = f"expected a number or a list of numbers, got {value!r}"
    raise vol.Invalid(msg)


_PCT = vol.All(vol.Coerce(float), vol.Range(min=0, max=100))
_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))

CLUSTER_SCHEMA = vol.Schema(
    {
        vol.Optional("num_nodes", default=DEFAULT_NUM_NODES): vol.All(int, vol.Range(min=1)),
        vol.Optional("num_keys", default=DEFAULT_NUM_KEYS): vol.All(int, vol.Range(min=1)),
        vol.Optional("replication_degree", default=DEFAULT_REPLICATION_DEGREE): vol.All(int, vol.Range(min=1)),
        vol.Optional("placement_seed", default=DEFAULT_PLACEMENT_SEED): int,
        vol.Optional("validate_read_only", default=True): bool,
    }
)

WORKLOAD_SCHEMA = vol.Schema(
    {
        vol.Optional("protocol", default=PROTOCOL_SSS): vol.In(PROTOCOLS),
        vol.Optional("seed", default=0): int,
        vol.Optional("read_only_pct", default=DEFAULT_READ_ONLY_PCT): _PCT,
        vol.Optional("ro_txn_len", default=list(DEFAULT_RO_TXN_LEN)): vol.All(_pair),
        vol.Optional("update_keys", default=UPDATE_TXN_KEYS): vol.All(int, vol.Range(min=1)),
        vol.Optional("clients_per_node", default=DEFAULT_CLIENTS_PER_NODE): vol.All(int, vol.Range(min=0)),
        vol.Optional("key_distribution", default=KEY_DIST_UNIFORM): vol.In((KEY_DIST_UNIFORM, KEY_DIST_LOCAL_MIX)),
        vol.Optional("local_pct", default=50): _PCT,
        vol.Optional("duration", default=DEFAULT_DURATION): vol.All(int, vol.Range(min=0)),
    }
)

NETWORK_SCHEMA = vol.Schema(
    {
        vol.Optional("latency_model", default=LATENCY_FIXED): vol.In(LATENCY_MODELS),
        vol.Optional("latency", default=[DEFAULT_LATENCY]): vol.All(_floats),
        vol.Optional("drop_rate", default=0.0): vol.All(vol.Coerce(float), vol.Range(min=0, max=1, max_included=False)),
        vol.Optional("priority_preemption", default=True): bool,
        vol.Optional("livelock_window", default=LIVELOCK_EVENT_WINDOW): vol.All(int, vol.Range(min=1)),
    }
)

NODE_SCHEMA = vol.Schema(
    {
        vol.Optional("lock_timeout", default=LOCK_TIMEOUT): _POSITIVE,
        vol.Optional("starvation_threshold", default=STARVATION_THRESHOLD): _POSITIVE,
        vol.Optional("backoff_initial", default=BACKOFF_INITIAL): _POSITIVE,
        vol.Optional("backoff_max", default=BACKOFF_MAX): _POSITIVE,
        vol.Optional("history_limit", default=None): vol.Any(None, vol.All(int, vol.Range(min=1))),
        vol.Optional("request_timeout", default=REQUEST_TIMEOUT): _POSITIVE,
        vol.Optional("vote_timeout", default=VOTE_TIMEOUT): _POSITIVE,
    }
)

LOGGER_SCHEMA = vol.Schema(
    {
        vol.Optional("default", default="info"): vol.All(str, vol.Lower, vol.In(LOG_LEVELS)),
        vol.Optional("logs", default={}): {str: vol.All(str, vol.Lower, vol.In(LOG_LEVELS))},
    }
)

SECTIONS: dict[str, vol.Schema] = {
    "cluster": CLUSTER_SCHEMA,
    "workload": WORKLOAD_SCHEMA,
    "network": NETWORK_SCHEMA,
    "node": NODE_SCHEMA,
    "logger": LOGGER_SCHEMA,
}


def _section_of(key: str) -> str | None:
    for name, schema in SECTIONS.items():
        if any(str(marker) == key for marker in schema.schema):
            return name
    return None


@dataclass(frozen=True)
class BenchConfig:
    placement: PlacementConfig
    workload: WorkloadConfig
    sim: SimConfig
    node: NodeConfig = field(default_factory=NodeConfig)
    coordinator: CoordinatorConfig = field(default_factory=CoordinatorConfig)
    validate_read_only: bool = True
    logger: Mapping[str, Any] = field(default_factory=dict)

    @property
    def protocol(self) -> str:
        return self.workload.protocol

    @property
    def seed(self) -> int:
        return self.workload.seed


def _structured(raw: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """Route a flat mapping into sections; structured input passes through."""
    sections: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    for key, value in raw.items():
        if key in SECTIONS and isinstance(value, Mapping):
            sections[key].update(value)
            continue
        name = _section_of(key)
        if name is None:
            msg = f"Unknown configuration key {key!r}"
            raise ConfigurationError(msg)
        sections[name][key] = value
    return sections


def parse_config(raw: Mapping[str, Any] | None) -> BenchConfig:
    sections = _structured(raw or {})
    try:
        validated = {name: SECTIONS[name](values) for name, values in sections.items()}
    except vol.Invalid as err:
        msg = f"Invalid configuration: {err}"
        raise ConfigurationError(msg) from err

    cluster = validated["cluster"]
    workload = validated["workload"]
    network = validated["network"]
    node = validated["node"]
    placement = PlacementConfig(
        num_nodes=cluster["num_nodes"],
        num_keys=cluster["num_keys"],
        replication_degree=cluster["replication_degree"],
        placement_seed=cluster["placement_seed"],
    )
    ro_lo, ro_hi = workload["ro_txn_len"]
    if ro_hi > MAX_RO_TXN_LEN:
        msg = f"ro_txn_len may not exceed {MAX_RO_TXN_LEN}"
        raise ConfigurationError(msg)
    return BenchConfig(
        placement=placement,
        workload=WorkloadConfig(
            num_nodes=placement.num_nodes,
            num_keys=placement.num_keys,
            read_only_pct=workload["read_only_pct"],
            ro_txn_len=(ro_lo, ro_hi),
            update_keys=workload["update_keys"],
            clients_per_node=workload["clients_per_node"],
            key_distribution=workload["key_distribution"],
            local_pct=workload["local_pct"],
            duration=workload["duration"],
            seed=workload["seed"],
            protocol=workload["protocol"],
        ),
        sim=SimConfig(
            seed=workload["seed"],
            latency_model=network["latency_model"],
            latency=network["latency"],
            drop_rate=network["drop_rate"],
            priority_preemption=network["priority_preemption"],
            livelock_window=network["livelock_window"],
        ),
        node=NodeConfig(
            lock_timeout=node["lock_timeout"],
            starvation_threshold=node["starvation_threshold"],
            backoff_initial=node["backoff_initial"],
            backoff_max=node["backoff_max"],
            history_limit=node["history_limit"],
        ),
        coordinator=CoordinatorConfig(
            request_timeout=node["request_timeout"],
            vote_timeout=node["vote_timeout"],
        ),
        validate_read_only=cluster["validate_read_only"],
        logger=validated["logger"],
    )


def load_config(path: str | Path | None) -> BenchConfig:
    """Read a YAML file; ``None`` yields the defaults."""
    if path is None:
        return parse_config({})
    try:
        with Path(path).open(encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except (OSError, yaml.YAMLError) as err:
        msg = f"Cannot read configuration {path}: {err}"
        raise ConfigurationError(msg) from err
    if raw is not None and not isinstance(raw, Mapping):
        msg = f"Configuration {path} must be a mapping"
        raise ConfigurationError(msg)
    _LOGGER.debug("Loaded configuration from %s", path)
    return parse_config(raw)


def apply_overrides(
    cfg: BenchConfig,
    *,
    seed: int | None = None,
    protocol: str | None = None,
    latency: float | None = None,
    drop_rate: float | None = None,
) -> BenchConfig:
    """Command-line flags win over file values."""
    workload, sim = cfg.workload, cfg.sim
    if seed is not None:
        workload = replace(workload, seed=seed)
        sim = replace(sim, seed=seed)
    if protocol is not None:
        workload = replace(workload, protocol=protocol)
    if latency is not None:
        sim = replace(sim, latency_model=LATENCY_FIXED, latency=(latency,))
    if drop_rate is not None:
        sim = replace(sim, drop_rate=drop_rate)
    return replace(cfg, workload=workload, sim=sim)
