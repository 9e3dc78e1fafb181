"""Static placement of keys onto replica nodes."""

from __future__ import annotations

import hashlib
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property

from .const import DEFAULT_PLACEMENT_SEED, DEFAULT_REPLICATION_DEGREE
from .exceptions import ConfigurationError, RequestRejectedError


@dataclass(frozen=True)
class PlacementConfig:
    num_nodes: int
    num_keys: int
    replication_degree: int = DEFAULT_REPLICATION_DEGREE
    placement_seed: int = DEFAULT_PLACEMENT_SEED
    overrides: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_nodes < 1 or self.num_keys < 1:
            msg = f"Need at least one node and one key, got {self.num_nodes}/{self.num_keys}"
            raise ConfigurationError(msg)
        if not 1 <= self.replication_degree <= self.num_nodes:
            msg = (
                f"replication_degree {self.replication_degree} must be between 1 "
                f"and num_nodes ({self.num_nodes})"
            )
            raise ConfigurationError(msg)
        for key, nodes in self.overrides.items():
            if not 0 <= key < self.num_keys:
                msg = f"Placement override for unknown key {key}"
                raise ConfigurationError(msg)
            if not nodes or len(set(nodes)) != len(nodes):
                msg = f"Placement override for key {key} must list distinct nodes"
                raise ConfigurationError(msg)
            if any(not 0 <= n < self.num_nodes for n in nodes):
                msg = f"Placement override for key {key} names an unknown node"
                raise ConfigurationError(msg)


class PartitionMap:
    """Maps every key to an ordered tuple of replica nodes.

    Keys are ranked by a seeded blake2b digest; the key at rank r starts at
    node r mod N and takes `replication_degree` consecutive nodes on the ring.
    Ranking instead of hashing straight to a node keeps per-node counts within
    one key of the mean.
    """

    def __init__(self, config: PlacementConfig) -> None:
        self._config = config
        ranked = sorted(range(config.num_keys), key=self._digest)
        n = config.num_nodes
        degree = config.replication_degree
        placement: list[tuple[int, ...]] = [()] * config.num_keys
        for rank, key in enumerate(ranked):
            start = rank % n
            placement[key] = tuple((start + j) % n for j in range(degree))
        for key, nodes in config.overrides.items():
            placement[key] = tuple(nodes)
        self._placement = tuple(placement)

    def _digest(self, key: int) -> bytes:
        seed = self._config.placement_seed.to_bytes(8, "big", signed=True)
        return hashlib.blake2b(key.to_bytes(8, "big"), digest_size=8, key=seed).digest()

    @property
    def config(self) -> PlacementConfig:
        return self._config

    @property
    def num_nodes(self) -> int:
        return self._config.num_nodes

    @property
    def num_keys(self) -> int:
        return self._config.num_keys

    def replicas(self, key: int) -> tuple[int, ...]:
        if not 0 <= key < self._config.num_keys:
            msg = f"Key {key} outside key space [0, {self._config.num_keys})"
            raise RequestRejectedError(msg)
        return self._placement[key]

    def replicas_of(self, keys) -> tuple[int, ...]:
        """Sorted union of the replicas of *keys*."""
        nodes: set[int] = set()
        for key in keys:
            nodes.update(self.replicas(key))
        return tuple(sorted(nodes))

    def is_replica(self, node: int, key: int) -> bool:
        return node in self.replicas(key)

    @cached_property
    def _keys_by_node(self) -> tuple[tuple[int, ...], ...]:
        index: list[list[int]] = [[] for _ in range(self._config.num_nodes)]
        for key, nodes in enumerate(self._placement):
            for node in nodes:
                index[node].append(key)
        return tuple(tuple(keys) for keys in index)

    def keys_on(self, node: int) -> tuple[int, ...]:
        return self._keys_by_node[node]

    def keys_not_on(self, node: int) -> tuple[int, ...]:
        local = set(self.keys_on(node))
        return tuple(k for k in range(self._config.num_keys) if k not in local)


def replicas(key: int, cfg: PlacementConfig) -> tuple[int, ...]:
    """One-shot lookup; builds the map, so prefer PartitionMap in loops."""
    return PartitionMap(cfg).replicas(key)
