"""Shared fixtures for the sss_kv tests.

Every cluster built here runs over the deterministic simulator with a fixed
100-tick hop latency unless a test asks for something else.
"""

from __future__ import annotations

import os
import sys
from collections.abc import Callable

import pytest

# Ensure the project root is on sys.path so that `sss_kv` imports as a package.
_REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _REPO_ROOT not in sys.path:
    sys.path.insert(0, _REPO_ROOT)

from sss_kv.cluster import Cluster  # noqa: E402
from sss_kv.const import PROTOCOL_SSS  # noqa: E402
from sss_kv.core_types import VectorClock  # noqa: E402
from sss_kv.partition_map import PlacementConfig  # noqa: E402
from sss_kv.simnet import SimConfig  # noqa: E402

# ---------------------------------------------------------------------------
# Constants shared across test modules
# ---------------------------------------------------------------------------

HOP = 100  # ticks, default fixed latency
SEEDS = (1, 2, 3, 5, 8)


def only_on(*nodes: int) -> dict[int, tuple[int, ...]]:
    """Placement overrides: key k lives only on nodes[k]."""
    return {key: (node,) for key, node in enumerate(nodes)}


def vc(*entries: int) -> VectorClock:
    return VectorClock.of(entries)


# ---------------------------------------------------------------------------
# Cluster builders
# ---------------------------------------------------------------------------


@pytest.fixture
def make_cluster() -> Callable[..., Cluster]:
    """Return a factory building a cluster with single-replica overrides."""

    def _make(
        num_nodes: int = 3,
        owners: tuple[int, ...] = (1, 2),
        *,
        protocol: str = PROTOCOL_SSS,
        initial_vcs: dict[int, VectorClock] | None = None,
        **kwargs,
    ) -> Cluster:
        placement = PlacementConfig(
            num_nodes, len(owners), replication_degree=1, overrides=only_on(*owners)
        )
        return Cluster(
            placement,
            protocol=protocol,
            sim=kwargs.pop("sim", SimConfig()),
            initial_vcs=initial_vcs,
            **kwargs,
        )

    return _make

