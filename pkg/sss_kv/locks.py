"""Per-node shared/exclusive lock table with all-or-nothing grants and timeouts."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from ._compat import StrEnum

from .core_types import TxnId
from .simnet import SimNetwork, TimerHandle
from .trace import EV_LOCK

_LOGGER = logging.getLogger(__name__)


class LockMode(StrEnum):
    SHARED = "shared"
    EXCLUSIVE = "exclusive"


class LockResult(StrEnum):
    GRANTED = "granted"
    TIMEOUT = "timeout"


@dataclass
class _KeyLock:
    exclusive: TxnId | None = None
    shared: set[TxnId] = field(default_factory=set)

    def free(self) -> bool:
        return self.exclusive is None and not self.shared

    def compatible(self, txn: TxnId, mode: LockMode) -> bool:
        if self.exclusive is not None:
            return self.exclusive == txn
        if mode is LockMode.SHARED:
            return True
        return not self.shared or self.shared == {txn}


@dataclass
class LockRequest:
    txn: TxnId
    exclusive: frozenset[int]
    shared: frozenset[int]
    on_done: Callable[[bool], None]
    timer: TimerHandle | None = None


class LockTable:
    """Locks for one node.

    A request names every key it needs; it is granted only when all of them
    are compatible, otherwise it waits in FIFO order until a release makes it
    grantable or its timeout fires (the timeout is what breaks deadlocks).
    """

    def __init__(self, net: SimNetwork, node: int) -> None:
        self._net = net
        self._node = node
        self._locks: dict[int, _KeyLock] = {}
        self._held: dict[TxnId, set[int]] = {}
        self._waiting: list[LockRequest] = []

    def _modes(self, request: LockRequest) -> Iterable[tuple[int, LockMode]]:
        for key in sorted(request.exclusive):
            yield key, LockMode.EXCLUSIVE
        for key in sorted(request.shared):
            yield key, LockMode.SHARED

    def _grantable(self, request: LockRequest) -> bool:
        return all(
            self._locks.get(key, _KeyLock()).compatible(request.txn, mode)
            for key, mode in self._modes(request)
        )

    def _grant(self, request: LockRequest) -> None:
        for key, mode in self._modes(request):
            lock = self._locks.setdefault(key, _KeyLock())
            if mode is LockMode.EXCLUSIVE:
                lock.shared.discard(request.txn)
                lock.exclusive = request.txn
            elif lock.exclusive != request.txn:
                lock.shared.add(request.txn)
            self._held.setdefault(request.txn, set()).add(key)
        if request.timer is not None:
            request.timer.cancel()
        self._net.trace.record(
            self._net.now,
            EV_LOCK,
            self._node,
            request.txn,
            result=str(LockResult.GRANTED),
            exclusive=tuple(sorted(request.exclusive)),
            shared=tuple(sorted(request.shared)),
        )

    def acquire(
        self,
        txn: TxnId,
        exclusive: Iterable[int],
        shared: Iterable[int],
        timeout: int,
        on_done: Callable[[bool], None],
    ) -> None:
        """Request locks; *on_done* receives True on grant, False on timeout.

        An immediate grant calls *on_done* synchronously. A key that is both
        read and written is only locked exclusively.
        """
        exclusive_keys = frozenset(exclusive)
        request = LockRequest(txn, exclusive_keys, frozenset(shared) - exclusive_keys, on_done)
        if self._grantable(request):
            self._grant(request)
            on_done(True)
            return
        request.timer = self._net.call_later(timeout, self._expire, request)
        self._waiting.append(request)

    def _expire(self, request: LockRequest) -> None:
        if request not in self._waiting:
            return
        self._waiting.remove(request)
        _LOGGER.debug("Lock request of %s timed out at node %d", request.txn, self._node)
        self._net.trace.record(
            self._net.now, EV_LOCK, self._node, request.txn, result=str(LockResult.TIMEOUT)
        )
        request.on_done(False)

    def release(self, txn: TxnId) -> None:
        """Drop every lock held by *txn* and cancel its waiting request."""
        for request in [r for r in self._waiting if r.txn == txn]:
            self._waiting.remove(request)
            if request.timer is not None:
                request.timer.cancel()
        for key in self._held.pop(txn, set()):
            lock = self._locks[key]
            if lock.exclusive == txn:
                lock.exclusive = None
            lock.shared.discard(txn)
            if lock.free():
                del self._locks[key]
        self._retry_waiting()

    def _retry_waiting(self) -> None:
        granted: list[LockRequest] = []
        for request in list(self._waiting):
            if self._grantable(request):
                self._waiting.remove(request)
                self._grant(request)
                granted.append(request)
        for request in granted:
            self._net.call_soon(request.on_done, True)

    def holds(self, txn: TxnId) -> bool:
        return bool(self._held.get(txn))

    def holders(self, key: int) -> tuple[TxnId | None, frozenset[TxnId]]:
        lock = self._locks.get(key, _KeyLock())
        return lock.exclusive, frozenset(lock.shared)

    def is_empty(self) -> bool:
        return not self._locks and not self._waiting

    def dump(self) -> dict[str, object]:
        return {
            "locks": {
                key: {
                    "exclusive": str(lock.exclusive) if lock.exclusive else None,
                    "shared": sorted(str(t) for t in lock.shared),
                }
                for key, lock in sorted(self._locks.items())
            },
            "waiting": [str(r.txn) for r in self._waiting],
        }
