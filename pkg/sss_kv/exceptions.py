"""Exceptions raised by the SSS store, simulator and checker."""

from __future__ import annotations

from typing import Any


class SSSError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SSSError):
    """Invalid configuration or mismatched vector-clock lengths."""


class RequestRejectedError(SSSError):
    """A request names a key outside the configured key space."""


class ReadOnlyWriteError(SSSError):
    """A write was issued on a read-only transaction."""


class TransactionStateError(SSSError):
    """An operation was attempted in a state that does not allow it."""


class TransactionAbortedError(SSSError):
    """An update transaction aborted; the client may retry it."""

    def __init__(self, txn: Any, reason: str) -> None:
        super().__init__(f"Transaction {txn} aborted: {reason}")
        self.txn = txn
        self.reason = reason


class RequestTimeoutError(SSSError):
    """A simulated request did not complete within its timeout."""


class LivelockError(SSSError):
    """The simulator processed too many events without any progress."""

    def __init__(self, msg: str, dump: dict[str, Any] | None = None) -> None:
        super().__init__(msg)
        self.dump = dump or {}


class SimulationStalledError(SSSError):
    """The event queue drained while transactions were still pending."""

    def __init__(self, msg: str, dump: dict[str, Any] | None = None) -> None:
        super().__init__(msg)
        self.dump = dump or {}


class CheckerError(SSSError):
    """The trace cannot be turned into a history (gap or inconsistency)."""


class TooManyTransactionsError(CheckerError):
    """Brute-force order search refused: too many committed transactions."""
