"""Deterministic discrete-event network connecting the simulated nodes.

A single heap of `(time, priority, seq)` events drives everything: message
deliveries, timers, and the coroutines that implement clients and
coordinators. Coroutines await `SimFuture` objects; when a future resolves,
the waiting task is resumed by a fresh event at the current time, so no
handler ever runs nested inside another.
"""

from __future__ import annotations

import heapq
import logging
import random
from collections import Counter
from collections.abc import Callable, Coroutine
from dataclasses import dataclass, field
from typing import Any

from .const import (
    DEFAULT_LATENCY,
    LATENCY_FIXED,
    LATENCY_LOGNORMAL,
    LATENCY_MODELS,
    LATENCY_UNIFORM,
    LIVELOCK_EVENT_WINDOW,
    LOG_MESSAGES,
    LOOPBACK_LATENCY,
    PRIORITY_LOCAL,
    TICKS_PER_UNIT,
)
from .core_types import Message
from .exceptions import ConfigurationError, LivelockError, RequestTimeoutError
from .trace import EV_DELIVER, EV_DROP, TraceLog

_LOGGER = logging.getLogger(__name__)


def to_ticks(units: float) -> int:
    """Convert simulated time units to integer ticks."""
    return int(round(units * TICKS_PER_UNIT))


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    latency_model: str = LATENCY_FIXED
    latency: tuple[float, ...] = (DEFAULT_LATENCY,)
    drop_rate: float = 0.0
    priority_preemption: bool = True
    livelock_window: int = LIVELOCK_EVENT_WINDOW

    def __post_init__(self) -> None:
        if self.latency_model not in LATENCY_MODELS:
            msg = f"Unknown latency model {self.latency_model!r}"
            raise ConfigurationError(msg)
        expected = 1 if self.latency_model == LATENCY_FIXED else 2
        if len(self.latency) != expected:
            msg = (
                f"Latency model {self.latency_model} takes {expected} "
                f"parameter(s), got {self.latency}"
            )
            raise ConfigurationError(msg)
        if not 0.0 <= self.drop_rate < 1.0:
            msg = f"drop_rate must be in [0, 1), got {self.drop_rate}"
            raise ConfigurationError(msg)


@dataclass
class RunReport:
    events: int = 0
    end_time: int = 0
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    by_kind: dict[str, int] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    quiescent: bool = False
    trace_digest: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "events": self.events,
            "end_time": self.end_time,
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "by_kind": dict(sorted(self.by_kind.items())),
            "counters": dict(sorted(self.counters.items())),
            "quiescent": self.quiescent,
            "trace_digest": self.trace_digest,
        }


class TimerHandle:
    __slots__ = ("_callback", "_args", "cancelled")

    def __init__(self, callback: Callable[..., Any], args: tuple[Any, ...]) -> None:
        self._callback = callback
        self._args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def _run(self) -> None:
        self._callback(*self._args)


_PENDING = object()


class SimFuture:
    """Single-assignment result that simulated coroutines can await.

    Stands in for asyncio.Future. A task waiting on one is resumed by a new
    event on the simulator heap, never inline, so its place among equal-time
    events is fixed by `(time, priority, seq)` and a seeded run replays byte
    for byte.
    """

    def __init__(self) -> None:
        self._result: Any = _PENDING
        self._exception: BaseException | None = None
        self._callbacks: list[Callable[[SimFuture], None]] = []

    def done(self) -> bool:
        return self._result is not _PENDING or self._exception is not None

    def result(self) -> Any:
        if self._exception is not None:
            raise self._exception
        if self._result is _PENDING:
            msg = "Future is not done"
            raise RuntimeError(msg)
        return self._result

    def exception(self) -> BaseException | None:
        return self._exception

    def set_result(self, value: Any) -> None:
        if self.done():
            msg = "Future already resolved"
            raise RuntimeError(msg)
        self._result = value
        self._fire()

    def set_exception(self, exc: BaseException) -> None:
        if self.done():
            msg = "Future already resolved"
            raise RuntimeError(msg)
        self._exception = exc
        self._fire()

    def add_done_callback(self, callback: Callable[[SimFuture], None]) -> None:
        if self.done():
            callback(self)
        else:
            self._callbacks.append(callback)

    def _fire(self) -> None:
        callbacks, self._callbacks = self._callbacks, []
        for callback in callbacks:
            callback(self)

    def __await__(self):
        if not self.done():
            yield self
        return self.result()


class SimTask(SimFuture):
    """Drives a coroutine that awaits SimFutures.

    Each step is an event on the simulator heap instead of a callback on an
    asyncio loop. asyncio schedules timers on the host clock and runs ready
    callbacks in arrival order only, so simulated time would follow host speed
    and equal-time Remove / Commit / Vote / Read events would lose their
    priority order.
    """

    def __init__(self, net: SimNetwork, coro: Coroutine[Any, Any, Any], name: str) -> None:
        super().__init__()
        self._net = net
        self._coro = coro
        self.name = name
        net.call_soon(self._step, None, None)

    def _step(self, value: Any, exc: BaseException | None) -> None:
        try:
            if exc is not None:
                awaited = self._coro.throw(exc)
            else:
                awaited = self._coro.send(value)
        except StopIteration as stop:
            self.set_result(stop.value)
            return
        except Exception as err:
            _LOGGER.error("Task %s failed: %s", self.name, err)
            self.set_exception(err)
            self._net._task_failed(self, err)
            return
        if not isinstance(awaited, SimFuture):
            msg = f"Task {self.name} awaited a non-simulated object {awaited!r}"
            self._coro.close()
            raise TypeError(msg)
        awaited.add_done_callback(self._wakeup)

    def _wakeup(self, future: SimFuture) -> None:
        exc = future.exception()
        if exc is not None:
            self._net.call_soon(self._step, None, exc)
        else:
            self._net.call_soon(self._step, future.result(), None)


class SimNetwork:
    """Seeded scheduler plus point-to-point channels between node endpoints."""

    def __init__(self, config: SimConfig | None = None, trace: TraceLog | None = None) -> None:
        self.config = config or SimConfig()
        self.trace = trace if trace is not None else TraceLog()
        self.rng = random.Random(self.config.seed)
        self._now = 0
        self._seq = 0
        self._queue: list[tuple[int, int, int, TimerHandle]] = []
        self._endpoints: dict[int, Callable[[Message], None]] = {}
        self._channel_tail: dict[tuple[int, int, int], int] = {}
        self._blocked: set[frozenset[int]] = set()
        self._failures: list[tuple[SimTask, BaseException]] = []
        self._events = 0
        self._since_progress = 0
        self.counters: Counter[str] = Counter()
        self._report = RunReport()
        self._by_kind: Counter[str] = Counter()

    # -- time and scheduling -------------------------------------------------

    @property
    def now(self) -> int:
        return self._now

    def _push(self, when: int, priority: int, handle: TimerHandle) -> TimerHandle:
        if when < self._now:
            msg = f"Cannot schedule in the past ({when} < {self._now})"
            raise ValueError(msg)
        self._seq += 1
        heapq.heappush(self._queue, (when, priority, self._seq, handle))
        return handle

    def call_at(self, when: int, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        return self._push(when, PRIORITY_LOCAL, TimerHandle(callback, args))

    def call_later(self, delay: int, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        return self.call_at(self._now + max(0, int(delay)), callback, *args)

    def call_soon(self, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        return self.call_at(self._now, callback, *args)

    def create_future(self) -> SimFuture:
        return SimFuture()

    def spawn(self, coro: Coroutine[Any, Any, Any], name: str = "task") -> SimTask:
        return SimTask(self, coro, name)

    def sleep(self, delay: int) -> SimFuture:
        future = SimFuture()
        self.call_later(delay, future.set_result, None)
        return future

    def with_timeout(self, future: SimFuture, timeout: int, what: str = "request") -> SimFuture:
        """Future that mirrors *future* or fails with RequestTimeoutError."""
        out = SimFuture()

        def _expire() -> None:
            if not out.done():
                out.set_exception(RequestTimeoutError(f"{what} timed out after {timeout} ticks"))

        timer = self.call_later(timeout, _expire)

        def _finish(source: SimFuture) -> None:
            if out.done():
                return
            timer.cancel()
            exc = source.exception()
            if exc is not None:
                out.set_exception(exc)
            else:
                out.set_result(source.result())

        future.add_done_callback(_finish)
        return out

    def note_progress(self, counter: str | None = None) -> None:
        self._since_progress = 0
        if counter:
            self.counters[counter] += 1

    def _task_failed(self, task: SimTask, err: BaseException) -> None:
        self._failures.append((task, err))

    # -- messaging -------------------------------------------------------------

    def register(self, node: int, handler: Callable[[Message], None]) -> None:
        self._endpoints[node] = handler

    def partition(self, a: int, b: int) -> None:
        self._blocked.add(frozenset((a, b)))

    def heal(self) -> None:
        self._blocked.clear()

    def sample_latency(self) -> int:
        model = self.config.latency_model
        params = self.config.latency
        if model == LATENCY_FIXED:
            units = params[0]
        elif model == LATENCY_UNIFORM:
            units = self.rng.uniform(params[0], params[1])
        elif model == LATENCY_LOGNORMAL:
            units = self.rng.lognormvariate(params[0], params[1])
        else:
            msg = f"Unknown latency model {model}"
            raise ConfigurationError(msg)
        return max(1, to_ticks(units))

    def send(self, message: Message) -> None:
        if message.dest not in self._endpoints:
            msg = f"Unknown destination node {message.dest}"
            raise ConfigurationError(msg)
        self._report.sent += 1
        self._by_kind[str(message.kind)] += 1
        if message.sender == message.dest:
            latency = LOOPBACK_LATENCY
        else:
            latency = self.sample_latency()
            if frozenset((message.sender, message.dest)) in self._blocked or (
                self.config.drop_rate and self.rng.random() < self.config.drop_rate
            ):
                self._report.dropped += 1
                self.trace.record(self._now, EV_DROP, message.dest, message.txn, message=message)
                return
        channel = (message.sender, message.dest, message.priority)
        when = max(self._now + latency, self._channel_tail.get(channel, 0))
        self._channel_tail[channel] = when
        priority = message.priority if self.config.priority_preemption else PRIORITY_LOCAL
        self._push(when, priority, TimerHandle(self._deliver, (message,)))

    def _deliver(self, message: Message) -> None:
        self._report.delivered += 1
        if LOG_MESSAGES:
            _LOGGER.debug(
                "t=%d %s %d->%d %s", self._now, message.kind, message.sender, message.dest, message.payload
            )
        if self.trace.record_messages:
            self.trace.record(self._now, EV_DELIVER, message.dest, message.txn, message=message)
        self._endpoints[message.dest](message)

    # -- driving ---------------------------------------------------------------

    def run(self, until: int | None = None, max_events: int | None = None) -> RunReport:
        """Process events until quiescent, past time *until*, or *max_events*."""
        processed = 0
        while self._queue:
            when, _, _, handle = self._queue[0]
            if until is not None and when > until:
                break
            if max_events is not None and processed >= max_events:
                break
            heapq.heappop(self._queue)
            if handle.cancelled:
                continue
            self._now = when
            self._events += 1
            processed += 1
            self._since_progress += 1
            handle._run()
            if self._failures:
                task, err = self._failures[0]
                msg = f"Simulated task {task.name} failed at t={self._now}"
                raise RuntimeError(msg) from err
            if self._since_progress > self.config.livelock_window:
                dump = {"time": self._now, "pending_events": len(self._queue)}
                msg = f"No progress in {self.config.livelock_window} events at t={self._now}"
                raise LivelockError(msg, dump)
        if until is not None and not self._queue:
            self._now = max(self._now, until)
        return self.report()

    def is_quiescent(self) -> bool:
        return not any(not handle.cancelled for *_, handle in self._queue)

    def report(self) -> RunReport:
        report = RunReport(
            events=self._events,
            end_time=self._now,
            sent=self._report.sent,
            delivered=self._report.delivered,
            dropped=self._report.dropped,
            by_kind=dict(self._by_kind),
            counters=dict(self.counters),
            quiescent=self.is_quiescent(),
        )
        report.trace_digest = self.trace.digest()
        return report
