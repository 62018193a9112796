"""Deterministic discrete-event kernel.

Virtual time is an integer count of microseconds since epoch 0. Events at
equal timestamps dispatch in the order they were scheduled. Randomness comes
from labelled sub-streams of a single master seed: each stream is a numpy
``PCG64`` generator seeded with ``SeedSequence(master_seed, spawn_key=blake2b(label))``.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from typing import Any, Callable

import numpy as np

US_PER_S = 1_000_000
US_PER_MS = 1_000


def seconds(s: float) -> int:
    return int(round(s * US_PER_S))


def millis(ms: float) -> int:
    return int(round(ms * US_PER_MS))


class SchedulingInPast(ValueError):
    pass


class EventHandle:
    """Returned by :meth:`Kernel.schedule`; lets the caller cancel before firing."""

    __slots__ = ("fire_at", "seq", "action", "args", "cancelled", "fired", "_kernel")

    def __init__(self, kernel: "Kernel", fire_at: int, seq: int, action: Callable, args: tuple):
        self._kernel = kernel
        self.fire_at = fire_at
        self.seq = seq
        self.action = action
        self.args = args
        self.cancelled = False
        self.fired = False

    def cancel(self) -> bool:
        if self.fired or self.cancelled:
            return False
        self.cancelled = True
        self._kernel.cancelled += 1
        return True

    def __lt__(self, other: "EventHandle") -> bool:
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)

    def __repr__(self) -> str:
        name = getattr(self.action, "__qualname__", repr(self.action))
        return f"<Event t={self.fire_at} seq={self.seq} {name}>"


class RngStream:
    """A labelled, independently seeded random stream."""

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=16).digest()
        spawn_key = tuple(int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4))
        ss = np.random.SeedSequence(entropy=seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self._gen.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r})"


class Kernel:
    """Single-executor event loop over virtual time.

    ``schedule`` and ``run_until`` must only be called from the owning thread;
    actions run to completion one at a time.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._now = 0
        self._queue: list[EventHandle] = []
        self._seq = itertools.count()
        self._streams: dict[str, RngStream] = {}
        self.scheduled = 0
        self.dispatched = 0
        self.cancelled = 0

    def now(self) -> int:
        return self._now

    def schedule(self, at: int, action: Callable, *args: Any) -> EventHandle:
        at = int(at)
        if at < self._now:
            raise SchedulingInPast(f"cannot schedule at {at} < now {self._now}")
        handle = EventHandle(self, at, next(self._seq), action, args)
        heapq.heappush(self._queue, handle)
        self.scheduled += 1
        return handle

    def call_later(self, delay: int, action: Callable, *args: Any) -> EventHandle:
        return self.schedule(self._now + int(delay), action, *args)

    def pending(self) -> int:
        return sum(1 for h in self._queue if not h.cancelled)

    def next_event_time(self) -> int | None:
        self._drop_cancelled_head()
        return self._queue[0].fire_at if self._queue else None

    def _drop_cancelled_head(self) -> None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)

    def run_until(self, t: int) -> int:
        """Dispatch every event with ``fire_at <= t``; the clock ends at ``t``."""
        t = int(t)
        if t < self._now:
            raise SchedulingInPast(f"run_until({t}) is before now {self._now}")
        count = 0
        queue = self._queue
        while queue:
            head = queue[0]
            if head.cancelled:
                heapq.heappop(queue)
                continue
            if head.fire_at > t:
                break
            heapq.heappop(queue)
            self._now = head.fire_at
            head.fired = True
            head.action(*head.args)
            count += 1
        self._now = t
        self.dispatched += count
        return count

    def run(self, max_events: int | None = None) -> int:
        """Dispatch until the queue is empty or ``max_events`` have fired."""
        count = 0
        queue = self._queue
        while queue and (max_events is None or count < max_events):
            head = heapq.heappop(queue)
            if head.cancelled:
                continue
            self._now = head.fire_at
            head.fired = True
            head.action(*head.args)
            count += 1
        self.dispatched += count
        return count

    def rng(self, stream_id: str) -> RngStream:
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return stream
