"""Deterministic discrete-event loop over a simulated clock.

Everything in a run reads time from here. Events fire in (time, priority,
insertion sequence) order, so identical inputs replay identically. At equal
times, date rollovers run before engine timers, engine timers before channel
deliveries, and scenario injections last, which lets an injected answer find
the prompt that was issued at the same instant.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from typing import Callable, Optional

PRIORITY_ROLLOVER = 0
PRIORITY_ENGINE = 1
PRIORITY_CHANNEL = 2
PRIORITY_SCENARIO = 3


@dataclass(order=True)
class _Entry:
    when: datetime
    priority: int
    seq: int
    fn: Callable[[], None] = field(compare=False)
    cancelled: bool = field(default=False, compare=False)


class EventLoop:
    def __init__(self, start: datetime):
        self.now = start
        self._heap: list[_Entry] = []
        self._seq = 0

    def schedule(self, when: datetime, priority: int, fn: Callable[[], None]) -> _Entry:
        if when < self.now:
            when = self.now
        entry = _Entry(when, priority, self._seq, fn)
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return entry

    def schedule_after(self, delay: timedelta, priority: int, fn) -> _Entry:
        return self.schedule(self.now + delay, priority, fn)

    def cancel(self, entry: Optional[_Entry]) -> None:
        if entry is not None:
            entry.cancelled = True

    def peek_time(self) -> Optional[datetime]:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].when if self._heap else None

    def run_until(self, horizon: datetime) -> None:
        """Run every event scheduled at or before the horizon."""
        while True:
            when = self.peek_time()
            if when is None or when > horizon:
                break
            entry = heapq.heappop(self._heap)
            if entry.cancelled:
                continue
            assert entry.when >= self.now, "clock would move backwards"
            self.now = entry.when
            entry.fn()
        if self.now < horizon:
            self.now = horizon


def schedule_daily_rollovers(loop: EventLoop, until: datetime, on_rollover) -> None:
    day = loop.now.date() + timedelta(days=1)
    while datetime.combine(day, time.min) <= until:
        midnight = datetime.combine(day, time.min)
        loop.schedule(midnight, PRIORITY_ROLLOVER, lambda t=midnight: on_rollover(t))
        day += timedelta(days=1)
