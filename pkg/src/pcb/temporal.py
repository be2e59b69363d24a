"""Temporal abstraction and trailing-window pattern evaluation.

A window of N calendar days ending at `as_of` covers the as-of date plus the
preceding N-1 dates. Events whose quality is low or veryLow are excluded from
all evaluation; the raw data stays in the stores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Optional

from .events import Event
from .lang import nodes as n

EXCLUDED_QUALITIES = ("low", "veryLow")


class PatternTypeError(TypeError):
    pass


def compare(op: str, observed: float, threshold: float) -> bool:
    if op == ">=":
        return observed >= threshold
    if op == ">":
        return observed > threshold
    if op == "<=":
        return observed <= threshold
    if op == "<":
        return observed < threshold
    if op == "==":
        return observed == threshold
    raise ValueError(f"unknown comparison {op!r}")


def _usable(event: Event) -> bool:
    return event.quality not in EXCLUDED_QUALITIES


def _expr_holds(expr: n.Compare, event: Event) -> bool:
    if not isinstance(event.value, (int, float)) or isinstance(event.value, bool):
        return False
    threshold = expr.right
    if not isinstance(threshold, n.Num):
        raise PatternTypeError(f"abstraction threshold must be numeric: {threshold!r}")
    return compare(expr.op, float(event.value), threshold.value)


def evaluate_abstraction(
    abstraction: n.AnnotateTemporal, events: Iterable[Event], day: date
) -> bool:
    """or: some expression matches some same-day event of its concept;
    and: every expression matches at least one same-day event."""
    todays: dict[str, list[Event]] = {}
    for ev in events:
        if _usable(ev) and ev.valid_start.date() == day:
            todays.setdefault(ev.concept_id, []).append(ev)

    def satisfied(expr: n.Compare) -> bool:
        assert isinstance(expr.left, n.GetNumber)
        return any(_expr_holds(expr, ev) for ev in todays.get(expr.left.concept_id, ()))

    if abstraction.op == "or":
        return any(satisfied(e) for e in abstraction.exprs)
    return all(satisfied(e) for e in abstraction.exprs)


def window_dates(as_of: datetime, window_days: int) -> list[date]:
    end = as_of.date()
    return [end - timedelta(days=i) for i in range(window_days - 1, -1, -1)]


def _counts_on_date(events: list[Event]) -> bool:
    # boolean False records a negative finding, everything else is an occurrence
    return any(ev.value is not False for ev in events)


def window_query(
    agg: str,
    cmp: str,
    threshold: float,
    target: str,
    window_days: int,
    as_of: datetime,
    events: Iterable[Event],
    abstractions: Optional[dict[str, n.AnnotateTemporal]] = None,
) -> tuple[bool, float]:
    """Evaluate the trailing window ending on as_of's date.

    count over an abstraction: dates on which it holds; count over a concept:
    dates with a qualifying event of it; sum: total of the concept's numeric
    values inside the window.
    """
    abstractions = abstractions or {}
    usable = [ev for ev in events if _usable(ev)]
    dates = window_dates(as_of, window_days)
    window_set = set(dates)

    if agg == "count":
        if target in abstractions:
            spec = abstractions[target]
            observed = float(sum(1 for d in dates if evaluate_abstraction(spec, usable, d)))
        else:
            per_date: dict[date, list[Event]] = {}
            for ev in usable:
                if ev.concept_id == target and ev.valid_start.date() in window_set:
                    per_date.setdefault(ev.valid_start.date(), []).append(ev)
            observed = float(sum(1 for evs in per_date.values() if _counts_on_date(evs)))
    elif agg == "sum":
        if target in abstractions:
            raise PatternTypeError(f"cannot sum over abstraction {target!r}")
        values = []
        for ev in usable:
            if ev.concept_id == target and ev.valid_start.date() in window_set:
                if not isinstance(ev.value, (int, float)) or isinstance(ev.value, bool):
                    raise PatternTypeError(
                        f"sum over non-numeric value {ev.value!r} of concept {target}"
                    )
                values.append(float(ev.value))
        # fsum: one correctly-rounded result whatever the insertion order
        observed = math.fsum(values)
    else:
        raise ValueError(f"unknown aggregator {agg!r}")

    return compare(cmp, observed, threshold), observed


def empty_window_satisfiable(agg: str, cmp: str, threshold: float) -> bool:
    """True when a window with no data already satisfies the comparison.

    Such absence patterns must not fire before every date of their window has
    seen some data (missing target values still count as no occurrence)."""
    return compare(cmp, 0.0, threshold)


def window_data_coverage(events: Iterable[Event], as_of: datetime,
                         window_days: int) -> int:
    """Distinct dates inside the window carrying at least one usable event."""
    window_set = set(window_dates(as_of, window_days))
    return len({
        ev.valid_start.date()
        for ev in events
        if _usable(ev) and ev.valid_start.date() in window_set
    })


def apply_absence_guard(holds: bool, agg: str, cmp: str, threshold: float,
                        events, as_of: datetime, window_days: int,
                        state: dict) -> bool:
    """Defer the first firing of an absence pattern until its window has been
    covered by data once; afterwards quiet days genuinely mean absence. The
    sticky flag lives in the caller-supplied state dict."""
    if not holds or not empty_window_satisfiable(agg, cmp, threshold):
        return holds
    if state.get("guardMet"):
        return holds
    if window_data_coverage(events, as_of, window_days) >= window_days:
        state["guardMet"] = True
        return holds
    return False


@dataclass
class Firing:
    subscription_id: str
    pattern_id: str
    as_of: datetime
    observed: float
    subscriber: object


@dataclass
class _Subscription:
    sub_id: str
    patient_id: str
    pattern: object  # knowledge.PatternRef shape
    subscriber: object
    enrolled_on: date
    armed: bool = True
    last_state: bool = False
    guard_state: dict = None


class SubscriptionRegistry:
    """Edge-triggered pattern subscriptions over a patient's event history.

    A subscription fires when its pattern turns true, at most once per arming;
    it re-arms on acknowledge, and fires again only after the pattern has
    dropped back to false in between.
    """

    def __init__(self, abstractions: Optional[dict[str, n.AnnotateTemporal]] = None):
        self.abstractions = dict(abstractions or {})
        self._subs: dict[str, _Subscription] = {}
        self._next = 1

    def subscribe(self, patient_id: str, pattern, subscriber, enrolled_on: date) -> str:
        sub_id = f"sub-{self._next}"
        self._next += 1
        self._subs[sub_id] = _Subscription(
            sub_id, patient_id, pattern, subscriber, enrolled_on=enrolled_on,
            guard_state={},
        )
        return sub_id

    def unsubscribe(self, sub_id: str) -> None:
        self._subs.pop(sub_id, None)

    def acknowledge(self, sub_id: str) -> None:
        sub = self._subs.get(sub_id)
        if sub is not None:
            sub.armed = True

    def active_for(self, patient_id: str) -> list[str]:
        return [s.sub_id for s in self._subs.values() if s.patient_id == patient_id]

    def evaluate(
        self, patient_id: str, events: list[Event], as_of: datetime
    ) -> list[Firing]:
        firings: list[Firing] = []
        ordered = sorted(
            (s for s in self._subs.values() if s.patient_id == patient_id),
            key=lambda s: (str(s.pattern.pattern_id), s.sub_id),
        )
        for sub in ordered:
            p = sub.pattern
            holds, observed = window_query(
                p.aggregator,
                p.comparison,
                float(p.threshold),
                p.target,
                p.window_days,
                as_of,
                events,
                self.abstractions,
            )
            holds = apply_absence_guard(
                holds, p.aggregator, p.comparison, float(p.threshold),
                events, as_of, p.window_days, sub.guard_state,
            )
            rising = holds and not sub.last_state
            if rising and sub.armed:
                sub.armed = False
                firings.append(
                    Firing(sub.sub_id, str(p.pattern_id), as_of, observed, sub.subscriber)
                )
            sub.last_state = holds
        return firings
