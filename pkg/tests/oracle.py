"""Independent brute-force oracle for trailing-window queries.

Deliberately naive: walks every date in the window and rescans the whole
event list per date. Kept free of any pcb.temporal internals besides the
comparison-operator table semantics, re-stated here by hand.
"""

from __future__ import annotations

from datetime import datetime, timedelta

_OPS = {
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
}


def _abstraction_holds_on(spec, events, day) -> bool:
    hits = []
    for expr in spec.exprs:
        ok = False
        for ev in events:
            if ev.quality in ("low", "veryLow"):
                continue
            if ev.valid_start.date() != day:
                continue
            if ev.concept_id != expr.left.concept_id:
                continue
            if isinstance(ev.value, bool) or not isinstance(ev.value, (int, float)):
                continue
            if _OPS[expr.op](float(ev.value), expr.right.value):
                ok = True
                break
        hits.append(ok)
    if spec.op == "or":
        return any(hits)
    return all(hits)


def brute_force_window_query(
    agg, cmp, threshold, target, window_days, as_of: datetime, events, abstractions=None
):
    abstractions = abstractions or {}
    days = [as_of.date() - timedelta(days=offset) for offset in range(window_days)]
    if agg == "count":
        observed = 0
        for day in days:
            if target in abstractions:
                if _abstraction_holds_on(abstractions[target], events, day):
                    observed += 1
            else:
                found = False
                for ev in events:
                    if ev.quality in ("low", "veryLow"):
                        continue
                    if ev.concept_id == target and ev.valid_start.date() == day:
                        if ev.value is not False:
                            found = True
                if found:
                    observed += 1
        observed = float(observed)
    elif agg == "sum":
        observed = 0.0
        for day in days:
            for ev in events:
                if ev.quality in ("low", "veryLow"):
                    continue
                if ev.concept_id == target and ev.valid_start.date() == day:
                    observed += float(ev.value)
    else:
        raise ValueError(agg)
    return _OPS[cmp](observed, float(threshold)), observed
