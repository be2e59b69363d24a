"""Seeded random envelope generator used by round-trip and fuzz suites."""

from __future__ import annotations

import random

from pcb.lang import nodes as n
from pcb.lang.durations import Duration

_WORDS = [
    "measure", "daily", "glucose", "pressure", "schedule", "monitor", "weekly",
    "reminder", "dose", "urine", "exercise", "fasting", "breakfast", "dinner",
]

_TRICKY = ['quo"te', "back\\slash", "line\nbreak", "tab\tend", "acentuó", ""]


def _ident(rng: random.Random) -> str:
    return rng.choice(_WORDS) + str(rng.randrange(100))


def _text(rng: random.Random) -> str:
    if rng.random() < 0.2:
        return rng.choice(_TRICKY)
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randrange(1, 5)))


def _numeric_id(rng: random.Random) -> str:
    return str(rng.randrange(1000, 9999))


def _time_expr(rng: random.Random) -> n.Expr:
    return n.Str(f"{rng.randrange(24)}:{rng.randrange(60):02d}")


def _value_expr(rng: random.Random, vars_in_scope: list[str]) -> n.Expr:
    roll = rng.random()
    if roll < 0.35:
        return n.Str(_text(rng))
    if roll < 0.55:
        return n.Num(float(rng.choice([0, 1, 5, 42, 150, 2.5])))
    if roll < 0.7 and vars_in_scope:
        return n.Var(rng.choice(vars_in_scope))
    if roll < 0.8:
        return n.CreateUuid()
    parts = tuple(
        n.Str(_text(rng)) if rng.random() < 0.6 else n.Num(float(rng.randrange(9)))
        for _ in range(2)
    )
    return n.Concat(parts)


def _compare_expr(rng: random.Random) -> n.Expr:
    return n.Compare(
        n.GetNumber(_numeric_id(rng)),
        rng.choice(list(n.COMPARE_OPS)),
        n.Num(float(rng.choice([90, 120, 150, 7.5]))),
    )


def _agg_condition(rng: random.Random, with_threshold: bool) -> n.Compare:
    right: n.Expr
    if with_threshold and rng.random() < 0.5:
        right = n.Threshold(_numeric_id(rng))
    else:
        right = n.Num(float(rng.randrange(0, 6)))
    return n.Compare(n.Agg(rng.choice(["count", "sum"])), rng.choice(list(n.COMPARE_OPS)), right)


def _days(rng: random.Random) -> frozenset[int]:
    count = rng.randrange(1, 8)
    return frozenset(rng.sample(range(1, 8), count))


def _wait_periodic(rng: random.Random, vars_in_scope: list[str]) -> n.WaitPeriodic:
    lead: n.Expr | None = None
    if rng.random() < 0.5:
        lead = n.Str(f"{rng.randrange(5, 60)} minutes")
    elif vars_in_scope and rng.random() < 0.3:
        lead = n.Var(rng.choice(vars_in_scope))
    offset = duration = None
    if rng.random() < 0.4:
        offset = rng.randrange(0, 3)
        duration = rng.randrange(1, 90)
    return n.WaitPeriodic(_days(rng), _time_expr(rng), lead, offset, duration)


def _statement(rng: random.Random, depth: int, vars_in_scope: list[str],
               with_threshold: bool) -> n.Statement:
    choices = ["entry", "notify", "callback", "setglobal", "annotate", "waitq", "var"]
    if depth < 2:
        choices += ["if", "for"]
    kind = rng.choice(choices)
    if kind == "entry":
        return n.PatientDataEntry(
            _numeric_id(rng),
            _value_expr(rng, vars_in_scope),
            rng.choice(["numeric", "boolean", "string"]),
            Duration(rng.choice([30, 60, 120]), False),
        )
    if kind == "notify":
        return n.PatientNotification(_numeric_id(rng), _text(rng))
    if kind == "callback":
        return n.Callback(_numeric_id(rng), _text(rng))
    if kind == "setglobal":
        return n.SetProjectionGlobal(_ident(rng), _value_expr(rng, vars_in_scope))
    if kind == "annotate":
        return n.AnnotateTemporal(
            rng.choice(["or", "and"]),
            tuple(_compare_expr(rng) for _ in range(rng.randrange(1, 4))),
            _ident(rng),
            "date",
        )
    if kind == "waitq":
        return n.WaitTemporalQuery(
            _agg_condition(rng, with_threshold), _ident(rng), rng.randrange(1, 15)
        )
    if kind == "var":
        if rng.random() < 0.5:
            entries = tuple(
                (f"{rng.randrange(24)}:{rng.randrange(60):02d}", n.Str(_text(rng)))
                for _ in range(rng.randrange(1, 3))
            )
            return n.VarDecl(_ident(rng), n.MapLiteral(entries))
        return n.VarDecl(_ident(rng), _value_expr(rng, vars_in_scope))
    if kind == "if":
        return n.IfTemporalQuery(
            _agg_condition(rng, with_threshold),
            _ident(rng),
            rng.randrange(1, 15),
            _body(rng, depth + 1, vars_in_scope, with_threshold),
            _body(rng, depth + 1, vars_in_scope, with_threshold) if rng.random() < 0.6 else (),
        )
    map_name = _ident(rng)
    loop_var = _ident(rng)
    inner = list(vars_in_scope) + [loop_var]
    return n.ForIn(loop_var, map_name, _body(rng, depth + 1, inner, with_threshold))


def _body(rng: random.Random, depth: int, vars_in_scope: list[str],
          with_threshold: bool) -> tuple[n.Statement, ...]:
    stmts = [_statement(rng, depth, vars_in_scope, with_threshold)
             for _ in range(rng.randrange(1, 4))]
    return tuple(stmts)


def random_unit(rng: random.Random, with_threshold: bool = True) -> n.UnitProjection:
    body: list[n.Statement] = []
    scope: list[str] = []
    if rng.random() < 0.4:
        name = _ident(rng)
        body.append(n.VarDecl(name, _value_expr(rng, scope)))
        scope.append(name)
    loop: list[n.Statement] = [_wait_periodic(rng, scope)]
    loop.append(n.CreateEvent())
    loop.extend(_body(rng, 1, scope, with_threshold))
    loop.append(n.InsertEvent())
    body.append(n.WhileTrue(tuple(loop)))
    return n.UnitProjection(_numeric_id(rng), _text(rng) or "unit", tuple(body))


def random_declarative(rng: random.Random) -> n.DeclarativeSection:
    qod = tuple(
        n.QodItem(
            _numeric_id(rng),
            rng.choice(["Low", "VeryLow"]),
            tuple(_numeric_id(rng) for _ in range(rng.randrange(1, 4))),
        )
        for _ in range(rng.randrange(0, 3))
    )
    events = tuple(
        n.PersonalEventBlock(
            _numeric_id(rng),
            _text(rng) or "event",
            tuple(
                n.Reminder(rng.randrange(0, 24 * 60), rng.randrange(-30, 0), _numeric_id(rng))
                for _ in range(rng.randrange(1, 4))
            ),
        )
        for _ in range(rng.randrange(0, 3))
    )
    return n.DeclarativeSection(qod, events)


def random_envelope(rng: random.Random, with_threshold: bool = True) -> n.ProjectionEnvelope:
    units = []
    seen: set[str] = set()
    for _ in range(rng.randrange(1, 4)):
        unit = random_unit(rng, with_threshold)
        if unit.unit_id in seen:
            continue
        seen.add(unit.unit_id)
        units.append(unit)
    stop = tuple(
        uid for uid in (_numeric_id(rng) for _ in range(rng.randrange(0, 3)))
        if uid not in seen
    )
    return n.ProjectionEnvelope(
        gl_id=_numeric_id(rng),
        projection_id=str(rng.randrange(1, 999)),
        stop_list=stop,
        start_list=tuple(u.unit_id for u in units),
        units=tuple(units),
        gl_name=rng.choice(["", "GDM", "AF"]),
        current_context=rng.choice(["", "0", "routine"]),
        declarative=random_declarative(rng) if rng.random() < 0.5 else None,
    )
