"""Canonical text rendering of envelopes, units, and expressions.

serialize(parse(text)) re-parses to an equal AST; serialize itself is a
fixpoint after one parse/serialize cycle.
"""

from __future__ import annotations

from . import nodes as n
from .durations import render_time_of_day

_INDENT = "    "


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _quote(text: str) -> str:
    return f'"{_escape(text)}"'


def render_expr(expr: n.Expr, compact: bool = False) -> str:
    if isinstance(expr, n.Str):
        return _quote(expr.value)
    if isinstance(expr, n.Num):
        return expr.render_value()
    if isinstance(expr, n.Var):
        return expr.name
    if isinstance(expr, n.Index):
        return f"{expr.mapping}[{render_expr(expr.key, compact)}]"
    if isinstance(expr, n.GetNumber):
        return f"event.getNumber({expr.concept_id})"
    if isinstance(expr, n.CreateUuid):
        return "createUUID()"
    if isinstance(expr, n.Agg):
        return expr.kind
    if isinstance(expr, n.Threshold):
        return f"<${expr.ref_id}$>"
    if isinstance(expr, n.Concat):
        return " + ".join(render_expr(p, compact) for p in expr.parts)
    if isinstance(expr, n.Compare):
        sep = "" if compact else " "
        left = render_expr(expr.left, compact)
        right = render_expr(expr.right, compact)
        return f"{left}{sep}{expr.op}{sep}{right}"
    raise TypeError(f"unknown expression node {expr!r}")


def _days(days: frozenset[int]) -> str:
    return ",".join(str(d) for d in sorted(days))


def _render_statement(stmt: n.Statement, out: list[str], depth: int) -> None:
    pad = _INDENT * depth

    def line(text: str) -> None:
        out.append(pad + text)

    if isinstance(stmt, n.WhileTrue):
        line("while (true) {")
        _render_body(stmt.body, out, depth + 1)
        line("}")
    elif isinstance(stmt, n.WaitPeriodic):
        args = [
            _quote(_days(stmt.days_of_week)),
            render_expr(stmt.time_of_day),
            "null" if stmt.reminder_lead is None else render_expr(stmt.reminder_lead),
        ]
        if stmt.start_offset_days is not None or stmt.duration_days is not None:
            args.append(_quote(str(stmt.start_offset_days or 0)))
            args.append(_quote(str(stmt.duration_days or 0)))
        line(f"waitPeriodic({', '.join(args)});")
    elif isinstance(stmt, n.CreateEvent):
        line("event = createEvent();")
    elif isinstance(stmt, n.PatientDataEntry):
        line(
            "event.patientDataEntry("
            f"{_quote(stmt.concept_id)},{render_expr(stmt.label)},"
            f"{_quote(stmt.value_type)},{_quote(stmt.validity.render())});"
        )
    elif isinstance(stmt, n.InsertEvent):
        line("event.insert();")
    elif isinstance(stmt, n.AnnotateTemporal):
        exprs = ", ".join(_quote(render_expr(e, compact=True)) for e in stmt.exprs)
        line(
            f"annotateTemporal({_quote(stmt.op)}, new String[] {{{exprs}}}, "
            f"{_quote(stmt.abstraction_name)}, {_quote(stmt.key_granularity)});"
        )
    elif isinstance(stmt, n.WaitTemporalQuery):
        line(
            f"waitTemporalQuery({_quote(render_expr(stmt.agg_condition))}, "
            f"{_quote(stmt.target)}, {_quote(f'{stmt.window_days} calendardays')});"
        )
    elif isinstance(stmt, n.IfTemporalQuery):
        line(
            f"if (temporalQuery({_quote(render_expr(stmt.agg_condition))}, "
            f"{_quote(stmt.target)}, {_quote(f'{stmt.window_days} calendardays')})) {{"
        )
        _render_body(stmt.then_body, out, depth + 1)
        if stmt.else_body:
            line("} else {")
            _render_body(stmt.else_body, out, depth + 1)
        line("}")
    elif isinstance(stmt, n.Callback):
        line(f"callback({_quote(stmt.callback_id)}, {_quote(stmt.message)});")
    elif isinstance(stmt, n.PatientNotification):
        line(f"patientNotification({_quote(stmt.message_id)}, {_quote(stmt.text)});")
    elif isinstance(stmt, n.SetProjectionGlobal):
        line(f"setProjectionGlobal({_quote(stmt.name)}, {render_expr(stmt.value)});")
    elif isinstance(stmt, n.VarDecl):
        if isinstance(stmt.value, n.MapLiteral):
            entries = ", ".join(
                f"{_quote(k)}: {render_expr(v)}" for k, v in stmt.value.entries
            )
            line(f"var {stmt.name} = {{{entries}}};")
        else:
            line(f"var {stmt.name} = {render_expr(stmt.value)};")
    elif isinstance(stmt, n.ForIn):
        line(f"for (var {stmt.loop_var} in {stmt.map_var}) {{")
        _render_body(stmt.body, out, depth + 1)
        line("}")
    else:
        raise TypeError(f"unknown statement node {stmt!r}")


def _render_body(body: tuple[n.Statement, ...], out: list[str], depth: int) -> None:
    for stmt in body:
        _render_statement(stmt, out, depth)


def serialize_unit(unit: n.UnitProjection) -> str:
    out = [f"unitProjection({_quote(unit.unit_id)},{_quote(unit.name)}) {{"]
    _render_body(unit.body, out, 1)
    out.append("}")
    return "\n".join(out) + "\n"


def serialize_declarative(section: n.DeclarativeSection) -> str:
    out = ["declarative {"]
    for item in section.qod_items:
        out.append(
            f"{_INDENT}qualityOfDataItem({_quote(item.quality_id)}, "
            f"{_quote(item.description)}, {_quote(','.join(item.relate_to))});"
        )
    for ev in section.personal_events:
        out.append(
            f"{_INDENT}personalEvent({_quote(ev.concept_id)}, {_quote(ev.event_name)}) {{"
        )
        for rem in ev.reminders:
            out.append(
                f"{_INDENT * 2}reminder({_quote(render_time_of_day(rem.value_minutes))}, "
                f"{_quote(f'{rem.remind_lead_minutes} minutes')}, "
                f"{_quote(rem.target_concept_id)});"
            )
        out.append(f"{_INDENT}}}")
    out.append("}")
    return "\n".join(out) + "\n"


def serialize(envelope: n.ProjectionEnvelope) -> str:
    envelope.validate()
    header = [_quote(envelope.gl_id), f"id={_quote(envelope.projection_id)}"]
    if envelope.gl_name:
        header.append(f"name={_quote(envelope.gl_name)}")
    if envelope.current_context:
        header.append(f"context={_quote(envelope.current_context)}")
    parts = [
        f"projection({', '.join(header)});",
        f"stop({_quote(','.join(envelope.stop_list))});",
        f"start({_quote(','.join(envelope.start_list))});",
    ]
    text = "\n".join(parts) + "\n"
    by_id = {u.unit_id: u for u in envelope.units}
    for unit_id in envelope.start_list:
        text += "\n" + serialize_unit(by_id[unit_id])
    if envelope.declarative is not None:
        text += "\n" + serialize_declarative(envelope.declarative)
    return text
