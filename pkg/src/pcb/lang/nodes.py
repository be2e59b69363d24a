"""Abstract syntax of the unit-projection language and the envelope model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .durations import Duration

# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Num:
    value: float

    def render_value(self) -> str:
        if self.value == int(self.value):
            return str(int(self.value))
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    mapping: str
    key: "Expr"


@dataclass(frozen=True)
class GetNumber:
    concept_id: str


@dataclass(frozen=True)
class CreateUuid:
    pass


@dataclass(frozen=True)
class Agg:
    kind: str  # "count" | "sum"


@dataclass(frozen=True)
class Threshold:
    """Unsubstituted knowledge-threshold token <$ID$>."""

    ref_id: str


@dataclass(frozen=True)
class Concat:
    parts: tuple["Expr", ...]


@dataclass(frozen=True)
class Compare:
    left: "Expr"
    op: str  # one of >=, >, <=, <, ==
    right: "Expr"


Expr = Union[Str, Num, Var, Index, GetNumber, CreateUuid, Agg, Threshold, Concat, Compare]

COMPARE_OPS = (">=", "<=", "==", ">", "<")

# ----------------------------------------------------------------- statements


@dataclass(frozen=True)
class WhileTrue:
    body: tuple["Statement", ...]


@dataclass(frozen=True)
class WaitPeriodic:
    days_of_week: frozenset[int]  # 1=Sunday .. 7=Saturday
    time_of_day: Expr
    reminder_lead: Optional[Expr]  # null when absent
    start_offset_days: Optional[int] = None
    duration_days: Optional[int] = None


@dataclass(frozen=True)
class CreateEvent:
    pass


@dataclass(frozen=True)
class PatientDataEntry:
    concept_id: str
    label: Expr
    value_type: str  # numeric | boolean | string
    validity: Duration


@dataclass(frozen=True)
class InsertEvent:
    pass


@dataclass(frozen=True)
class AnnotateTemporal:
    op: str  # "or" | "and"
    exprs: tuple[Expr, ...]
    abstraction_name: str
    key_granularity: str  # "date"


@dataclass(frozen=True)
class WaitTemporalQuery:
    agg_condition: Compare
    target: str
    window_days: int


@dataclass(frozen=True)
class IfTemporalQuery:
    agg_condition: Compare
    target: str
    window_days: int
    then_body: tuple["Statement", ...]
    else_body: tuple["Statement", ...]


@dataclass(frozen=True)
class Callback:
    callback_id: str
    message: str


@dataclass(frozen=True)
class PatientNotification:
    message_id: str
    text: str


@dataclass(frozen=True)
class SetProjectionGlobal:
    name: str
    value: Expr


@dataclass(frozen=True)
class MapLiteral:
    entries: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class VarDecl:
    name: str
    value: Union[Expr, MapLiteral]


@dataclass(frozen=True)
class ForIn:
    loop_var: str
    map_var: str
    body: tuple["Statement", ...]


Statement = Union[
    WhileTrue,
    WaitPeriodic,
    CreateEvent,
    PatientDataEntry,
    InsertEvent,
    AnnotateTemporal,
    WaitTemporalQuery,
    IfTemporalQuery,
    Callback,
    PatientNotification,
    SetProjectionGlobal,
    VarDecl,
    ForIn,
]

WAIT_STATEMENTS = (WaitPeriodic, WaitTemporalQuery)

# ---------------------------------------------------------- envelope & units


@dataclass(frozen=True)
class UnitProjection:
    unit_id: str
    name: str
    body: tuple[Statement, ...]


@dataclass(frozen=True)
class Reminder:
    value_minutes: int  # time of day
    remind_lead_minutes: int  # negative = before the event
    target_concept_id: str


@dataclass(frozen=True)
class PersonalEventBlock:
    concept_id: str
    event_name: str
    reminders: tuple[Reminder, ...]


@dataclass(frozen=True)
class QodItem:
    quality_id: str
    description: str  # "Low" | "VeryLow"
    relate_to: tuple[str, ...]


@dataclass(frozen=True)
class DeclarativeSection:
    qod_items: tuple[QodItem, ...] = ()
    personal_events: tuple[PersonalEventBlock, ...] = ()


@dataclass(frozen=True)
class ProjectionEnvelope:
    gl_id: str
    projection_id: str
    stop_list: tuple[str, ...]
    start_list: tuple[str, ...]
    units: tuple[UnitProjection, ...]
    gl_name: str = ""
    current_context: str = ""
    declarative: Optional[DeclarativeSection] = None

    def validate(self) -> None:
        started = set(self.start_list)
        shipped = {u.unit_id for u in self.units}
        if started != shipped:
            raise ValueError(
                f"start list {sorted(started)} does not match shipped units {sorted(shipped)}"
            )
        overlap = started & set(self.stop_list)
        if overlap:
            raise ValueError(f"stop and start lists overlap: {sorted(overlap)}")


def walk_statements(body: tuple[Statement, ...]):
    """Yield every statement in a body, depth first."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, WhileTrue):
            yield from walk_statements(stmt.body)
        elif isinstance(stmt, ForIn):
            yield from walk_statements(stmt.body)
        elif isinstance(stmt, IfTemporalQuery):
            yield from walk_statements(stmt.then_body)
            yield from walk_statements(stmt.else_body)
