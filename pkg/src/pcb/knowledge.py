"""Guideline representation, file loader, placement advisor, KB statistics.

Guideline files are JSON documents with top-level keys guideline, concepts,
contexts, plans, patterns, callbacks, messages. Projected plan bodies are
unit-projection DSL sources embedded as strings and are parsed (and so
validated) at load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .lang import DslError, parse_unit
from .lang import nodes as n

PLAN_KINDS = ("periodic", "monitoring", "sequential", "parallel", "action", "decision")
ACTOR_TAGS = ("careProvider", "patient")
PATTERN_LEVELS = ("mDSS", "BE-DSS")
AUDIENCES = ("patient", "careProvider")
MESSAGE_KINDS = ("notification", "recommendation", "dataEntry")


class GuidelineError(ValueError):
    pass


class DanglingReferenceError(GuidelineError):
    pass


class DuplicateIdError(GuidelineError):
    pass


@dataclass(frozen=True)
class Concept:
    concept_id: str
    name: str
    value_type: str  # numeric | boolean | string
    valid_range: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Context:
    context_id: str
    name: str
    event_concept_id: Optional[str] = None


@dataclass(frozen=True)
class PatternRef:
    pattern_id: str
    aggregator: str  # count | sum
    comparison: str  # >= > <= < ==
    threshold: object  # number, or "<$ID$>" token string
    target: str  # concept id or abstraction name
    window_days: int
    level: str  # mDSS | BE-DSS

    def numeric_threshold(self) -> float:
        if isinstance(self.threshold, (int, float)) and not isinstance(self.threshold, bool):
            return float(self.threshold)
        raise GuidelineError(
            f"pattern {self.pattern_id} threshold {self.threshold!r} is unresolved"
        )


@dataclass(frozen=True)
class CallbackDef:
    callback_id: str
    message: str
    trigger_pattern: str  # pattern id, level mDSS


@dataclass(frozen=True)
class MessageDef:
    message_id: str
    audience: str
    kind: str
    text: str


@dataclass(frozen=True)
class Plan:
    plan_id: str
    name: str
    kind: str
    eligibility_condition: Optional[str] = None  # pattern ids
    complete_condition: Optional[str] = None
    abort_condition: Optional[str] = None
    is_projected: bool = False
    is_personalized: bool = False
    children: tuple[str, ...] = ()
    body: Optional[str] = None
    actor_tag: str = "patient"


@dataclass(frozen=True)
class KbStats:
    raw_concepts: int = 0
    data_patterns: int = 0
    conditions: int = 0
    customized_contexts: int = 0
    notifications_to_patients: int = 0
    notifications_to_care_providers: int = 0
    recommendations_to_patients: int = 0
    recommendations_to_care_providers: int = 0
    periodic_projections: int = 0
    monitoring_projections: int = 0
    callbacks: int = 0

    def to_json(self) -> dict:
        return {
            "rawConcepts": self.raw_concepts,
            "dataPatterns": self.data_patterns,
            "conditions": self.conditions,
            "customizedContexts": self.customized_contexts,
            "notificationsToPatients": self.notifications_to_patients,
            "notificationsToCareProviders": self.notifications_to_care_providers,
            "recommendationsToPatients": self.recommendations_to_patients,
            "recommendationsToCareProviders": self.recommendations_to_care_providers,
            "periodicProjections": self.periodic_projections,
            "monitoringProjections": self.monitoring_projections,
            "callbacks": self.callbacks,
        }


@dataclass
class Guideline:
    gl_id: str
    name: str
    concepts: dict[str, Concept]
    contexts: dict[str, Context]
    plans: dict[str, Plan]
    patterns: dict[str, PatternRef]
    callbacks: dict[str, CallbackDef]
    messages: dict[str, MessageDef]
    root_id: str
    parsed_bodies: dict[str, n.UnitProjection] = field(default_factory=dict)
    abstractions: dict[str, n.AnnotateTemporal] = field(default_factory=dict)

    @property
    def root(self) -> Plan:
        return self.plans[self.root_id]

    def default_context(self) -> str:
        if self.contexts:
            return next(iter(self.contexts))
        return "0"

    def kb_threshold_values(self) -> dict[str, float]:
        """Numeric pattern thresholds, keyed by pattern id, for <$ID$> tokens."""
        out = {}
        for p in self.patterns.values():
            if isinstance(p.threshold, (int, float)) and not isinstance(p.threshold, bool):
                out[p.pattern_id] = float(p.threshold)
        return out


def _require(cond: bool, message: str, exc=GuidelineError):
    if not cond:
        raise exc(message)


def _load_concepts(raw) -> dict[str, Concept]:
    concepts: dict[str, Concept] = {}
    for item in raw:
        cid = str(item["id"])
        _require(cid not in concepts, f"duplicate concept id {cid}", DuplicateIdError)
        rng = item.get("validRange")
        concepts[cid] = Concept(
            cid,
            item["name"],
            item["valueType"],
            tuple(float(x) for x in rng) if rng else None,
        )
    return concepts


def load_guideline(source: str) -> Guideline:
    """Parse and fully validate a guideline file; every reference must resolve."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GuidelineError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    for key in ("guideline", "concepts", "contexts", "plans", "patterns", "callbacks", "messages"):
        _require(key in doc, f"missing top-level key {key!r}")

    head = doc["guideline"]
    concepts = _load_concepts(doc["concepts"])

    contexts: dict[str, Context] = {}
    for item in doc["contexts"]:
        cid = str(item["id"])
        _require(cid not in contexts, f"duplicate context id {cid}", DuplicateIdError)
        contexts[cid] = Context(cid, item["name"], item.get("eventConceptId"))

    patterns: dict[str, PatternRef] = {}
    for item in doc["patterns"]:
        pid = str(item["id"])
        _require(pid not in patterns, f"duplicate pattern id {pid}", DuplicateIdError)
        _require(item["aggregator"] in ("count", "sum"), f"pattern {pid}: bad aggregator")
        _require(item["comparison"] in n.COMPARE_OPS, f"pattern {pid}: bad comparison")
        _require(int(item["windowDays"]) >= 1, f"pattern {pid}: windowDays must be >= 1")
        _require(item["level"] in PATTERN_LEVELS, f"pattern {pid}: bad level")
        patterns[pid] = PatternRef(
            pid,
            item["aggregator"],
            item["comparison"],
            item["threshold"],
            str(item["target"]),
            int(item["windowDays"]),
            item["level"],
        )

    callbacks: dict[str, CallbackDef] = {}
    for item in doc["callbacks"]:
        cid = str(item["id"])
        _require(cid not in callbacks, f"duplicate callback id {cid}", DuplicateIdError)
        trigger = str(item["triggerPattern"])
        _require(
            trigger in patterns,
            f"callback {cid} references missing pattern {trigger}",
            DanglingReferenceError,
        )
        _require(
            patterns[trigger].level == "mDSS",
            f"callback {cid} trigger pattern {trigger} must be an mDSS-level pattern",
        )
        callbacks[cid] = CallbackDef(cid, item["message"], trigger)

    messages: dict[str, MessageDef] = {}
    for item in doc["messages"]:
        mid = str(item["id"])
        _require(mid not in messages, f"duplicate message id {mid}", DuplicateIdError)
        _require(item["audience"] in AUDIENCES, f"message {mid}: bad audience")
        _require(item["kind"] in MESSAGE_KINDS, f"message {mid}: bad kind")
        messages[mid] = MessageDef(mid, item["audience"], item["kind"], item["text"])

    plans: dict[str, Plan] = {}
    for item in doc["plans"]:
        pid = str(item["id"])
        _require(pid not in plans, f"duplicate plan id {pid}", DuplicateIdError)
        kind = item["kind"]
        _require(kind in PLAN_KINDS, f"plan {pid}: unknown kind {kind!r}")
        plans[pid] = Plan(
            plan_id=pid,
            name=item["name"],
            kind=kind,
            eligibility_condition=_opt_id(item.get("eligibilityCondition")),
            complete_condition=_opt_id(item.get("completeCondition")),
            abort_condition=_opt_id(item.get("abortCondition")),
            is_projected=bool(item.get("isProjected", False)),
            is_personalized=bool(item.get("isPersonalized", False)),
            children=tuple(str(c) for c in item.get("children", ())),
            body=item.get("body"),
            actor_tag=item.get("actorTag", "patient"),
        )

    gl = Guideline(
        gl_id=str(head["id"]),
        name=head["name"],
        concepts=concepts,
        contexts=contexts,
        plans=plans,
        patterns=patterns,
        callbacks=callbacks,
        messages=messages,
        root_id="",
    )
    _validate_tree(gl)
    _validate_plans(gl)
    _validate_patterns(gl)
    return gl


def _opt_id(value) -> Optional[str]:
    return None if value is None else str(value)


def _validate_tree(gl: Guideline) -> None:
    parent: dict[str, str] = {}
    for plan in gl.plans.values():
        for child in plan.children:
            _require(
                child in gl.plans,
                f"plan {plan.plan_id} references missing child {child}",
                DanglingReferenceError,
            )
            _require(
                child not in parent,
                f"plan {child} appears under two parents ({parent.get(child)}, {plan.plan_id})",
            )
            parent[child] = plan.plan_id
    roots = [pid for pid in gl.plans if pid not in parent]
    _require(len(roots) == 1, f"expected exactly one root plan, found {roots}")
    gl.root_id = roots[0]
    # reachability doubles as the cycle check given unique parents
    seen: set[str] = set()
    stack = [gl.root_id]
    while stack:
        pid = stack.pop()
        if pid in seen:
            continue
        seen.add(pid)
        stack.extend(gl.plans[pid].children)
    _require(seen == set(gl.plans), "plan tree is not connected")


def _validate_plans(gl: Guideline) -> None:
    for plan in gl.plans.values():
        for label, ref in (
            ("eligibilityCondition", plan.eligibility_condition),
            ("completeCondition", plan.complete_condition),
            ("abortCondition", plan.abort_condition),
        ):
            if ref is not None:
                _require(
                    ref in gl.patterns,
                    f"plan {plan.plan_id} {label} references missing pattern {ref}",
                    DanglingReferenceError,
                )
        _require(plan.actor_tag in ACTOR_TAGS, f"plan {plan.plan_id}: bad actorTag")
        if plan.kind == "monitoring" and not plan.is_projected:
            # the completeCondition is the pattern a central monitor listens to
            _require(
                plan.complete_condition is not None,
                f"monitoring plan {plan.plan_id} must name the pattern it listens to",
            )
        if plan.is_projected:
            _require(
                bool(plan.body and plan.body.strip()),
                f"projected plan {plan.plan_id} carries no body",
            )
            try:
                unit = parse_unit(plan.body)
            except DslError as exc:
                raise GuidelineError(f"plan {plan.plan_id} body: {exc}") from exc
            _require(
                unit.unit_id == plan.plan_id,
                f"plan {plan.plan_id} body declares unit id {unit.unit_id}",
            )
            gl.parsed_bodies[plan.plan_id] = unit
            waits = 0
            for stmt in n.walk_statements(unit.body):
                if isinstance(stmt, n.AnnotateTemporal):
                    gl.abstractions[stmt.abstraction_name] = stmt
                elif isinstance(stmt, n.WaitTemporalQuery):
                    waits += 1
                elif isinstance(stmt, n.Callback):
                    _require(
                        stmt.callback_id in gl.callbacks,
                        f"plan {plan.plan_id} body references missing callback "
                        f"{stmt.callback_id}",
                        DanglingReferenceError,
                    )
            if plan.kind == "monitoring":
                # a projected monitor listens through exactly one temporal wait
                _require(
                    waits == 1,
                    f"projected monitoring plan {plan.plan_id} must wait on exactly "
                    f"one temporal pattern, found {waits}",
                )
        if plan.kind == "action":
            _require(
                plan.plan_id in gl.messages,
                f"action plan {plan.plan_id} has no message with the same id",
                DanglingReferenceError,
            )


def _validate_patterns(gl: Guideline) -> None:
    listened = {
        p.complete_condition
        for p in gl.plans.values()
        if p.kind == "monitoring" and not p.is_projected
    }
    for pattern in gl.patterns.values():
        known = pattern.target in gl.concepts or pattern.target in gl.abstractions
        _require(
            known,
            f"pattern {pattern.pattern_id} target {pattern.target!r} resolves to "
            "neither a concept nor an abstraction",
            DanglingReferenceError,
        )
        if pattern.level == "BE-DSS":
            _require(
                pattern.pattern_id in listened,
                f"central pattern {pattern.pattern_id} is not referenced by any "
                "monitoring plan",
            )


# ------------------------------------------------------------------ statistics


def kb_statistics(gl: Guideline) -> KbStats:
    conditions = sum(
        (p.eligibility_condition is not None)
        + (p.complete_condition is not None)
        + (p.abort_condition is not None)
        for p in gl.plans.values()
    )

    def count_messages(audience: str, kind: str) -> int:
        return sum(
            1 for m in gl.messages.values() if m.audience == audience and m.kind == kind
        )

    return KbStats(
        raw_concepts=len(gl.concepts),
        data_patterns=len(gl.patterns),
        conditions=conditions,
        customized_contexts=len(gl.contexts),
        notifications_to_patients=count_messages("patient", "notification"),
        notifications_to_care_providers=count_messages("careProvider", "notification"),
        recommendations_to_patients=count_messages("patient", "recommendation"),
        recommendations_to_care_providers=count_messages("careProvider", "recommendation"),
        periodic_projections=sum(
            1 for p in gl.plans.values() if p.kind == "periodic" and p.is_projected
        ),
        monitoring_projections=sum(1 for p in gl.plans.values() if p.kind == "monitoring"),
        callbacks=len(gl.callbacks),
    )


def distribution_profile(stats: KbStats) -> str:
    """mostlyLocal / mostlyCentral / balanced from the callback-to-projection ratio."""
    if stats.periodic_projections == 0:
        return "balanced"
    if stats.callbacks <= math.ceil(0.25 * stats.periodic_projections):
        return "mostlyLocal"
    if stats.callbacks >= math.ceil(0.5 * stats.periodic_projections):
        return "mostlyCentral"
    return "balanced"


# ------------------------------------------------------------------ placement

_CENTRAL_RULES = (
    ("needsPhr", lambda t: t["needsPhr"], "PHR access"),
    ("populationData", lambda t: t["populationData"], "Subject of data"),
    ("horizon", lambda t: t["horizon"] == "longTerm", "Horizon of future recommendations"),
    ("dataSources", lambda t: t["dataSources"] == "mixed", "Data sources"),
    (
        "computation",
        lambda t: t["computation"] == "longitudinalPattern",
        "Computation",
    ),
)


def suggest_placement(plan_traits: dict) -> tuple[str, list[str]]:
    """Return (level, fired central rules). Any central trait forces BE-DSS."""
    required = {"horizon", "needsPhr", "populationData", "dataSources", "computation"}
    missing = required - set(plan_traits)
    if missing:
        raise GuidelineError(f"missing traits: {sorted(missing)}")
    fired = [label for _, check, label in _CENTRAL_RULES if check(plan_traits)]
    return ("BE-DSS" if fired else "mDSS"), fired
