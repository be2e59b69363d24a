"""Central engine: applies the guideline plan tree, builds personalized
projections, listens for monitoring patterns and callbacks, recovers crashed
devices, and enforces the distribution policy.

Plan instances are per activation episode: completed/aborted instances are
terminal, and a plan whose eligibility pattern fires again gets a fresh
instance, which is how schedule cycles (daily -> twice weekly -> daily) run
over a finite tree.
"""

from __future__ import annotations

import dataclasses
import random
import uuid
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Callable, Optional

from .channel import Channel, Message
from .events import Event
from .knowledge import Guideline, Plan
from .lang import nodes as n
from .lang import parse_unit, serialize, substitute_thresholds
from .lang.durations import parse_duration, parse_time_of_day, render_time_of_day
from .phr import DircRule, InteractionRecord, Preference, Prescription, PhrStore
from .simclock import PRIORITY_ENGINE, EventLoop
from .temporal import SubscriptionRegistry, window_query

POLICIES = ("fullMdss", "fullShadowing", "semiShadowing", "passingOfControl", "fullBeDss")

MEDICATION_CONCEPT_NAME = "medication_intake"

_TS = "%Y-%m-%d %H:%M:%S"


@dataclass
class PlanInstance:
    plan_id: str
    patient_id: str
    state: str  # eligible | active | suspendedProjected | completed | aborted
    activated_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    sequence_index: int = 0  # progress pointer for sequential plans


@dataclass
class PolicyConfig:
    policy: str = "passingOfControl"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class _Batch:
    stop: list[Plan] = field(default_factory=list)
    start: list[Plan] = field(default_factory=list)
    med_start: list["SentUnit"] = field(default_factory=list)
    med_stop: list[str] = field(default_factory=list)

    def empty(self) -> bool:
        return not (self.stop or self.start or self.med_start or self.med_stop)


@dataclass
class SentUnit:
    unit_id: str
    plan_id: Optional[str]  # None for medication units
    prescription_index: Optional[int]
    ast: n.UnitProjection
    sent_at: datetime
    duration_days: Optional[int]
    start_offset_days: int
    personalized: bool


@dataclass
class PatientProfile:
    patient_id: str
    current_context: str
    reminder_lead_minutes: int
    dircs: list[DircRule]
    preferences: list[Preference]
    prescriptions: list[Prescription]
    thresholds: dict[str, float]

    @classmethod
    def from_json(cls, doc: dict) -> "PatientProfile":
        pid = doc["patientId"]
        return cls(
            patient_id=pid,
            current_context=doc.get("currentContext", ""),
            reminder_lead_minutes=int(doc.get("reminderLeadMinutes", -5)),
            dircs=[
                DircRule(pid, d["personalEvent"], d["inducedContext"],
                         int(d.get("startOffsetMinutes") or 0),
                         d.get("endOffsetMinutes"))
                for d in doc.get("dircs", ())
            ],
            preferences=[
                Preference(pid, p["context"], p["targetConceptId"], p["reminderTime"],
                           tuple(p["daysOfWeek"]))
                for p in doc.get("preferences", ())
            ],
            prescriptions=[Prescription.from_json(p) for p in doc.get("prescriptions", ())],
            thresholds={k: float(v) for k, v in doc.get("thresholds", {}).items()},
        )


class BedssEngine:
    def __init__(
        self,
        loop: EventLoop,
        channel: Channel,
        guideline: Guideline,
        phr: PhrStore,
        profile: PatientProfile,
        policy: PolicyConfig = None,
        seed: int = 0,
        on_action: Optional[Callable[[dict], None]] = None,
    ):
        self.loop = loop
        self.channel = channel
        self.gl = guideline
        self.phr = phr
        self.profile = profile
        self.patient_id = profile.patient_id
        self.policy = policy or PolicyConfig()
        self.rng = random.Random(seed)
        self.on_action = on_action or (lambda action: None)
        channel.register("central", self.handle_message, self._on_send_failure)

        self.registry = SubscriptionRegistry(guideline.abstractions)
        self.live: dict[str, PlanInstance] = {}
        self.history: list[PlanInstance] = []
        self.parent: dict[str, str] = {
            child: plan.plan_id for plan in guideline.plans.values()
            for child in plan.children
        }
        self.subscriptions: dict[str, str] = {}  # plan id -> subscription id
        self.callback_listeners: dict[str, set[str]] = {}  # pattern id -> plan ids
        self.sent_units: dict[str, SentUnit] = {}
        self.med_unit_ids: dict[int, str] = {}
        self.current_context = profile.current_context or guideline.default_context()
        self.session_started: Optional[datetime] = None
        self._next_projection = 1
        self._pending_recommendations: dict[str, dict] = {}
        self.undelivered_recommendations: list[dict] = []
        self.shadow = None  # fullShadowing companion, set by the harness
        self.central_runner = None  # fullBeDss embedded interpreter

    # ---------------------------------------------------------------- helpers

    def _emit(self, kind: str, **detail) -> None:
        action = {"t": self.loop.now.strftime(_TS), "actor": "BE-DSS",
                  "kind": kind, **detail}
        self.on_action(action)

    def _log(self, type_: str, subtype: str, detail: str = "",
             technical_only: bool = False) -> None:
        self.phr.log_interaction(
            self.patient_id,
            InteractionRecord(self.loop.now, type_, subtype, technical_only, detail),
        )
        self._emit("interaction", type=type_, subtype=subtype,
                   technicalOnly=technical_only, detail=detail)

    def _send(self, kind: str, payload: dict) -> None:
        self.channel.send(
            "central", self.channel.make_message(kind, self.patient_id, payload)
        )

    def _on_send_failure(self, msg: Message) -> None:
        self._emit("deliveryFailure", msgKind=msg.kind, msgId=msg.msg_id)
        if msg.kind == "recommendation":
            item = self._pending_recommendations.pop(msg.msg_id, None)
            if item is not None:
                self.undelivered_recommendations.append(item)

    # ----------------------------------------------------------- session start

    def start_session(self) -> None:
        self.session_started = self.loop.now
        self.phr.set_context(self.patient_id, self.current_context)
        for rule in self.profile.dircs:
            self.phr.add_dirc(rule)
        for pref in self.profile.preferences:
            self.phr.add_preference(pref)
        for prescription in self.profile.prescriptions:
            self.phr.add_prescription(self.patient_id, prescription)
        self.phr.on_insert = self._on_phr_insert

        self._send("enroll", {
            "validators": {
                c.concept_id: list(c.valid_range)
                for c in self.gl.concepts.values()
                if c.valid_range is not None
            },
            "surveyConcepts": sorted(
                m.message_id for m in self.gl.messages.values() if m.kind == "dataEntry"
            ),
            "personalEventConcepts": self._personal_event_concepts(),
        })
        self._emit("sessionStarted", guideline=self.gl.gl_id, policy=self.policy.policy)

        batch = _Batch()
        self._activate(self.gl.root, batch)
        if self.policy.policy == "fullMdss":
            # one complete hand-over: ship the frontier, listen for nothing
            for plan_id, sub_id in list(self.subscriptions.items()):
                self.registry.unsubscribe(sub_id)
            self.subscriptions.clear()
            self.callback_listeners.clear()
        if self.policy.policy == "fullBeDss":
            self._run_batch_centrally(batch)
        else:
            self._flush(batch, include_declarative=True)

    def _personal_event_concepts(self) -> dict[str, str]:
        out = {}
        for rule in self.profile.dircs:
            ctx = self.gl.contexts.get(rule.induced_context)
            if ctx is not None and ctx.event_concept_id:
                out[rule.personal_event] = ctx.event_concept_id
        return out

    # ------------------------------------------------------ plan instance flow

    def _activate(self, plan: Plan, batch: _Batch) -> None:
        if plan.plan_id in self.live:
            return
        inst = PlanInstance(plan.plan_id, self.patient_id, "eligible")
        inst.activated_at = self.loop.now
        self.live[plan.plan_id] = inst
        self.history.append(inst)

        if plan.is_projected:
            inst.state = "suspendedProjected"
            batch.start.append(plan)
            self._emit("planProjectedOut", planId=plan.plan_id)
        else:
            inst.state = "active"
            self._emit("planActivated", planId=plan.plan_id, planKind=plan.kind)

        if plan.kind == "monitoring" and not plan.is_projected:
            self._attach_monitor(plan)
        elif plan.kind == "action":
            self._deliver_action(plan)
            self._finish(plan, "completed", batch)
        elif plan.kind == "decision":
            self._decide(plan, inst, batch)
        elif plan.kind == "sequential":
            self._advance_sequential(plan, inst, batch)
        else:
            for child_id in plan.children:
                child = self.gl.plans[child_id]
                if child.eligibility_condition is None:
                    self._activate(child, batch)

    def _attach_monitor(self, plan: Plan) -> None:
        pattern = self.gl.patterns[plan.complete_condition]
        if pattern.level == "BE-DSS":
            sub_id = self.registry.subscribe(
                self.patient_id, pattern, plan.plan_id,
                enrolled_on=(self.session_started or self.loop.now).date(),
            )
            self.subscriptions[plan.plan_id] = sub_id
            self._emit("subscribed", planId=plan.plan_id, patternId=pattern.pattern_id)
        else:
            self.callback_listeners.setdefault(pattern.pattern_id, set()).add(plan.plan_id)
            self._emit("callbackListener", planId=plan.plan_id,
                       patternId=pattern.pattern_id)

    def _decide(self, plan: Plan, inst: PlanInstance, batch: _Batch) -> None:
        for child_id in plan.children:
            child = self.gl.plans[child_id]
            if child.eligibility_condition is None or self._condition_holds(
                child.eligibility_condition
            ):
                self._emit("decisionBranch", planId=plan.plan_id, chosen=child_id)
                self._activate(child, batch)
                return
        self._emit("decisionBranch", planId=plan.plan_id, chosen=None)
        self._finish(plan, "completed", batch)

    def _condition_holds(self, pattern_id: str) -> bool:
        p = self.gl.patterns[pattern_id]
        holds, _ = window_query(
            p.aggregator, p.comparison, p.numeric_threshold(), p.target, p.window_days,
            self.loop.now, self.phr.record(self.patient_id).events,
            self.gl.abstractions,
        )
        return holds

    def _advance_sequential(self, plan: Plan, inst: PlanInstance, batch: _Batch) -> None:
        while inst.sequence_index < len(plan.children):
            child_id = plan.children[inst.sequence_index]
            if child_id in self.live:
                return  # still running
            before = inst.sequence_index
            self._activate(self.gl.plans[child_id], batch)
            if child_id in self.live:
                return  # running; its completion advances the index
            if inst.sequence_index == before:
                # never instantiated (defensive); skip rather than stall
                inst.sequence_index += 1
            # a synchronous completion advanced the index already
        self._finish(plan, "completed", batch)

    def _deliver_action(self, plan: Plan) -> None:
        msg = self.gl.messages[plan.plan_id]
        if msg.audience == "careProvider":
            self._log("careGiverRecommendation",
                      "procedure" if msg.kind == "recommendation" else "notification",
                      detail=msg.message_id)
            self._emit("careGiverMessage", messageId=msg.message_id, text=msg.text)
        else:
            subtype = {"recommendation": "procedure", "notification": "notification",
                       "dataEntry": "patientDataEntry"}[msg.kind]
            self._log("patientRecommendation", subtype, detail=msg.message_id)
            out = self.channel.make_message(
                "recommendation", self.patient_id,
                {"messageId": msg.message_id, "text": msg.text,
                 "requiresResponse": msg.kind == "recommendation",
                 "validityMinutes": 24 * 60},
            )
            self._pending_recommendations[out.msg_id] = {
                "messageId": msg.message_id, "sentAt": self.loop.now.strftime(_TS)
            }
            self.channel.send("central", out)

    def _finish(self, plan: Plan, state: str, batch: _Batch) -> None:
        inst = self.live.pop(plan.plan_id, None)
        if inst is None:
            return
        inst.state = state
        inst.completed_at = self.loop.now
        self._emit("planFinished", planId=plan.plan_id, state=state)
        if plan.is_projected:
            batch.stop.append(plan)
        if plan.kind == "monitoring" and not plan.is_projected:
            sub_id = self.subscriptions.pop(plan.plan_id, None)
            if sub_id is not None:
                self.registry.unsubscribe(sub_id)
            pattern = self.gl.patterns[plan.complete_condition]
            listeners = self.callback_listeners.get(pattern.pattern_id)
            if listeners is not None:
                listeners.discard(plan.plan_id)
        parent_id = self.parent.get(plan.plan_id)
        if parent_id is not None and parent_id in self.live:
            parent = self.gl.plans[parent_id]
            parent_inst = self.live[parent_id]
            if parent.kind == "sequential":
                if state == "aborted":
                    self._finish(parent, "aborted", batch)
                else:
                    parent_inst.sequence_index += 1
                    self._advance_sequential(parent, parent_inst, batch)
            elif parent.kind == "decision":
                self._finish(parent, state, batch)
            elif parent.kind == "parallel":
                remaining = [
                    c for c in parent.children
                    if self.gl.plans[c].kind != "monitoring" and c in self.live
                ]
                waiting = [
                    c for c in parent.children
                    if self.gl.plans[c].eligibility_condition is not None
                ]
                if not remaining and not waiting:
                    self._finish(parent, "completed", batch)

    # ------------------------------------------------------------ pattern fire

    def _fire_pattern(self, pattern_id: str, batch: _Batch) -> bool:
        """Transition every plan touched by the pattern; True if anything moved."""
        moved = False
        for plan in list(self.gl.plans.values()):
            inst = self.live.get(plan.plan_id)
            if inst is None:
                continue
            if plan.abort_condition == pattern_id:
                self._finish(plan, "aborted", batch)
                moved = True
            elif plan.complete_condition == pattern_id and not (
                plan.kind == "monitoring" and not plan.is_projected
            ):
                self._finish(plan, "completed", batch)
                moved = True
        for plan in list(self.gl.plans.values()):
            if plan.eligibility_condition != pattern_id:
                continue
            if plan.plan_id in self.live:
                continue
            parent_id = self.parent.get(plan.plan_id)
            if parent_id is not None and parent_id not in self.live:
                continue
            self._activate(plan, batch)
            moved = True
        return moved

    def _dispatch_batch(self, batch: _Batch, include_declarative: bool = False) -> None:
        if self.policy.policy == "fullBeDss":
            self._run_batch_centrally(batch)
        else:
            self._flush(batch, include_declarative=include_declarative)

    def _flush(self, batch: _Batch, include_declarative: bool = False,
               resend_units: Optional[list[SentUnit]] = None,
               technical_only: bool = False) -> None:
        self._sync_medications(batch)
        if batch.empty() and not resend_units:
            return
        envelope = self.build_projection(
            stop_plans=batch.stop,
            start_plans=batch.start,
            context=self.current_context,
            include_declarative=include_declarative,
            resend_units=(resend_units or []) + batch.med_start,
            extra_stop_ids=batch.med_stop,
        )
        self._send_envelope(envelope, technical_only=technical_only)

    # --------------------------------------------------------------- projection

    def build_projection(
        self,
        stop_plans: list[Plan],
        start_plans: list[Plan],
        context: str,
        include_declarative: bool = False,
        resend_units: Optional[list[SentUnit]] = None,
        extra_stop_ids: Optional[list[str]] = None,
    ) -> n.ProjectionEnvelope:
        projection_id = str(self._next_projection)
        self._next_projection += 1

        units: list[n.UnitProjection] = []
        for plan in start_plans:
            unit = self._personalize_plan_unit(plan, context)
            units.append(unit)
            duration, offset = _duration_of(unit)
            self.sent_units[unit.unit_id] = SentUnit(
                unit.unit_id, plan.plan_id, None, unit, self.loop.now,
                duration, offset, personalized=plan.is_personalized,
            )
        for sent in resend_units or []:
            units.append(sent.ast)
            self.sent_units[sent.unit_id] = sent

        stop_ids = [p.plan_id for p in stop_plans] + list(extra_stop_ids or ())
        declarative = self._declarative_section(context) if include_declarative else None
        envelope = n.ProjectionEnvelope(
            gl_id=self.gl.gl_id,
            projection_id=projection_id,
            stop_list=tuple(stop_ids),
            start_list=tuple(u.unit_id for u in units),
            units=tuple(units),
            gl_name=self.gl.name,
            current_context=context,
            declarative=declarative,
        )
        envelope.validate()
        return envelope

    def _send_envelope(self, envelope: n.ProjectionEnvelope,
                       technical_only: bool = False) -> None:
        self.phr.record_projection(
            self.patient_id, envelope.projection_id,
            list(envelope.stop_list), list(envelope.start_list), self.loop.now,
        )
        for unit_id in envelope.stop_list:
            self.sent_units.pop(unit_id, None)
        self._log("projection", "procedure",
                  detail=f"projection {envelope.projection_id}",
                  technical_only=technical_only)
        self._send("projection", {
            "projectionId": envelope.projection_id,
            "text": serialize(envelope),
        })
        self._emit("projectionSent", projectionId=envelope.projection_id,
                   stop=list(envelope.stop_list), start=list(envelope.start_list),
                   technicalOnly=technical_only)

    def _personalize_plan_unit(self, plan: Plan, context: str) -> n.UnitProjection:
        source = substitute_thresholds(
            plan.body, {**self.gl.kb_threshold_values(), **self.profile.thresholds}
        )
        unit = parse_unit(source)
        if plan.is_personalized:
            unit = self._apply_preferences(unit, context)
        return unit

    def _apply_preferences(self, unit: n.UnitProjection, context: str) -> n.UnitProjection:
        def rewrite(body: tuple) -> tuple:
            out = []
            for i, stmt in enumerate(body):
                if isinstance(stmt, n.WhileTrue):
                    stmt = dataclasses.replace(stmt, body=rewrite(stmt.body))
                elif isinstance(stmt, n.ForIn):
                    stmt = dataclasses.replace(stmt, body=rewrite(stmt.body))
                elif isinstance(stmt, n.IfTemporalQuery):
                    stmt = dataclasses.replace(
                        stmt, then_body=rewrite(stmt.then_body),
                        else_body=rewrite(stmt.else_body),
                    )
                elif isinstance(stmt, n.WaitPeriodic):
                    target = _next_entry_concept(body, i)
                    if target is not None:
                        pref = self.phr.preference_for(self.patient_id, context, target)
                        if pref is not None:
                            stmt = dataclasses.replace(
                                stmt,
                                time_of_day=n.Str(
                                    render_time_of_day(
                                        parse_time_of_day(pref.reminder_time))),
                                days_of_week=frozenset(pref.days_of_week),
                            )
                        else:
                            self._emit("preferenceFallback", unitId=unit.unit_id,
                                       conceptId=target, context=context)
                out.append(stmt)
            return tuple(out)

        return dataclasses.replace(unit, body=rewrite(unit.body))

    def _declarative_section(self, context: str) -> Optional[n.DeclarativeSection]:
        qod: list[n.QodItem] = []
        groups: dict[tuple, list[str]] = {}
        for concept in self.gl.concepts.values():
            if concept.valid_range is not None:
                groups.setdefault(concept.valid_range, []).append(concept.concept_id)
        for rng in sorted(groups):
            ids = tuple(sorted(groups[rng], key=str))
            quality_id = f"qod-{ids[0]}"
            qod.append(n.QodItem(quality_id, "Low", ids))
            qod.append(n.QodItem(quality_id, "VeryLow", ids))

        personal: list[n.PersonalEventBlock] = []
        for rule in self.profile.dircs:
            ctx = self.gl.contexts.get(rule.induced_context)
            if ctx is None or not ctx.event_concept_id:
                continue
            reminders = tuple(
                n.Reminder(
                    parse_time_of_day(pref.reminder_time),
                    self.profile.reminder_lead_minutes,
                    pref.target_concept_id,
                )
                for pref in self.profile.preferences
                if pref.context == rule.induced_context
            )
            personal.append(
                n.PersonalEventBlock(ctx.event_concept_id, rule.personal_event, reminders)
            )
        if not qod and not personal:
            return None
        return n.DeclarativeSection(tuple(qod), tuple(personal))

    # -------------------------------------------------------------- medication

    def _sync_medications(self, batch: _Batch) -> None:
        """Each valid prescription runs as one medication unit; expired ones
        are stopped. Runs on every projection build."""
        med_concept = next(
            (c.concept_id for c in self.gl.concepts.values()
             if c.name == MEDICATION_CONCEPT_NAME),
            None,
        )
        if med_concept is None:
            return
        today = self.loop.now.date()
        active = self.phr.active_units(self.patient_id)
        for index, prescription in enumerate(self.profile.prescriptions):
            unit_id = self.med_unit_ids.get(index)
            if prescription.valid_on(today):
                if unit_id is None:
                    unit_id = str(uuid.UUID(
                        bytes=bytes(self.rng.randrange(256) for _ in range(16)),
                        version=4,
                    ))
                    self.med_unit_ids[index] = unit_id
                if unit_id not in active:
                    unit = self._medication_unit(unit_id, prescription, med_concept)
                    duration, offset = _duration_of(unit)
                    batch.med_start.append(SentUnit(
                        unit_id, None, index, unit, self.loop.now,
                        duration, offset, personalized=True,
                    ))
            elif unit_id is not None and unit_id in active:
                batch.med_stop.append(unit_id)

    def _medication_unit(self, unit_id: str, prescription: Prescription,
                         med_concept: str) -> n.UnitProjection:
        today = self.loop.now.date()
        offset = max(0, (prescription.start_date - today).days)
        duration = (prescription.end_date - today).days + 1
        dosages = n.MapLiteral(tuple(
            (time_text, n.Str(dose)) for time_text, dose in prescription.dose_per_time.items()
        ))
        reminders = n.MapLiteral(tuple(
            (time_text, n.Str(prescription.reminder_lead))
            for time_text in prescription.dose_per_time
        ))
        label = n.Concat((
            n.Str(f"Prendi il farmaco {prescription.medication}, "),
            n.Var("dosage"),
            n.Str(" "),
        ))
        body: tuple[n.Statement, ...] = (
            n.VarDecl("dosages", dosages),
            n.VarDecl("reminders", reminders),
            n.WhileTrue((
                n.ForIn("time", "dosages", (
                    n.VarDecl("dosage", n.Index("dosages", n.Var("time"))),
                    n.VarDecl("reminder", n.Index("reminders", n.Var("time"))),
                    n.WaitPeriodic(frozenset(range(1, 8)), n.Var("time"),
                                   n.Var("reminder"), offset, duration),
                    n.SetProjectionGlobal("DoseId", n.CreateUuid()),
                    n.CreateEvent(),
                    n.PatientDataEntry(med_concept, label, "boolean",
                                       parse_duration("2 hours")),
                    n.InsertEvent(),
                )),
            )),
        )
        return n.UnitProjection(unit_id, "Medication Take", body)

    # --------------------------------------------------------------- messages

    def handle_message(self, msg: Message) -> None:
        if self.policy.policy == "fullBeDss" and msg.kind not in ("ack", "nack"):
            # the device is a dumb terminal under this policy
            if msg.kind == "dataNotification":
                self.on_data_notification(msg.payload)
                self.channel.ack("central", msg)
            return
        if msg.kind == "callback":
            self._on_callback(msg.payload)
            self.channel.ack("central", msg)
        elif msg.kind == "dataNotification":
            self.on_data_notification(msg.payload)
            self.channel.ack("central", msg)
        elif msg.kind == "crashRecoveryRequest":
            self.channel.ack("central", msg)
            self.recover(self.loop.now)
        elif msg.kind in ("ack", "nack"):
            if msg.kind == "ack" and msg.payload.get("ok", True):
                self._pending_recommendations.pop(msg.payload.get("ackFor"), None)
            if msg.kind == "nack":
                self._emit("projectionRejectedByDevice",
                           error=msg.payload.get("error", ""))

    def _on_callback(self, payload: dict) -> None:
        callback_id = str(payload.get("callbackId"))
        self._log("dataNotification", "callbackTriggered", detail=callback_id)
        definition = self.gl.callbacks.get(callback_id)
        if definition is None:
            self._emit("unknownCallback", callbackId=callback_id)
            return
        if self.policy.policy == "fullMdss":
            self._emit("callbackIgnoredByPolicy", callbackId=callback_id)
            return
        pattern_id = definition.trigger_pattern
        listeners = self.callback_listeners.get(pattern_id, set())
        if not listeners:
            self._emit("staleCallback", callbackId=callback_id)
            return
        batch = _Batch()
        self._fire_pattern(pattern_id, batch)
        self._dispatch_batch(batch)

    def on_data_notification(self, payload: dict) -> None:
        subtype = payload.get("subtype")
        if subtype == "eventSync":
            self.phr.insert_event(Event.from_json(payload["event"]))
        elif subtype == "patientDataEntry":
            self._log("dataNotification", "patientDataEntry",
                      detail=payload["event"]["conceptId"])
            self.phr.insert_event(Event.from_json(payload["event"]))
        elif subtype == "contextChanged":
            self._on_context_change(payload.get("personalEvent", ""))
        elif subtype in ("patientAccepted", "patientDeclined"):
            self._log("dataNotification", subtype, detail=payload.get("messageId", ""))
        elif subtype in ("careGiverAccepted", "careGiverDeclined"):
            self._log("dataNotification", subtype, detail=payload.get("messageId", ""))
        else:
            self._emit("unknownNotification", subtype=subtype)

    def care_giver_response(self, message_id: str, accept: bool) -> None:
        subtype = "careGiverAccepted" if accept else "careGiverDeclined"
        self._log("dataNotification", subtype, detail=message_id)
        self.phr.insert_event(Event(
            self.patient_id, message_id, accept, self.loop.now, self.loop.now,
            source="careGiver",
        ))

    def _on_context_change(self, personal_event: str) -> None:
        self._log("dataNotification", "contextChanged", detail=personal_event)
        rule = self.phr.dirc_for(self.patient_id, personal_event)
        if rule is None:
            self._emit("unknownPersonalEvent", personalEvent=personal_event)
            return
        apply_at = self.loop.now + timedelta(minutes=rule.start_offset_minutes)

        def apply_switch():
            self.current_context = rule.induced_context
            self.phr.set_context(self.patient_id, rule.induced_context)
            self._emit("contextInduced", context=rule.induced_context,
                       personalEvent=personal_event)
            self._resend_personalized_units()

        if apply_at <= self.loop.now:
            apply_switch()
        else:
            self.loop.schedule(apply_at, PRIORITY_ENGINE, apply_switch)
        if rule.end_offset_minutes is not None:
            revert_at = self.loop.now + timedelta(minutes=rule.end_offset_minutes)

            def revert():
                default = self.gl.default_context()
                self.current_context = default
                self.phr.set_context(self.patient_id, default)
                self._emit("contextInduced", context=default,
                           personalEvent=f"end of {personal_event}")
                self._resend_personalized_units()

            self.loop.schedule(revert_at, PRIORITY_ENGINE, revert)

    def _resend_personalized_units(self) -> None:
        """Rebuild every active personalized unit under the current context and
        ship the lot in one envelope."""
        active = self.phr.active_units(self.patient_id)
        resend: list[SentUnit] = []
        batch = _Batch()
        for unit_id in sorted(active):
            sent = self.sent_units.get(unit_id)
            if sent is None or not sent.personalized:
                continue
            if sent.plan_id is not None:
                plan = self.gl.plans[sent.plan_id]
                unit = self._personalize_plan_unit(plan, self.current_context)
                resend.append(dataclasses.replace(
                    sent, ast=unit, sent_at=self.loop.now))
            elif sent.prescription_index is not None:
                prescription = self.profile.prescriptions[sent.prescription_index]
                med_concept = next(
                    (c.concept_id for c in self.gl.concepts.values()
                     if c.name == MEDICATION_CONCEPT_NAME), None)
                if med_concept is None:
                    continue
                unit = self._medication_unit(unit_id, prescription, med_concept)
                duration, offset = _duration_of(unit)
                resend.append(dataclasses.replace(
                    sent, ast=unit, sent_at=self.loop.now,
                    duration_days=duration, start_offset_days=offset))
        if resend:
            self._flush(batch, include_declarative=True, resend_units=resend)

    # ----------------------------------------------------------------- events

    def _on_phr_insert(self, event: Event) -> None:
        if event.patient_id != self.patient_id:
            return
        firings = self.registry.evaluate(
            self.patient_id, self.phr.record(self.patient_id).events, self.loop.now
        )
        self._process_firings(firings)

    def on_rollover(self, now: datetime) -> None:
        firings = self.registry.evaluate(
            self.patient_id, self.phr.record(self.patient_id).events, now
        )
        self._process_firings(firings)
        self._expire_bounded_units()

    def _expire_bounded_units(self) -> None:
        today = self.loop.now.date()
        for unit_id in sorted(self.phr.active_units(self.patient_id)):
            sent = self.sent_units.get(unit_id)
            if sent is None or sent.duration_days is None:
                continue
            end = sent.sent_at.date() + timedelta(
                days=sent.start_offset_days + sent.duration_days - 1)
            if today > end:
                self.phr.record_projection(
                    self.patient_id, f"exp-{unit_id[:8]}", [unit_id], [], self.loop.now
                )
                self.sent_units.pop(unit_id, None)
                self._emit("unitExpiredCentrally", unitId=unit_id)

    def _process_firings(self, firings) -> None:
        if not firings:
            return
        batch = _Batch()
        for firing in firings:
            self._log("dataNotification", "monitoringTriggered",
                      detail=f"pattern {firing.pattern_id}")
            self.registry.acknowledge(firing.subscription_id)
            self._fire_pattern(firing.pattern_id, batch)
        self._dispatch_batch(batch)

    # ---------------------------------------------------------------- recovery

    def recover(self, crash_reported_at: datetime) -> None:
        """Re-send every currently active unit, trimming elapsed whole days
        from duration-bounded schedules; fully elapsed units are dropped and
        marked stopped in the ledger."""
        active = self.phr.active_units(self.patient_id)
        resend: list[SentUnit] = []
        for unit_id in sorted(active):
            sent = self.sent_units.get(unit_id)
            if sent is None:
                continue
            start_row = self.phr.latest_start(self.patient_id, unit_id)
            sent_date = start_row.sent_date if start_row else sent.sent_at
            elapsed = (crash_reported_at.date() - sent_date.date()).days
            adjusted, alive = _adjust_unit_durations(sent.ast, elapsed)
            if not alive:
                self.phr.record_projection(
                    self.patient_id, f"exp-{unit_id[:8]}", [unit_id], [], self.loop.now
                )
                self.sent_units.pop(unit_id, None)
                self._emit("recoveryOmittedExpiredUnit", unitId=unit_id)
                continue
            duration, offset = _duration_of(adjusted)
            resend.append(dataclasses.replace(
                sent, ast=adjusted, sent_at=self.loop.now,
                duration_days=duration, start_offset_days=offset))
        if not resend:
            self._emit("recoveryNothingToResend")
            return
        envelope = self.build_projection(
            [], [], self.current_context, include_declarative=True,
            resend_units=resend,
        )
        self._send_envelope(envelope, technical_only=True)

    # --------------------------------------------------------------- policies

    def _run_batch_centrally(self, batch: _Batch) -> None:
        if self.central_runner is None:
            return
        for plan in batch.stop:
            self.central_runner.stop_unit(plan.plan_id)
        for plan in batch.start:
            unit = self._personalize_plan_unit(plan, self.current_context) \
                if plan.body else None
            if unit is not None:
                self.central_runner.start_unit(unit)

    def shadow_check(self, mdss_decision_log: list[dict]) -> list[dict]:
        """fullShadowing: decisions seen by exactly one side; semiShadowing:
        recommendations that were never delivered."""
        if self.policy.policy == "semiShadowing":
            return [dict(item, divergence="undeliveredRecommendation")
                    for item in self.undelivered_recommendations]
        if self.policy.policy != "fullShadowing" or self.shadow is None:
            return []
        return diff_decision_logs(mdss_decision_log, self.shadow.action_log)


def diff_decision_logs(device_log: list[dict], shadow_log: list[dict]) -> list[dict]:
    def keyed(log):
        out = {}
        for action in log:
            if action["kind"] in ("callback", "notification"):
                key = (action["kind"], action.get("callbackId") or action.get("messageId"),
                       action["t"])
                out[key] = action
        return out

    device, shadow = keyed(device_log), keyed(shadow_log)
    reports = []
    for key in sorted(set(device) - set(shadow)):
        reports.append({"divergence": "deviceOnly", "action": device[key]})
    for key in sorted(set(shadow) - set(device)):
        reports.append({"divergence": "centralOnly", "action": shadow[key]})
    return reports


def _next_entry_concept(body: tuple, index: int) -> Optional[str]:
    for stmt in body[index + 1:]:
        if isinstance(stmt, n.PatientDataEntry):
            return stmt.concept_id
        if isinstance(stmt, n.WaitPeriodic):
            return None
    return None


def _duration_of(unit: n.UnitProjection) -> tuple[Optional[int], int]:
    duration = None
    offset = 0
    for stmt in n.walk_statements(unit.body):
        if isinstance(stmt, n.WaitPeriodic) and stmt.duration_days is not None:
            duration = stmt.duration_days if duration is None \
                else max(duration, stmt.duration_days)
            offset = stmt.start_offset_days or 0
    return duration, offset


def _adjust_unit_durations(unit: n.UnitProjection, elapsed: int):
    """Trim elapsed whole days off every bounded schedule; returns the
    adjusted unit and whether any schedule (or an unbounded one) remains."""
    alive = [False]

    def rewrite(body: tuple) -> tuple:
        out = []
        for stmt in body:
            if isinstance(stmt, n.WhileTrue):
                stmt = dataclasses.replace(stmt, body=rewrite(stmt.body))
            elif isinstance(stmt, n.ForIn):
                stmt = dataclasses.replace(stmt, body=rewrite(stmt.body))
            elif isinstance(stmt, n.IfTemporalQuery):
                stmt = dataclasses.replace(stmt, then_body=rewrite(stmt.then_body),
                                           else_body=rewrite(stmt.else_body))
            elif isinstance(stmt, n.WaitPeriodic):
                if stmt.duration_days is None:
                    alive[0] = True
                else:
                    offset = stmt.start_offset_days or 0
                    new_offset = max(0, offset - elapsed)
                    consumed = max(0, elapsed - offset)
                    remaining = stmt.duration_days - consumed
                    if remaining > 0:
                        alive[0] = True
                    stmt = dataclasses.replace(
                        stmt, start_offset_days=new_offset,
                        duration_days=max(0, remaining))
            elif isinstance(stmt, n.WaitTemporalQuery):
                alive[0] = True
            out.append(stmt)
        return tuple(out)

    adjusted = dataclasses.replace(unit, body=rewrite(unit.body))
    return adjusted, alive[0]
