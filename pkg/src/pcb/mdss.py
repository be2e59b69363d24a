"""Device-local engine: applies projection envelopes, runs each unit as an
independent resumable task over the simulated clock, filters data quality,
prompts the patient, and emits callbacks.

Each unit runtime is an explicit (frame stack, wait state) machine; a unit
holds at most one wait at a time and shares nothing with other units.
"""

from __future__ import annotations

import random
import uuid
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Callable, Optional

from .channel import Channel, Message
from .events import Event
from .lang import DslError, parse_envelope
from .lang import nodes as n
from .lang.durations import parse_duration, parse_time_of_day, render_time_of_day
from .simclock import PRIORITY_ENGINE, EventLoop
from .temporal import apply_absence_guard, window_query


class UnitError(RuntimeError):
    pass


@dataclass
class PendingPrompt:
    prompt_id: str
    unit_id: str
    concept_id: str
    label: str
    value_type: str
    deadline: datetime
    kind: str  # dataEntry | recommendation
    status: str = "pending"  # pending | answered | missed
    message_id: str = ""


@dataclass
class _Frame:
    kind: str  # seq | while | for
    body: tuple
    index: int = 0
    keys: tuple = ()
    key_index: int = 0
    loop_var: str = ""


@dataclass
class _Wait:
    kind: str  # periodic | temporalQuery
    stmt: object
    fire_at: Optional[datetime] = None
    timer: object = None
    reminder_timer: object = None


@dataclass
class UnitRuntime:
    unit: n.UnitProjection
    applied_at: datetime
    frames: list = field(default_factory=list)
    env: dict = field(default_factory=dict)
    wait: Optional[_Wait] = None
    staged_entry: Optional[n.PatientDataEntry] = None
    staged_label: str = ""
    stmt_state: dict = field(default_factory=dict)
    end_date: Optional[date] = None  # past this date the unit is removed

    def state_for(self, stmt) -> dict:
        return self.stmt_state.setdefault(id(stmt), {})


def _day_number(d: date) -> int:
    """1=Sunday .. 7=Saturday."""
    return (d.weekday() + 1) % 7 + 1


class MdssEngine:
    def __init__(
        self,
        loop: EventLoop,
        channel: Channel,
        patient_id: str,
        seed: int = 0,
        on_action: Optional[Callable[[dict], None]] = None,
    ):
        self.loop = loop
        self.channel = channel
        self.patient_id = patient_id
        self.rng = random.Random(seed)
        self.on_action = on_action or (lambda action: None)
        channel.register("device", self.handle_message, self._on_send_failure)

        self.units: dict[str, UnitRuntime] = {}
        self.local_events: list[Event] = []
        self.abstractions: dict[str, n.AnnotateTemporal] = {}
        self.projection_globals: dict[str, object] = {}
        self.prompts: dict[str, PendingPrompt] = {}
        self.validators: dict[str, tuple[float, float]] = {}
        self.guard_bands: dict[str, float] = {}
        self.survey_concepts: set[str] = set()
        self.personal_event_concepts: dict[str, str] = {}  # event name -> concept id
        self.declarative: Optional[n.DeclarativeSection] = None
        self.last_projection_id: Optional[str] = None
        self.crashed = False
        self.action_log: list[dict] = []
        self._next_prompt = 1

    # ------------------------------------------------------------- plumbing

    def _emit(self, kind: str, **detail) -> dict:
        action = {"t": self.loop.now.strftime("%Y-%m-%d %H:%M:%S"), "actor": "mDSS",
                  "kind": kind, **detail}
        self.action_log.append(action)
        self.on_action(action)
        return action

    def _send(self, kind: str, payload: dict) -> None:
        self.channel.send(
            "device", self.channel.make_message(kind, self.patient_id, payload)
        )

    def _on_send_failure(self, msg: Message) -> None:
        self._emit("sendFailure", msgKind=msg.kind, msgId=msg.msg_id)

    # ------------------------------------------------------------- messages

    def handle_message(self, msg: Message) -> None:
        if self.crashed:
            return
        if msg.kind == "projection":
            self._on_projection(msg)
        elif msg.kind == "enroll":
            self._on_enroll(msg)
        elif msg.kind == "recommendation":
            self._on_recommendation(msg)
        elif msg.kind in ("ack", "nack"):
            pass
        else:
            self._emit("unexpectedMessage", msgKind=msg.kind)

    def _on_enroll(self, msg: Message) -> None:
        payload = msg.payload
        self.validators = {
            cid: (rng[0], rng[1]) for cid, rng in payload.get("validators", {}).items()
        }
        self.survey_concepts = set(payload.get("surveyConcepts", ()))
        self.personal_event_concepts = dict(payload.get("personalEventConcepts", {}))
        self._emit("enrolled", personalEvents=sorted(self.personal_event_concepts))
        self.channel.ack("device", msg)

    def _on_projection(self, msg: Message) -> None:
        projection_id = msg.payload.get("projectionId")
        if projection_id is not None and projection_id == self.last_projection_id:
            self._emit("duplicateProjectionIgnored", projectionId=projection_id)
            self.channel.ack("device", msg)
            return
        try:
            envelope = parse_envelope(msg.payload["text"])
        except DslError as exc:
            self._emit("projectionRejected", error=str(exc))
            self.channel.ack("device", msg, ok=False, error=str(exc))
            return
        self.last_projection_id = projection_id
        self.apply_envelope(envelope)
        self.channel.ack("device", msg)

    def apply_envelope(self, envelope: n.ProjectionEnvelope) -> None:
        """Stop-list first, then start-list, so a plan replacing itself never
        runs two schedules at once."""
        for unit_id in envelope.stop_list:
            self._stop_unit(unit_id, reason="stopList")
        for unit in envelope.units:
            self._start_unit(unit)
        if envelope.declarative is not None:
            self.declarative = envelope.declarative
            self._emit(
                "declarativeApplied",
                qodItems=len(envelope.declarative.qod_items),
                personalEvents=[e.event_name for e in envelope.declarative.personal_events],
            )
        self._emit(
            "projectionApplied",
            projectionId=envelope.projection_id,
            stopped=list(envelope.stop_list),
            started=list(envelope.start_list),
        )

    def _stop_unit(self, unit_id: str, reason: str) -> None:
        runtime = self.units.pop(unit_id, None)
        if runtime is None:
            return
        self._clear_timers(runtime)
        for prompt in self.prompts.values():
            if prompt.unit_id == unit_id and prompt.status == "pending":
                prompt.status = "missed"
        self._emit("unitStopped", unitId=unit_id, reason=reason)

    def _start_unit(self, unit: n.UnitProjection) -> None:
        existing = self.units.pop(unit.unit_id, None)
        if existing is not None:
            self._clear_timers(existing)
        runtime = UnitRuntime(unit=unit, applied_at=self.loop.now)
        runtime.frames = [_Frame("seq", unit.body)]
        runtime.end_date = self._duration_end(unit)
        self.units[unit.unit_id] = runtime
        self._emit("unitStarted", unitId=unit.unit_id, name=unit.name)
        self._baseline_temporal_waits(runtime)
        self._advance(runtime)

    def _baseline_temporal_waits(self, runtime: UnitRuntime) -> None:
        """A monitor shipped mid-episode must not re-fire on the history that
        caused its own projection: its waits start from the current state and
        need a fresh rising edge."""
        for stmt in n.walk_statements(runtime.unit.body):
            if isinstance(stmt, n.AnnotateTemporal):
                self.abstractions[stmt.abstraction_name] = stmt
        for stmt in n.walk_statements(runtime.unit.body):
            if isinstance(stmt, n.WaitTemporalQuery):
                state = runtime.state_for(stmt)
                try:
                    holds, _ = self._query(runtime, stmt.agg_condition, stmt.target,
                                           stmt.window_days, state)
                except UnitError:
                    continue
                state["lastState"] = holds

    def _duration_end(self, unit: n.UnitProjection) -> Optional[date]:
        end = None
        for stmt in n.walk_statements(unit.body):
            if isinstance(stmt, n.WaitPeriodic) and stmt.duration_days is not None:
                offset = stmt.start_offset_days or 0
                last = self.loop.now.date() + timedelta(days=offset + stmt.duration_days - 1)
                end = last if end is None else max(end, last)
        return end

    def _clear_timers(self, runtime: UnitRuntime) -> None:
        if runtime.wait is not None:
            self.loop.cancel(runtime.wait.timer)
            self.loop.cancel(runtime.wait.reminder_timer)
            runtime.wait = None

    # ----------------------------------------------------------- interpreter

    def _advance(self, runtime: UnitRuntime) -> None:
        unit_id = runtime.unit.unit_id
        try:
            self._run(runtime)
        except UnitError as exc:
            self._emit("unitError", unitId=unit_id, error=str(exc))
            self._stop_unit(unit_id, reason="error")

    def _run(self, runtime: UnitRuntime) -> None:
        while runtime.frames:
            frame = runtime.frames[-1]
            if frame.index >= len(frame.body):
                if frame.kind == "while":
                    frame.index = 0
                    continue
                if frame.kind == "for":
                    frame.key_index += 1
                    if frame.key_index < len(frame.keys):
                        runtime.env[frame.loop_var] = frame.keys[frame.key_index]
                        frame.index = 0
                        continue
                runtime.frames.pop()
                continue
            stmt = frame.body[frame.index]
            if isinstance(stmt, n.WAIT_STATEMENTS):
                if self._try_pass_wait(runtime, stmt):
                    frame.index += 1
                    continue
                return  # blocked; timers or data will resume us
            frame.index += 1
            self._execute(runtime, stmt)
        self._emit("unitFinished", unitId=runtime.unit.unit_id)
        self.units.pop(runtime.unit.unit_id, None)

    def _execute(self, runtime: UnitRuntime, stmt) -> None:
        if isinstance(stmt, n.WhileTrue):
            runtime.frames.append(_Frame("while", stmt.body))
        elif isinstance(stmt, n.ForIn):
            mapping = runtime.env.get(stmt.map_var)
            if not isinstance(mapping, dict):
                raise UnitError(f"for-in over non-map variable {stmt.map_var!r}")
            keys = tuple(mapping.keys())
            if keys:
                frame = _Frame("for", stmt.body, keys=keys, loop_var=stmt.loop_var)
                runtime.env[stmt.loop_var] = keys[0]
                runtime.frames.append(frame)
        elif isinstance(stmt, n.VarDecl):
            if isinstance(stmt.value, n.MapLiteral):
                runtime.env[stmt.name] = {
                    key: self._eval(runtime, expr) for key, expr in stmt.value.entries
                }
            else:
                runtime.env[stmt.name] = self._eval(runtime, stmt.value)
        elif isinstance(stmt, n.CreateEvent):
            runtime.staged_entry = None
            runtime.staged_label = ""
        elif isinstance(stmt, n.PatientDataEntry):
            runtime.staged_entry = stmt
            runtime.staged_label = str(self._eval(runtime, stmt.label))
        elif isinstance(stmt, n.InsertEvent):
            if runtime.staged_entry is None:
                raise UnitError("insert() without a staged patient data entry")
            self._open_prompt(runtime, runtime.staged_entry, runtime.staged_label)
            runtime.staged_entry = None
        elif isinstance(stmt, n.AnnotateTemporal):
            self.abstractions[stmt.abstraction_name] = stmt
        elif isinstance(stmt, n.IfTemporalQuery):
            holds, _ = self._query(runtime, stmt.agg_condition, stmt.target,
                                   stmt.window_days, runtime.state_for(stmt))
            branch = stmt.then_body if holds else stmt.else_body
            if branch:
                runtime.frames.append(_Frame("seq", branch))
        elif isinstance(stmt, n.Callback):
            self._emit("callback", unitId=runtime.unit.unit_id,
                       callbackId=stmt.callback_id, message=stmt.message)
            self._send("callback", {"callbackId": stmt.callback_id,
                                    "message": stmt.message})
        elif isinstance(stmt, n.PatientNotification):
            self._emit("notification", unitId=runtime.unit.unit_id,
                       messageId=stmt.message_id, text=stmt.text)
        elif isinstance(stmt, n.SetProjectionGlobal):
            self.projection_globals[stmt.name] = self._eval(runtime, stmt.value)
        else:
            raise UnitError(f"unsupported statement {type(stmt).__name__}")

    def _eval(self, runtime: UnitRuntime, expr) -> object:
        if isinstance(expr, n.Str):
            return expr.value
        if isinstance(expr, n.Num):
            return expr.value
        if isinstance(expr, n.Var):
            if expr.name in runtime.env:
                return runtime.env[expr.name]
            if expr.name in self.projection_globals:
                return self.projection_globals[expr.name]
            raise UnitError(f"unbound variable {expr.name!r}")
        if isinstance(expr, n.Index):
            mapping = runtime.env.get(expr.mapping)
            if not isinstance(mapping, dict):
                raise UnitError(f"indexing non-map {expr.mapping!r}")
            key = self._eval(runtime, expr.key)
            if key not in mapping:
                raise UnitError(f"missing key {key!r} in {expr.mapping!r}")
            return mapping[key]
        if isinstance(expr, n.CreateUuid):
            return str(uuid.UUID(bytes=bytes(self.rng.randrange(256) for _ in range(16)),
                                 version=4))
        if isinstance(expr, n.Concat):
            parts = []
            for part in expr.parts:
                value = self._eval(runtime, part)
                if isinstance(value, float) and value == int(value):
                    value = int(value)
                parts.append(str(value))
            return "".join(parts)
        raise UnitError(f"expression not evaluable here: {type(expr).__name__}")

    # -------------------------------------------------------------- waiting

    def _try_pass_wait(self, runtime: UnitRuntime, stmt) -> bool:
        if isinstance(stmt, n.WaitPeriodic):
            return self._wait_periodic(runtime, stmt)
        return self._wait_temporal(runtime, stmt)

    def _wait_periodic(self, runtime: UnitRuntime, stmt: n.WaitPeriodic) -> bool:
        state = runtime.state_for(stmt)
        time_text = str(self._eval(runtime, stmt.time_of_day))
        minutes = parse_time_of_day(time_text)
        window_start = runtime.applied_at.date() + timedelta(days=stmt.start_offset_days or 0)
        window_end = None
        if stmt.duration_days is not None:
            window_end = window_start + timedelta(days=stmt.duration_days - 1)
        last_fire = state.get("lastFire")
        fire_at = self._next_periodic_fire(
            stmt.days_of_week, minutes, window_start, window_end, last_fire
        )
        if fire_at is None:
            self._expire_unit(runtime)
            return False
        if fire_at <= self.loop.now:
            state["lastFire"] = fire_at
            return True
        wait = _Wait("periodic", stmt, fire_at=fire_at)
        runtime.wait = wait
        wait.timer = self.loop.schedule(
            fire_at, PRIORITY_ENGINE, lambda: self._on_periodic_fire(runtime, stmt, fire_at)
        )
        reminder_at = self._reminder_time(runtime, stmt, fire_at)
        if reminder_at is not None and reminder_at > self.loop.now:
            wait.reminder_timer = self.loop.schedule(
                reminder_at, PRIORITY_ENGINE,
                lambda: self._emit("reminder", unitId=runtime.unit.unit_id,
                                   dueAt=render_time_of_day(minutes)),
            )
        return False

    def _reminder_time(self, runtime, stmt, fire_at) -> Optional[datetime]:
        if stmt.reminder_lead is None:
            return None
        lead_value = self._eval(runtime, stmt.reminder_lead)
        lead = parse_duration(str(lead_value))
        return fire_at - timedelta(minutes=abs(lead.minutes))

    def _next_periodic_fire(self, days, minutes, window_start, window_end, last_fire):
        begin = max(self.loop.now.date(), window_start)
        for offset in range(0, 1000):
            day = begin + timedelta(days=offset)
            if window_end is not None and day > window_end:
                return None
            if _day_number(day) not in days:
                continue
            candidate = datetime.combine(day, time(minutes // 60, minutes % 60))
            if candidate < self.loop.now:
                continue
            if last_fire is not None and candidate <= last_fire:
                continue
            return candidate
        return None

    def _on_periodic_fire(self, runtime: UnitRuntime, stmt, fire_at) -> None:
        if self.units.get(runtime.unit.unit_id) is not runtime:
            return
        runtime.state_for(stmt)["lastFire"] = fire_at
        runtime.wait = None
        frame = runtime.frames[-1]
        frame.index += 1
        self._advance(runtime)

    def _wait_temporal(self, runtime: UnitRuntime, stmt: n.WaitTemporalQuery) -> bool:
        state = runtime.state_for(stmt)
        holds, observed = self._query(runtime, stmt.agg_condition, stmt.target,
                                      stmt.window_days, state)
        rising = holds and not state.get("lastState", False)
        state["lastState"] = holds
        if rising:
            self._emit("patternDetected", unitId=runtime.unit.unit_id,
                       target=stmt.target, observed=observed)
            return True
        runtime.wait = _Wait("temporalQuery", stmt)
        return False

    def _query(self, runtime: UnitRuntime, cond: n.Compare, target: str,
               window_days: int, state: Optional[dict] = None) -> tuple[bool, float]:
        threshold = cond.right
        if not isinstance(threshold, n.Num):
            raise UnitError(f"unresolved threshold in condition over {target!r}")
        agg = cond.left.kind
        holds, observed = window_query(
            agg, cond.op, threshold.value, target, window_days,
            self.loop.now, self.local_events, self.abstractions,
        )
        holds = apply_absence_guard(
            holds, agg, cond.op, threshold.value, self.local_events,
            self.loop.now, window_days, state if state is not None else {},
        )
        return holds, observed

    def _reevaluate_temporal_waits(self) -> None:
        for unit_id in list(self.units):
            runtime = self.units.get(unit_id)
            if runtime is None or runtime.wait is None:
                continue
            if runtime.wait.kind != "temporalQuery":
                continue
            stmt = runtime.wait.stmt
            state = runtime.state_for(stmt)
            holds, observed = self._query(runtime, stmt.agg_condition, stmt.target,
                                          stmt.window_days, state)
            rising = holds and not state.get("lastState", False)
            state["lastState"] = holds
            if rising:
                runtime.wait = None
                self._emit("patternDetected", unitId=unit_id, target=stmt.target,
                           observed=observed)
                frame = runtime.frames[-1]
                frame.index += 1
                self._advance(runtime)

    def _expire_unit(self, runtime: UnitRuntime) -> None:
        unit_id = runtime.unit.unit_id
        if self.units.get(unit_id) is runtime:
            self._clear_timers(runtime)
            del self.units[unit_id]
            self._emit("unitExpired", unitId=unit_id)

    # --------------------------------------------------------------- prompts

    def _open_prompt(self, runtime: UnitRuntime, entry: n.PatientDataEntry,
                     label: str) -> None:
        prompt_id = f"q{self._next_prompt:04d}"
        self._next_prompt += 1
        prompt = PendingPrompt(
            prompt_id=prompt_id,
            unit_id=runtime.unit.unit_id,
            concept_id=entry.concept_id,
            label=label,
            value_type=entry.value_type,
            deadline=self.loop.now + timedelta(minutes=entry.validity.minutes),
            kind="dataEntry",
        )
        self.prompts[prompt_id] = prompt
        self._emit("prompt", promptId=prompt_id, unitId=prompt.unit_id,
                   conceptId=prompt.concept_id, label=label,
                   valueType=prompt.value_type,
                   deadline=prompt.deadline.strftime("%Y-%m-%d %H:%M:%S"))
        self.loop.schedule(prompt.deadline, PRIORITY_ENGINE,
                           lambda: self._expire_prompt(prompt_id))

    def _expire_prompt(self, prompt_id: str) -> None:
        prompt = self.prompts.get(prompt_id)
        if prompt is not None and prompt.status == "pending":
            prompt.status = "missed"
            self._emit("promptMissed", promptId=prompt_id, conceptId=prompt.concept_id)

    def pending_prompts(self) -> list[PendingPrompt]:
        return [p for p in self.prompts.values() if p.status == "pending"]

    def find_prompt(self, concept_id: str) -> Optional[PendingPrompt]:
        for prompt in self.prompts.values():
            if prompt.status == "pending" and prompt.concept_id == concept_id:
                return prompt
        return None

    # ----------------------------------------------------------- patient input

    def qod_filter(self, event: Event) -> Event:
        rng = self.validators.get(event.concept_id)
        if rng is None or not isinstance(event.value, (int, float)) \
                or isinstance(event.value, bool):
            return event
        lo, hi = rng
        if not (lo <= event.value <= hi):
            return event.with_quality("veryLow")
        band = self.guard_bands.get(event.concept_id, 0.0)
        if band > 0 and (event.value < lo + band or event.value > hi - band):
            return event.with_quality("low")
        return event

    def patient_input(self, prompt_id: str, response) -> str:
        prompt = self.prompts.get(prompt_id)
        if prompt is None:
            return "unknown"
        if prompt.status != "pending" or self.loop.now > prompt.deadline:
            prompt.status = "missed"
            self._emit("inputRejected", promptId=prompt_id, reason="missed")
            return "missed"
        prompt.status = "answered"
        if response in ("accept", "decline"):
            accepted = response == "accept"
            self._emit("responseRecorded", promptId=prompt_id,
                       messageId=prompt.message_id or prompt.concept_id,
                       response=response)
            self.insert_local_event(
                Event(self.patient_id, prompt.concept_id, accepted,
                      self.loop.now, self.loop.now),
                forward=False,
            )
            subtype = "patientAccepted" if accepted else "patientDeclined"
            self._send("dataNotification",
                       {"subtype": subtype,
                        "messageId": prompt.message_id or prompt.concept_id})
            return "ok"
        value = _coerce(response, prompt.value_type)
        event = Event(self.patient_id, prompt.concept_id, value,
                      self.loop.now, self.loop.now)
        self.insert_local_event(event)
        return "ok"

    def insert_local_event(self, event: Event, forward: bool = True) -> None:
        event = self.qod_filter(event)
        self.local_events.append(event)
        self._emit("eventInsert", conceptId=event.concept_id, value=event.value,
                   quality=event.quality)
        if forward:
            if event.concept_id in self.survey_concepts:
                self._send("dataNotification",
                           {"subtype": "patientDataEntry", "event": event.to_json()})
            else:
                self._send("dataNotification",
                           {"subtype": "eventSync", "event": event.to_json()})
        self._reevaluate_temporal_waits()

    def switch_context(self, personal_event: str) -> None:
        concept = self.personal_event_concepts.get(personal_event)
        self._emit("contextSwitch", personalEvent=personal_event)
        if concept is not None:
            self.insert_local_event(
                Event(self.patient_id, concept, personal_event,
                      self.loop.now, self.loop.now),
                forward=False,
            )
        self._send("dataNotification",
                   {"subtype": "contextChanged", "personalEvent": personal_event})

    def _on_recommendation(self, msg: Message) -> None:
        payload = msg.payload
        requires = payload.get("requiresResponse", False)
        if not requires:
            self._emit("notification", messageId=payload.get("messageId", ""),
                       text=payload.get("text", ""), source="central")
            self.channel.ack("device", msg)
            return
        prompt_id = f"q{self._next_prompt:04d}"
        self._next_prompt += 1
        validity = payload.get("validityMinutes", 24 * 60)
        prompt = PendingPrompt(
            prompt_id=prompt_id,
            unit_id="",
            concept_id=payload.get("messageId", ""),
            label=payload.get("text", ""),
            value_type="boolean",
            deadline=self.loop.now + timedelta(minutes=validity),
            kind="recommendation",
            message_id=payload.get("messageId", ""),
        )
        self.prompts[prompt_id] = prompt
        self._emit("recommendation", promptId=prompt_id,
                   messageId=prompt.message_id, text=prompt.label)
        self.loop.schedule(prompt.deadline, PRIORITY_ENGINE,
                           lambda: self._expire_prompt(prompt_id))
        self.channel.ack("device", msg)

    # ---------------------------------------------------------------- clock

    def step(self, now: datetime) -> list[dict]:
        """Run everything due up to `now` and return the actions emitted.

        Convenience for library use; the harness drives the shared loop
        directly and consumes actions through on_action."""
        if now < self.loop.now:
            raise ValueError("clock must be monotone")
        cursor = len(self.action_log)
        self.loop.run_until(now)
        return self.action_log[cursor:]

    def on_rollover(self, now: datetime) -> None:
        if self.crashed:
            return
        for unit_id in list(self.units):
            runtime = self.units.get(unit_id)
            if runtime is None:
                continue
            if runtime.end_date is not None and now.date() > runtime.end_date:
                self._expire_unit(runtime)
        self._reevaluate_temporal_waits()

    # ---------------------------------------------------------------- crash

    def crash(self) -> None:
        """Device crash wipes all local state; recovery is the central
        engine's job."""
        for runtime in list(self.units.values()):
            self._clear_timers(runtime)
        self.units.clear()
        self.prompts.clear()
        self.local_events.clear()
        self.abstractions.clear()
        self.projection_globals.clear()
        self.last_projection_id = None
        self.crashed = True
        self.channel.crash_device(self.patient_id)
        self._emit("crashed")

    def restart(self) -> None:
        self.crashed = False
        self.channel.restart_device(self.patient_id)
        self._emit("restarted")
        self._send("crashRecoveryRequest",
                   {"restartedAt": self.loop.now.strftime("%Y-%m-%d %H:%M:%S")})


def _coerce(response, value_type: str):
    if value_type == "numeric":
        return float(response)
    if value_type == "boolean":
        if isinstance(response, bool):
            return response
        text = str(response).strip().lower()
        if text in ("true", "yes", "si", "1", "+", "++"):
            return True
        if text in ("false", "no", "0", "-", "--"):
            return False
        raise ValueError(f"cannot read boolean from {response!r}")
    return str(response)
