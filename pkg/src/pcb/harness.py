"""Deterministic scenario replay: wires both engines over the simulated
clock, injects scenario rows through their declared sources, checks the
lettered assertion rows against the transcript, and computes session metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from pathlib import Path
from typing import Optional

from .bedss import BedssEngine, PatientProfile, PolicyConfig
from .channel import Channel, ChannelConfig, FaultRule, Message
from .events import Event
from .knowledge import Guideline, load_guideline
from .lang import parse_envelope
from .mdss import MdssEngine
from .metrics import SessionMetrics, compute_metrics
from .phr import PhrStore
from .scenario import Assertion, ScenarioRow, load_scenario, parse_value
from .simclock import PRIORITY_SCENARIO, EventLoop, schedule_daily_rollovers

POLICY_FLAGS = {
    "passing-of-control": "passingOfControl",
    "full-mdss": "fullMdss",
    "full-bedss": "fullBeDss",
    "full-shadow": "fullShadowing",
    "semi-shadow": "semiShadowing",
}

_TS = "%Y-%m-%d %H:%M:%S"


class _CaptureTransport:
    """Channel look-alike for engines that must stay off the wire: outbound
    messages are recorded and optionally handed to an upcall."""

    def __init__(self, loop: EventLoop, upcall=None):
        self.loop = loop
        self.upcall = upcall or (lambda msg: None)
        self.sent: list[Message] = []
        self._next = 1

    def register(self, side, handler, on_delivery_failure=None):
        pass

    def make_message(self, kind, patient_id, payload) -> Message:
        msg = Message(f"x{self._next:05d}", kind, patient_id, payload, self.loop.now)
        self._next += 1
        return msg

    def send(self, side, msg: Message) -> None:
        self.sent.append(msg)
        self.upcall(msg)

    def ack(self, side, answered, ok=True, error=""):
        pass

    def crash_device(self, patient_id):
        pass

    def restart_device(self, patient_id):
        pass


class CentralRunner:
    """fullBeDss companion: runs projected unit bodies inside the central
    engine and turns their patient-facing actions into direct messages."""

    def __init__(self, loop: EventLoop, bedss: BedssEngine, channel: Channel,
                 patient_id: str, seed: int, on_action):
        self.bedss = bedss
        self.channel = channel
        self.patient_id = patient_id
        transport = _CaptureTransport(loop, upcall=self._upcall)
        self.engine = MdssEngine(loop, transport, patient_id, seed=seed,
                                 on_action=self._relabel(on_action))
        self.engine.survey_concepts = set()

    def _relabel(self, on_action):
        def inner(action):
            action = dict(action, actor="BE-DSS(central-run)")
            on_action(action)
            if action["kind"] in ("prompt", "notification", "reminder"):
                self.channel.send("central", self.channel.make_message(
                    "recommendation", self.patient_id,
                    {"messageId": action.get("conceptId") or action.get("messageId", ""),
                     "text": action.get("label") or action.get("text", ""),
                     "requiresResponse": False},
                ))
            return None
        return inner

    def _upcall(self, msg: Message) -> None:
        if msg.kind == "callback":
            self.bedss._on_callback(msg.payload)
        elif msg.kind == "dataNotification":
            self.bedss.on_data_notification(msg.payload)

    def start_unit(self, unit) -> None:
        self.engine._start_unit(unit)

    def stop_unit(self, unit_id: str) -> None:
        self.engine._stop_unit(unit_id, reason="central")


@dataclass
class RunResult:
    transcript: list[dict]
    metrics: SessionMetrics
    assertions: list[Assertion]
    exit_code: int
    shadow_reports: list[dict] = field(default_factory=list)
    session: Optional["Session"] = None

    def transcript_lines(self) -> str:
        return "".join(json.dumps(entry, sort_keys=True) + "\n"
                       for entry in self.transcript)


class Session:
    """One patient, both engines, one clock."""

    def __init__(
        self,
        guideline: Guideline,
        profile: PatientProfile,
        start: datetime,
        policy: str = "passingOfControl",
        fault_rules: Optional[list[FaultRule]] = None,
        seed: int = 0,
        phr_dir: Optional[Path] = None,
        channel_config: Optional[ChannelConfig] = None,
    ):
        self.gl = guideline
        self.profile = profile
        self.transcript: list[dict] = []
        self.listeners: list = []
        self._seq = 0
        self.loop = EventLoop(start)
        config = channel_config or ChannelConfig()
        config.fault_rules = list(fault_rules or ())
        self.channel = Channel(self.loop, config, trace=self._trace_channel)
        self.phr = PhrStore(phr_dir)
        self.mdss = MdssEngine(self.loop, self.channel, profile.patient_id,
                               seed=seed, on_action=self._record)
        self.bedss = BedssEngine(
            self.loop, self.channel, guideline, self.phr, profile,
            policy=PolicyConfig(policy), seed=seed + 1, on_action=self._record,
        )
        self.shadow: Optional[MdssEngine] = None
        self.central_runner: Optional[CentralRunner] = None
        if policy == "fullShadowing":
            transport = _CaptureTransport(self.loop)
            self.shadow = MdssEngine(self.loop, transport, profile.patient_id,
                                     seed=seed, on_action=self._relabel_shadow)
            self.bedss.shadow = self.shadow
        if policy == "fullBeDss":
            self.central_runner = CentralRunner(
                self.loop, self.bedss, self.channel, profile.patient_id,
                seed=seed, on_action=self._record,
            )
            self.bedss.central_runner = self.central_runner

    # ------------------------------------------------------------ transcript

    def _record(self, entry: dict) -> None:
        entry = dict(entry)
        entry["seq"] = self._seq
        self._seq += 1
        self.transcript.append(entry)
        for listener in self.listeners:
            listener(entry)

    def _relabel_shadow(self, action: dict) -> None:
        self._record(dict(action, actor="BE-DSS(shadow)"))

    def _trace_channel(self, kind: str, detail: dict) -> None:
        self._record({"t": self.loop.now.strftime(_TS), "actor": "channel",
                      "kind": kind, **detail})
        if self.shadow is not None and kind == "send":
            frame = json.loads(detail["frame"])
            if frame["kind"] == "projection":
                envelope = parse_envelope(frame["payload"]["text"])
                self.shadow.apply_envelope(envelope)

    # ---------------------------------------------------------------- running

    def start(self) -> None:
        self.bedss.start_session()

    def rollover(self, now: datetime) -> None:
        self.bedss.on_rollover(now)
        self.mdss.on_rollover(now)
        if self.shadow is not None:
            self.shadow.on_rollover(now)
        if self.central_runner is not None:
            self.central_runner.engine.on_rollover(now)

    # -------------------------------------------------------------- injection

    def inject(self, row: ScenarioRow) -> None:
        value_type = None
        concept = self.gl.concepts.get(row.concept_id)
        if concept is not None:
            value_type = concept.value_type
        if row.generated_by in ("SmartphoneGUI", "mDSS"):
            self._inject_device(row, value_type)
        elif row.generated_by == "EMR":
            self.phr.insert_event(Event(
                self.profile.patient_id, row.concept_id,
                parse_value(row.value, value_type),
                row.valid_start, row.valid_end, source="careGiver",
            ))
        elif row.generated_by == "careGiver":
            if row.value in ("accept", "decline"):
                self.bedss.care_giver_response(row.concept_id, row.value == "accept")
            else:
                self.phr.insert_event(Event(
                    self.profile.patient_id, row.concept_id,
                    parse_value(row.value, value_type),
                    row.valid_start, row.valid_end, source="careGiver",
                ))
        else:
            self._record({"t": self.loop.now.strftime(_TS), "actor": "scenario",
                          "kind": "unroutableRow", "step": row.step,
                          "generatedBy": row.generated_by})

    def _inject_device(self, row: ScenarioRow, value_type) -> None:
        engine = self.mdss
        if self.central_runner is not None:
            engine = self.central_runner.engine
        context_concepts = {
            c.event_concept_id for c in self.gl.contexts.values() if c.event_concept_id
        }
        if row.concept_id in context_concepts:
            engine.switch_context(row.value)
            return
        if row.value in ("accept", "decline"):
            prompt = next(
                (p for p in engine.prompts.values()
                 if p.status == "pending"
                 and (p.message_id or p.concept_id) == row.concept_id),
                None,
            )
            if prompt is not None:
                engine.patient_input(prompt.prompt_id, row.value)
            else:
                self._record({"t": self.loop.now.strftime(_TS), "actor": "scenario",
                              "kind": "responseWithoutPrompt",
                              "conceptId": row.concept_id})
            return
        value = parse_value(row.value, value_type)
        prompt = engine.find_prompt(row.concept_id)
        if prompt is not None:
            engine.patient_input(prompt.prompt_id, value)
        else:
            engine.insert_local_event(Event(
                self.profile.patient_id, row.concept_id, value,
                row.valid_start, row.valid_end, source="patientEntry",
            ))


def session_start_for(rows: list[ScenarioRow]) -> datetime:
    if not rows:
        return datetime(2014, 1, 1)
    first = min(r.valid_start for r in rows)
    return datetime.combine(first.date(), time.min)


def run_scenario(
    guideline_text: str,
    scenario_text: str,
    profile_doc: dict,
    fault_rules: Optional[list[FaultRule]] = None,
    policy: str = "passingOfControl",
    seed: int = 0,
    phr_dir: Optional[Path] = None,
    crash_plan: Optional[list[tuple[datetime, datetime]]] = None,
    channel_config: Optional[ChannelConfig] = None,
    serve_port: Optional[int] = None,
) -> RunResult:
    guideline = load_guideline(guideline_text)
    rows = load_scenario(scenario_text)
    profile = PatientProfile.from_json(profile_doc)
    start = session_start_for(rows)
    session = Session(guideline, profile, start, policy=policy,
                      fault_rules=fault_rules, seed=seed, phr_dir=phr_dir,
                      channel_config=channel_config)
    loop = session.loop

    bridge = None
    if serve_port is not None:
        from .consoleserve import ConsoleBridge  # session feed over a web socket

        bridge = ConsoleBridge(session, serve_port, allow_clock=False)
        print(f"waiting for console on ws://127.0.0.1:{bridge.ws.port}/", flush=True)
        bridge.wait_for_client()

    injections = [r for r in rows if not r.is_assertion]
    assertion_rows = [r for r in rows if r.is_assertion]
    last = max((r.valid_start for r in rows), default=start)
    horizon = last + timedelta(days=1)

    schedule_daily_rollovers(loop, horizon, session.rollover)
    for row in injections:
        loop.schedule(row.valid_start, PRIORITY_SCENARIO,
                      lambda r=row: session.inject(r))
    for crash_at, restart_at in crash_plan or ():
        loop.schedule(crash_at, PRIORITY_SCENARIO, session.mdss.crash)
        loop.schedule(restart_at, PRIORITY_SCENARIO, session.mdss.restart)

    session.start()
    if bridge is None:
        loop.run_until(horizon)
    else:
        from .wsserver import WsClosed

        cursor = start
        while cursor < horizon:
            cursor = min(cursor + timedelta(hours=12), horizon)
            loop.run_until(cursor)
            while bridge.ws.connected:
                try:
                    raw = bridge.ws.recv_text(timeout=0.01)
                except WsClosed:
                    break
                if raw is None:
                    break
                bridge.handle_command(raw)
        bridge._send({"type": "runComplete"})
        bridge.ws.close()

    assertions = [check_assertion(session, make_assertion(session.gl, row))
                  for row in assertion_rows]
    days = day_span(rows)
    metrics = compute_metrics(session.phr.interactions_for(profile.patient_id), days)
    shadow_reports = session.bedss.shadow_check(session.mdss.action_log)
    failed = any(not a.passed for a in assertions)
    return RunResult(
        transcript=session.transcript,
        metrics=metrics,
        assertions=assertions,
        exit_code=1 if failed else 0,
        shadow_reports=shadow_reports,
        session=session,
    )


def day_span(rows: list[ScenarioRow]) -> int:
    if not rows:
        return 0
    first = min(r.valid_start for r in rows).date()
    last = max(r.valid_start for r in rows).date()
    return (last - first).days + 1


def make_assertion(gl: Guideline, row: ScenarioRow) -> Assertion:
    actor = row.generated_by
    return Assertion(step=row.step, at=row.valid_start, actor=actor,
                     ref_id=row.concept_id, value=row.value)


def check_assertion(session: Session, assertion: Assertion) -> Assertion:
    gl = session.gl
    ref = assertion.ref_id
    if ref in gl.callbacks:
        assertion.kind = "callback"
    elif ref in gl.messages:
        assertion.kind = {
            "notification": "notification",
            "recommendation": "recommendation",
            "dataEntry": "prompt",
        }[gl.messages[ref].kind]
    elif ref in gl.plans or ref in session.bedss.sent_units:
        assertion.kind = "projection"
    else:
        assertion.note = f"reference {ref!r} matches no callback, message, or plan"
        return assertion

    # scripts stamp assertions just after the triggering row; allow the
    # system to have reacted up to an hour before the scripted moment
    lo, hi = assertion.at - timedelta(hours=1), assertion.at + assertion.window

    def in_window(entry):
        t = datetime.strptime(entry["t"], _TS)
        return lo <= t <= hi

    for entry in session.transcript:
        if not in_window(entry):
            continue
        kind = entry.get("kind")
        if assertion.kind == "callback" and kind == "callback" \
                and entry.get("callbackId") == ref:
            assertion.passed = True
        elif assertion.kind == "notification" and kind == "notification" \
                and entry.get("messageId") == ref:
            assertion.passed = True
        elif assertion.kind == "recommendation" and kind in ("recommendation", "interaction") \
                and (entry.get("messageId") == ref or entry.get("detail") == ref):
            assertion.passed = True
        elif assertion.kind == "prompt" and kind == "prompt" \
                and entry.get("conceptId") == ref:
            assertion.passed = True
        elif assertion.kind == "projection" and kind == "projectionSent" \
                and (ref in entry.get("start", ()) or ref in entry.get("stop", ())):
            assertion.passed = True
        if assertion.passed:
            assertion.note = f"matched seq {entry['seq']}"
            break
    if not assertion.passed:
        assertion.note = f"no {assertion.kind} for {ref} in window"
    return assertion


def render_report(result: RunResult, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(
            {
                "metrics": result.metrics.to_json(),
                "assertions": [
                    {"step": a.step, "kind": a.kind, "ref": a.ref_id,
                     "passed": a.passed, "note": a.note}
                    for a in result.assertions
                ],
                "shadowReports": result.shadow_reports,
                "exitCode": result.exit_code,
            },
            indent=1, sort_keys=True,
        )
    lines = ["== session metrics =="]
    m = result.metrics.to_json()
    for key in ("daysInSystem", "functionalNotifications", "technicalNotifications",
                "fmtbi", "tmtbi"):
        lines.append(f"{key}: {m[key]}")
    lines.append("interaction histogram:")
    for subtype, count in m["interactionHistogram"].items():
        lines.append(f"  {subtype}: {count}")
    if result.assertions:
        lines.append("== assertions ==")
        for a in result.assertions:
            flag = "PASS" if a.passed else "FAIL"
            lines.append(f"{flag} step {a.step}: {a.kind} {a.ref_id} ({a.note})")
    if result.shadow_reports:
        lines.append("== shadow divergences ==")
        for report in result.shadow_reports:
            lines.append(json.dumps(report, sort_keys=True))
    return "\n".join(lines)
