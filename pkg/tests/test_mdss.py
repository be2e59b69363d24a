from datetime import date, datetime, timedelta
from pathlib import Path

import pytest

from pcb.channel import Channel, ChannelConfig
from pcb.events import Event
from pcb.lang import parse_envelope, parse_unit
from pcb.mdss import MdssEngine
from pcb.simclock import EventLoop

CORPUS = Path(__file__).parent / "fixtures" / "corpus"

T0 = datetime(2014, 5, 10, 6, 0)  # a Saturday morning


class CentralStub:
    def __init__(self, channel):
        self.channel = channel
        self.received = []
        channel.register("central", self.on_message)

    def on_message(self, msg):
        self.received.append(msg)
        if msg.kind not in ("ack", "nack"):
            self.channel.ack("central", msg)

    def of_kind(self, kind):
        return [m for m in self.received if m.kind == kind]


def make_engine(start=T0):
    loop = EventLoop(start)
    channel = Channel(loop, ChannelConfig())
    central = CentralStub(channel)
    engine = MdssEngine(loop, channel, "p1", seed=7)
    return loop, channel, central, engine


def fig11_envelope():
    return parse_envelope((CORPUS / "fig11_envelope.pcb").read_text(encoding="utf-8"))


def actions(engine, kind):
    return [a for a in engine.action_log if a["kind"] == kind]


def test_envelope_starts_units_and_prompts_at_eight():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    assert set(engine.units) == {"20102", "20130"}
    loop.run_until(T0 + timedelta(hours=3))
    prompts = actions(engine, "prompt")
    assert len(prompts) == 1
    prompt = prompts[0]
    assert prompt["conceptId"] == "4985"
    assert prompt["label"] == "BG Fasting"
    deadline = datetime.strptime(prompt["deadline"], "%Y-%m-%d %H:%M:%S")
    assert deadline == datetime(2014, 5, 10, 9, 0)  # one hour validity


def test_stop_list_applied_before_start_list():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    env2 = parse_envelope(
        'projection("19857", id="185");\nstop("20102,20130");\nstart("");\n'
    )
    engine.apply_envelope(env2)
    assert engine.units == {}


def test_duplicate_envelope_application_is_idempotent():
    loop, channel, central, engine = make_engine()
    text = (CORPUS / "fig11_envelope.pcb").read_text(encoding="utf-8")
    msg1 = channel.make_message("projection", "p1", {"projectionId": "184", "text": text})
    engine.handle_message(msg1)
    first_units = dict(engine.units)
    msg2 = channel.make_message("projection", "p1", {"projectionId": "184", "text": text})
    engine.handle_message(msg2)
    assert engine.units == first_units
    assert len(actions(engine, "unitStarted")) == 2  # one per unit, not doubled


def test_malformed_unit_yields_negative_ack():
    loop, channel, central, engine = make_engine()
    msg = channel.make_message(
        "projection", "p1", {"projectionId": "9", "text": "projection(;"}
    )
    engine.handle_message(msg)
    loop.run_until(T0 + timedelta(minutes=1))
    assert engine.units == {}
    assert len(central.of_kind("nack")) == 1


def test_two_abnormal_dates_trigger_callback_5112():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    loop.run_until(datetime(2014, 5, 10, 8, 0))
    prompt = engine.find_prompt("4985")
    engine.patient_input(prompt.prompt_id, 160)
    assert actions(engine, "callback") == []
    loop.run_until(datetime(2014, 5, 12, 8, 0))
    prompt = engine.find_prompt("4985")
    engine.patient_input(prompt.prompt_id, 160)
    fired = actions(engine, "callback")
    assert len(fired) == 1
    assert fired[0]["callbackId"] == "5112"
    loop.run_until(datetime(2014, 5, 12, 8, 5))
    assert len(central.of_kind("callback")) == 1


def test_callback_does_not_refire_without_new_rising_edge():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    for day in (10, 12):
        loop.run_until(datetime(2014, 5, day, 8, 0))
        engine.patient_input(engine.find_prompt("4985").prompt_id, 160)
    loop.run_until(datetime(2014, 5, 13, 0, 0))
    engine.on_rollover(loop.now)
    assert len(actions(engine, "callback")) == 1


def test_medication_unit_reminder_then_prompt():
    loop, channel, central, engine = make_engine()
    unit = parse_unit((CORPUS / "fig13_unit.pcb").read_text(encoding="utf-8"))
    envelope = parse_envelope(
        'projection("21001", id="900");\nstop("");\nstart("");\n'
    )
    import dataclasses
    envelope = dataclasses.replace(
        envelope, start_list=(unit.unit_id,), units=(unit,)
    )
    engine.apply_envelope(envelope)
    loop.run_until(datetime(2014, 5, 10, 21, 0))
    reminders = actions(engine, "reminder")
    assert reminders and reminders[0]["t"] == "2014-05-10 19:30:00"
    prompts = actions(engine, "prompt")
    assert len(prompts) == 1
    assert prompts[0]["t"] == "2014-05-10 20:00:00"
    assert prompts[0]["label"] == "Prendi il farmaco atorvastatina, 80.0 mg "
    assert prompts[0]["valueType"] == "boolean"
    assert engine.projection_globals.get("AFDoseId")


def test_duration_bounded_unit_fires_on_at_most_that_many_dates():
    loop, channel, central, engine = make_engine()
    source = (
        'unitProjection("u1","short med") {\n'
        "    while (true) {\n"
        '        waitPeriodic("1,2,3,4,5,6,7", "9:00", null, "0", "2");\n'
        "        event = createEvent();\n"
        '        event.patientDataEntry("9648","take it","boolean","1 hour");\n'
        "        event.insert();\n"
        "    }\n"
        "}\n"
    )
    unit = parse_unit(source)
    import dataclasses
    envelope = dataclasses.replace(
        parse_envelope('projection("1", id="2");\nstop("");\nstart("");\n'),
        start_list=("u1",), units=(unit,),
    )
    engine.apply_envelope(envelope)
    for day in range(6):
        loop.run_until(datetime(2014, 5, 10 + day, 23, 0))
        engine.on_rollover(loop.now)
    assert len(actions(engine, "prompt")) == 2
    assert "u1" not in engine.units
    assert actions(engine, "unitExpired")


def test_expired_prompt_cannot_be_answered():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    loop.run_until(datetime(2014, 5, 10, 8, 0))
    prompt = engine.find_prompt("4985")
    loop.run_until(datetime(2014, 5, 10, 9, 30))  # 90 minutes later
    assert engine.patient_input(prompt.prompt_id, 120) == "missed"
    assert [p for p in engine.prompts.values() if p.status == "missed"]


def test_qod_out_of_range_marks_very_low_and_excludes():
    loop, channel, central, engine = make_engine()
    engine.validators["5177"] = (60.0, 250.0)
    ev_bad = Event("p1", "5177", 400.0, loop.now, loop.now)
    engine.insert_local_event(ev_bad)
    assert engine.local_events[-1].quality == "veryLow"
    ev_ok = Event("p1", "5177", 120.0, loop.now, loop.now)
    engine.insert_local_event(ev_ok)
    assert engine.local_events[-1].quality == "normal"
    no_validator = Event("p1", "9999", 1e9, loop.now, loop.now)
    engine.insert_local_event(no_validator)
    assert engine.local_events[-1].quality == "normal"


def test_accept_decline_forwarded_with_subtypes():
    loop, channel, central, engine = make_engine()
    rec = channel.make_message(
        "recommendation", "p1",
        {"messageId": "5051", "text": "Increase carbohydrates", "requiresResponse": True},
    )
    engine.handle_message(rec)
    prompt = next(p for p in engine.prompts.values() if p.kind == "recommendation")
    engine.patient_input(prompt.prompt_id, "accept")
    loop.run_until(T0 + timedelta(minutes=2))
    notes = [m for m in central.of_kind("dataNotification")]
    assert any(m.payload["subtype"] == "patientAccepted" for m in notes)


def test_crash_wipes_state_and_restart_requests_recovery():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    loop.run_until(datetime(2014, 5, 10, 8, 0))
    engine.crash()
    assert engine.units == {} and engine.local_events == []
    engine.restart()
    loop.run_until(loop.now + timedelta(minutes=1))
    assert len(central.of_kind("crashRecoveryRequest")) == 1


def test_unit_independence_stopping_one_keeps_other_waits():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    engine._stop_unit("20130", reason="test")
    loop.run_until(datetime(2014, 5, 10, 8, 0))
    assert actions(engine, "prompt")  # 20102 still fired


def test_transcript_determinism():
    def run():
        loop, channel, central, engine = make_engine()
        engine.apply_envelope(fig11_envelope())
        for day in (10, 12):
            loop.run_until(datetime(2014, 5, day, 8, 0))
            engine.patient_input(engine.find_prompt("4985").prompt_id, 160)
        loop.run_until(datetime(2014, 5, 13, 0, 0))
        return engine.action_log

    assert run() == run()


def test_step_returns_due_actions_and_requires_monotone_clock():
    loop, channel, central, engine = make_engine()
    engine.apply_envelope(fig11_envelope())
    emitted = engine.step(datetime(2014, 5, 10, 8, 0))
    assert any(a["kind"] == "prompt" for a in emitted)
    assert engine.step(datetime(2014, 5, 10, 8, 0)) == []
    with pytest.raises(ValueError, match="monotone"):
        engine.step(datetime(2014, 5, 10, 7, 0))


def test_guard_band_marks_low_quality_near_limits():
    loop, channel, central, engine = make_engine()
    engine.validators["5177"] = (60.0, 250.0)
    engine.guard_bands["5177"] = 10.0
    near_edge = Event("p1", "5177", 65.0, loop.now, loop.now)
    engine.insert_local_event(near_edge)
    assert engine.local_events[-1].quality == "low"
    mid = Event("p1", "5177", 120.0, loop.now, loop.now)
    engine.insert_local_event(mid)
    assert engine.local_events[-1].quality == "normal"
