import csv
import random
from datetime import date, datetime, timedelta
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcb.events import Event
from pcb.phr import InteractionRecord, PhrStore, Prescription

FIXTURES = Path(__file__).parent / "fixtures"

T0 = datetime(2014, 5, 10, 14, 0)


def ev(concept="5021", value=False, minute=0, patient="p1"):
    t = datetime(2014, 3, 3, 8, 0) + timedelta(minutes=minute)
    return Event(patient, concept, value, t, t)


def test_insert_and_query_by_concept_and_range():
    store = PhrStore()
    store.insert_event(ev(minute=0))
    store.insert_event(ev(concept="4985", value=160.0, minute=5))
    store.insert_event(ev(minute=60))
    found = store.events_for("p1", "5021")
    assert len(found) == 2
    bounded = store.events_for(
        "p1", "5021", start=datetime(2014, 3, 3, 8, 30), end=datetime(2014, 3, 3, 10, 0)
    )
    assert len(bounded) == 1


def test_insert_notifies_subscription_hook():
    store = PhrStore()
    seen = []
    store.on_insert = seen.append
    inserted = ev()
    store.insert_event(inserted)
    assert seen == [inserted]


def test_invalid_interval_rejected():
    with pytest.raises(ValueError, match="inverted"):
        Event("p1", "5021", True, datetime(2014, 3, 3, 9), datetime(2014, 3, 3, 8))


def test_appendix_dataset_bulk_load_is_fully_retrievable():
    store = PhrStore()
    path = FIXTURES / "molly_scenario.csv"
    loaded = 0
    with path.open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            step = row["Steps"].strip()
            if step and not step.isdigit():
                continue  # lettered steps assert behaviour, they inject nothing
            start = datetime.strptime(row["Valid Start Time"], "%d/%m/%Y %H:%M:%S")
            value = row["value"]
            store.insert_event(Event("molly", row["GESHER ID"], value, start, start))
            loaded += 1
    assert loaded == 330
    assert len(store.events_for("molly")) == 330


# ------------------------------------------------------------------- ledger


def test_table_rows_yield_published_active_sets():
    store = PhrStore()
    at = datetime(2014, 5, 10, 14, 0)
    rows = store.record_projection("p1", "184", ["20091", "20092"], ["20102", "20130"], at)
    assert [(r.unit_id, r.status) for r in rows] == [
        ("20091", "stop"),
        ("20092", "stop"),
        ("20102", "start"),
        ("20130", "start"),
    ]
    assert all(r.sent_date == at for r in rows)
    assert store.active_units("p1", "19857") == {"20102", "20130"}


def test_empty_ledger_has_no_active_units():
    assert PhrStore().active_units("p1") == set()


def test_latest_record_wins():
    store = PhrStore()
    store.record_projection("p1", "1", [], ["X"], T0)
    store.record_projection("p1", "2", ["X"], [], T0 + timedelta(hours=1))
    assert store.active_units("p1") == set()
    store.record_projection("p1", "3", [], ["X"], T0 + timedelta(hours=2))
    assert store.active_units("p1") == {"X"}


def test_overlapping_stop_start_rejected():
    store = PhrStore()
    with pytest.raises(ValueError, match="overlap"):
        store.record_projection("p1", "1", ["A"], ["A"], T0)


def test_empty_projection_records_nothing():
    store = PhrStore()
    assert store.record_projection("p1", "1", [], [], T0) == []
    assert store.record(patient_id="p1").ledger == []


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_ledger_set_algebra_property(seed):
    rng = random.Random(seed)
    store = PhrStore()
    names = [f"u{i}" for i in range(8)]
    at = T0
    for step in range(rng.randrange(1, 8)):
        before = store.active_units("p1")
        stops = [u for u in names if u in before and rng.random() < 0.4]
        starts = [u for u in names if u not in stops and rng.random() < 0.4]
        store.record_projection("p1", str(step), stops, starts, at)
        at += timedelta(hours=1)
        assert store.active_units("p1") == (before - set(stops)) | set(starts)


# -------------------------------------------------------------- persistence


def test_jsonl_log_replays_to_identical_state(tmp_path):
    store = PhrStore(tmp_path)
    store.insert_event(ev())
    store.add_prescription(
        "p1",
        Prescription("atorvastatina", {"20:00": "80.0 mg"}, "30.0 minutes",
                     date(2014, 5, 10), date(2014, 7, 9)),
    )
    store.record_projection("p1", "184", [], ["20102"], T0)
    store.log_interaction(
        "p1", InteractionRecord(T0, "projection", "procedure", False, "initial")
    )
    store.set_context("p1", "semiroutine")

    reopened = PhrStore(tmp_path)
    rec = reopened.record("p1")
    assert len(rec.events) == 1
    assert rec.prescriptions[0].medication == "atorvastatina"
    assert reopened.active_units("p1") == {"20102"}
    assert rec.interactions[0].subtype == "procedure"
    assert rec.current_context == "semiroutine"


def test_interaction_log_is_append_only_and_stable():
    store = PhrStore()
    store.log_interaction("p1", InteractionRecord(T0, "dataNotification", "callbackTriggered"))
    store.log_interaction(
        "p1", InteractionRecord(T0, "projection", "procedure", technical_only=True)
    )
    first = [r.to_json() for r in store.interactions_for("p1")]
    second = [r.to_json() for r in store.interactions_for("p1")]
    assert first == second


def test_technical_only_restricted_to_projections():
    with pytest.raises(ValueError, match="technicalOnly"):
        InteractionRecord(T0, "dataNotification", "callbackTriggered", technical_only=True)


def test_prescription_validity():
    p = Prescription("x", {"8:00": "1 mg"}, "5 minutes", date(2014, 1, 1), date(2014, 1, 31))
    assert p.valid_on(date(2014, 1, 15))
    assert not p.valid_on(date(2014, 2, 1))
    with pytest.raises(ValueError):
        Prescription("x", {}, "5 minutes", date(2014, 1, 1), date(2014, 1, 31))


def test_event_reads_independent_of_insertion_order():
    def load(order):
        store = PhrStore()
        for minute, concept in order:
            store.insert_event(ev(concept=concept, minute=minute, value=float(minute)))
        return store.events_for("p1")

    a = load([(0, "1"), (5, "2"), (3, "1")])
    b = load([(3, "1"), (0, "1"), (5, "2")])
    assert a == b
