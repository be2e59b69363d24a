"""Acceptance suite: one check per release criterion, each printing a
PASS/FAIL line. Runs under pytest or standalone:

    python3 tests/test_acceptance.py
"""

import json
import random
import statistics
import sys
import time
from datetime import datetime, timedelta
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcb.channel import load_fault_plan
from pcb.harness import run_scenario
from pcb.knowledge import distribution_profile, kb_statistics, load_guideline
from pcb.lang import DslError, parse_envelope, parse_unit, serialize, serialize_unit, substitute_thresholds
from pcb.metrics import classify_interaction, compute_metrics, round2
from pcb.phr import INTERACTION_SUBTYPES, InteractionRecord
from pcb.temporal import window_query

from crashgen import generate_case
from genenv import random_envelope
from oracle import brute_force_window_query
from test_temporal import ABNORMAL_BG

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"

# published per-patient session measurements: (days, data notifications, mean
# time between interactions at two decimals)
GDM_SESSIONS = [
    (44, 11, 4.00), (48, 6, 8.00), (41, 12, 3.42), (77, 13, 5.92), (52, 16, 3.25),
    (46, 12, 3.83), (91, 42, 2.17), (103, 32, 3.22), (77, 17, 4.53), (43, 11, 3.91),
    (55, 12, 4.58), (59, 11, 5.36), (76, 20, 3.80), (22, 7, 3.14), (92, 34, 2.71),
    (55, 13, 4.23), (55, 22, 2.50), (72, 24, 3.00), (64, 18, 3.56),
]

# (days, functional count, functional mtbi, total count, technical mtbi)
AF_SESSIONS = [
    (96, 6, 16.00, 7, 13.71), (78, 5, 15.60, 6, 13.00), (98, 3, 32.67, 6, 16.33),
    (91, 4, 22.75, 9, 10.11), (90, 2, 45.00, 3, 30.00), (136, 6, 22.67, 7, 19.42),
    (259, 23, 11.26, 43, 6.02), (89, 9, 9.89, 11, 8.09), (249, 13, 19.15, 26, 9.57),
    (86, 2, 43.00, 4, 21.50),
]

# two TMTBI cells were truncated rather than rounded in print; exact
# arithmetic lands within one unit in the last place
TRUNCATED_TMTBI_ROWS = {5, 8}


def fixture(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


def synth_log(functional, technical_resends):
    t = datetime(2015, 4, 1)
    records = [
        InteractionRecord(t + timedelta(hours=i), "dataNotification", "monitoringTriggered")
        for i in range(functional)
    ]
    records += [
        InteractionRecord(t + timedelta(hours=900 + i), "projection", "procedure",
                          technical_only=True)
        for i in range(technical_resends)
    ]
    return records


def run_keto(**kw):
    return run_scenario(
        fixture("keto_mini_guideline.json"),
        fixture("keto_scenario.csv"),
        json.loads(fixture("keto_profile.json")),
        **kw,
    )


_collected_interaction_logs = []


# --------------------------------------------------------------- criterion 1


def check_01_metrics_reproduction():
    started = time.perf_counter()
    fmtbis = []
    for days, notifications, published in GDM_SESSIONS:
        metrics = compute_metrics(synth_log(notifications, 0), days)
        assert metrics.fmtbi == Fraction(days, notifications)
        assert round2(metrics.fmtbi) == published, (days, notifications)
        fmtbis.append(metrics.fmtbi)
    gdm_mean = sum(fmtbis) / len(fmtbis)
    assert abs(gdm_mean - Fraction(395, 100)) <= Fraction(1, 100)

    af_f, af_t = [], []
    for row_index, (days, functional, pub_f, total, pub_t) in enumerate(AF_SESSIONS):
        metrics = compute_metrics(synth_log(functional, total - functional), days)
        assert metrics.technical_notifications == total
        assert round2(metrics.fmtbi) == pub_f, (days, functional)
        if row_index in TRUNCATED_TMTBI_ROWS:
            assert abs(round2(metrics.tmtbi) - pub_t) <= 0.01 + 1e-9
        else:
            assert round2(metrics.tmtbi) == pub_t, (days, total)
        af_f.append(metrics.fmtbi)
        af_t.append(metrics.tmtbi)
    assert abs(sum(af_f) / len(af_f) - Fraction(2380, 100)) <= Fraction(1, 100)
    assert abs(sum(af_t) / len(af_t) - Fraction(1478, 100)) <= Fraction(1, 100)

    # recomputed spread matches the session table, not the prose (1.95)
    sd = statistics.stdev(float(v) for v in fmtbis)
    assert round(sd, 2) == 1.35

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"metrics reproduction took {elapsed:.2f}s"

    zero = compute_metrics([], 30)
    assert zero.fmtbi is None and zero.tmtbi is None


# --------------------------------------------------------------- criterion 2


def check_02_kb_statistics():
    gdm = kb_statistics(load_guideline(fixture("gdm_guideline.json")))
    assert (gdm.periodic_projections, gdm.monitoring_projections, gdm.callbacks) \
        == (22, 17, 16)
    assert distribution_profile(gdm) == "mostlyCentral"

    af = kb_statistics(load_guideline(fixture("af_guideline.json")))
    assert (af.periodic_projections, af.monitoring_projections, af.callbacks) \
        == (18, 2, 2)
    assert distribution_profile(af) == "mostlyLocal"


# --------------------------------------------------------------- criterion 3


def check_03_ketonuria_end_to_end():
    golden = (FIXTURES / "golden" / "keto_transcript.jsonl").read_text(encoding="utf-8")
    transcripts = []
    for _ in range(5):
        result = run_keto()
        assert result.exit_code == 0
        transcripts.append(result.transcript_lines())
    assert all(text == golden for text in transcripts)

    result = run_keto()
    sent = [(e["stop"], e["start"]) for e in result.transcript
            if e["kind"] == "projectionSent"]
    assert sent == [([], ["30001"]),
                    (["30001"], ["30011", "30012"]),
                    (["30011", "30012"], ["30021"])]
    callbacks = [e for e in result.transcript if e["kind"] == "callback"]
    assert [e["callbackId"] for e in callbacks] == ["5113"]
    _collected_interaction_logs.append(
        result.session.phr.interactions_for("kp01"))


# --------------------------------------------------------------- criterion 4


def check_04_recovery_arithmetic():
    from test_bedss import crash_and_recover, wait_periodics

    session, med_id = crash_and_recover(30)
    assert wait_periodics(session.mdss.units[med_id].unit)[0].duration_days == 31

    session, med_id = crash_and_recover(62)
    assert med_id not in session.mdss.units
    assert med_id not in session.phr.active_units("p1")

    session, med_id = crash_and_recover(0)
    assert wait_periodics(session.mdss.units[med_id].unit)[0].duration_days == 61


# --------------------------------------------------------------- criterion 5


def check_05_threshold_substitution():
    assert substitute_thresholds("sum >= <$5066$>", {"5066": 5}) == "sum >= 5"
    source = (CORPUS / "fig12_unit.pcb").read_text(encoding="utf-8")
    expected = (CORPUS / "fig12_unit_substituted.pcb").read_text(encoding="utf-8")
    assert substitute_thresholds(source, {"5066": 5}) == expected
    # and the substituted unit is the one the projection engine would ship
    gl = load_guideline(fixture("gdm_guideline.json"))
    assert gl.kb_threshold_values()["5066"] == 5.0
    assert parse_unit(substitute_thresholds(gl.plans["20010"].body,
                                            gl.kb_threshold_values()))


# --------------------------------------------------------------- criterion 6


def check_06_round_trip_and_fuzz():
    for name in ("fig11_envelope.pcb", "fig10_declarative.pcb"):
        env = parse_envelope((CORPUS / name).read_text(encoding="utf-8"))
        text = serialize(env)
        assert parse_envelope(text) == env
        assert serialize(parse_envelope(text)) == text
    for name in ("fig12_unit.pcb", "fig13_unit.pcb"):
        unit = parse_unit((CORPUS / name).read_text(encoding="utf-8"))
        text = serialize_unit(unit)
        assert parse_unit(text) == unit
        assert serialize_unit(parse_unit(text)) == text

    for seed in range(200):
        env = random_envelope(random.Random(seed))
        text = serialize(env)
        assert parse_envelope(text) == env, f"round trip failed for seed {seed}"

    sources = [p.read_text(encoding="utf-8") for p in sorted(CORPUS.glob("*.pcb"))]
    rng = random.Random(1234)
    for _ in range(10_000):
        raw = bytearray(rng.choice(sources).encode("utf-8"))
        pos = rng.randrange(len(raw))
        if rng.random() < 0.5:
            del raw[pos]
        else:
            raw[pos] = rng.randrange(256)
        try:
            parse_envelope(raw.decode("utf-8", errors="replace"))
        except DslError:
            pass  # a clean rejection is the accepted outcome


# --------------------------------------------------------------- criterion 7


def check_07_temporal_oracle():
    started = time.perf_counter()
    rng = random.Random(900913)
    abstractions = {"abnormal_BG": ABNORMAL_BG}
    base = datetime(2014, 3, 2, 8, 0)
    concepts = ["4985", "4986", "5065"]
    mismatches = 0
    for _ in range(1000):
        events = []
        for _ in range(rng.randrange(0, 50)):
            from pcb.events import Event
            day = rng.randrange(0, 25)
            t = base + timedelta(days=day, hours=rng.randrange(-6, 12))
            events.append(Event(
                "p", rng.choice(concepts),
                float(rng.choice([0, 1, 2.5, 60, 149.75, 150, 180])),
                t, t, "patientEntry",
                rng.choice(["normal"] * 8 + ["low", "veryLow"]),
            ))
        as_of = base + timedelta(days=rng.randrange(0, 25), hours=rng.randrange(0, 10))
        window = rng.randrange(1, 15)
        if rng.random() < 0.5:
            args = ("count", rng.choice([">=", ">", "<=", "<", "=="]),
                    float(rng.randrange(0, 6)),
                    rng.choice(["abnormal_BG", "4985", "4986"]), window)
        else:
            args = ("sum", rng.choice([">=", ">", "<=", "<"]),
                    float(rng.randrange(0, 500)), "5065", window)
        got = window_query(*args, as_of, events, abstractions)
        want = brute_force_window_query(*args, as_of, events, abstractions)
        if got != want:
            mismatches += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0
    assert elapsed < 10.0, f"oracle comparison took {elapsed:.2f}s"


# --------------------------------------------------------------- criterion 8


def check_08_protocol_robustness():
    rules = load_fault_plan(fixture("drop_first_projection_faults.json"))
    result = run_keto(fault_rules=rules)
    assert result.exit_code == 0

    sent_ids = [e["projectionId"] for e in result.transcript
                if e["kind"] == "projectionSent"]
    applied = {}
    for entry in result.transcript:
        if entry["kind"] == "projectionApplied":
            applied[entry["projectionId"]] = applied.get(entry["projectionId"], 0) + 1
    assert sorted(applied) == sorted(sent_ids)
    assert all(count == 1 for count in applied.values())

    dropped = [e for e in result.transcript
               if e["kind"] == "fault" and e["action"] == "drop"]
    assert len(dropped) == len(sent_ids)

    session = result.session
    assert set(session.mdss.units) == session.phr.active_units("kp01")
    _collected_interaction_logs.append(session.phr.interactions_for("kp01"))


# --------------------------------------------------------------- criterion 9


def check_09_crash_recovery_equivalence():
    def callbacks_after(entries, cutoff):
        out = []
        for entry in entries:
            if entry["kind"] != "callback":
                continue
            t = datetime.strptime(entry["t"], "%Y-%m-%d %H:%M:%S")
            if t > cutoff:
                out.append((entry["t"], entry["callbackId"]))
        return out

    for seed in range(100, 150):
        guideline, scenario, profile, crash_at, restart_at, _ = generate_case(seed)
        baseline = run_scenario(guideline, scenario, profile, seed=1)
        crashed = run_scenario(guideline, scenario, profile, seed=1,
                               crash_plan=[(crash_at, restart_at)])
        assert set(crashed.session.mdss.units) == set(baseline.session.mdss.units), \
            f"active units diverge for seed {seed}"
        assert callbacks_after(crashed.transcript, restart_at) == \
            callbacks_after(baseline.transcript, restart_at), \
            f"callback transcripts diverge for seed {seed}"
        if seed < 103:
            _collected_interaction_logs.append(
                crashed.session.phr.interactions_for("cp"))


# -------------------------------------------------------------- criterion 10


def check_10_classification_totality():
    if len(_collected_interaction_logs) < 3:
        check_03_ketonuria_end_to_end()
        check_08_protocol_robustness()
        guideline, scenario, profile, crash_at, restart_at, _ = generate_case(100)
        crashed = run_scenario(guideline, scenario, profile, seed=1,
                               crash_plan=[(crash_at, restart_at)])
        _collected_interaction_logs.append(crashed.session.phr.interactions_for("cp"))
    total = 0
    for log in _collected_interaction_logs:
        assert log, "interaction log unexpectedly empty"
        histogram = {}
        for record in log:
            subtype = classify_interaction(record)
            assert subtype in INTERACTION_SUBTYPES
            histogram[subtype] = histogram.get(subtype, 0) + 1
        assert sum(histogram.values()) == len(log)
        metrics = compute_metrics(log, 30)
        assert sum(metrics.interaction_histogram.values()) == len(log)
        total += len(log)
    assert total > 0


CRITERIA = [
    (1, "metrics reproduce the published session tables", check_01_metrics_reproduction),
    (2, "KB statistics and distribution profiles", check_02_kb_statistics),
    (3, "ketonuria end-to-end golden transcript", check_03_ketonuria_end_to_end),
    (4, "crash-recovery duration arithmetic", check_04_recovery_arithmetic),
    (5, "threshold substitution golden file", check_05_threshold_substitution),
    (6, "DSL round-trip and mutation fuzz", check_06_round_trip_and_fuzz),
    (7, "window query equals brute-force oracle", check_07_temporal_oracle),
    (8, "protocol robustness under dropped transmissions", check_08_protocol_robustness),
    (9, "crash-recovery equivalence on randomized scenarios",
     check_09_crash_recovery_equivalence),
    (10, "interaction classification totality", check_10_classification_totality),
]


@pytest.mark.parametrize("number,description,check",
                         CRITERIA, ids=[f"{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(number, description, check):
    check()
    print(f"ACCEPTANCE {number:02d} PASS: {description}")


def main() -> int:
    failures = 0
    for number, description, check in CRITERIA:
        try:
            check()
        except AssertionError as exc:
            failures += 1
            print(f"ACCEPTANCE {number:02d} FAIL: {description} ({exc})")
        else:
            print(f"ACCEPTANCE {number:02d} PASS: {description}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
