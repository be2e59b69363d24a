"""Randomized crash-recovery scenarios.

Each seed yields a small monitoring guideline, a longitudinal record, and one
crash/restart pair. Device-entered data stays clear of the interval
[crash - maxWindow, restart], so every pattern window evaluated after the
restart sees identical device data in the crashed and crash-free runs; that
is the regime in which recovery is expected to be transparent.
"""

from __future__ import annotations

import csv
import io
import json
import random
from datetime import date, datetime, timedelta

START = date(2014, 5, 4)  # a Sunday

HEADER = [
    "week", "day in week", "day of treatment", "valid time", "GESHER ID", "VMR Class",
    "conceptName", "Valid Start Time", "Valid End Time", "value", "Steps",
    "GENERATED BY component",
]


def crash_guideline(window_days: int, needed: int) -> str:
    monitor_body = (
        'unitProjection("m2","watch high values") {\n'
        '    annotateTemporal("or", new String[] {"event.getNumber(8100)>=100"}, '
        '"high_X", "date");\n'
        "    while (true) {\n"
        f'        waitTemporalQuery("count >= {needed}", "high_X", '
        f'"{window_days} calendardays");\n'
        '        callback("cb1", "high values detected");\n'
        "    }\n"
        "}\n"
    )
    sched_body = (
        'unitProjection("m1","daily measurement") {\n'
        "    while (true) {\n"
        '        waitPeriodic("1,2,3,4,5,6,7", "9:00", null);\n'
        "        event = createEvent();\n"
        '        event.patientDataEntry("8100","measure X","numeric","1 hour");\n'
        "        event.insert();\n"
        "    }\n"
        "}\n"
    )
    intense_body = (
        'unitProjection("m3","intensified measurement") {\n'
        "    while (true) {\n"
        '        waitPeriodic("1,2,3,4,5,6,7", "18:00", null);\n'
        "        event = createEvent();\n"
        '        event.patientDataEntry("8100","measure X again","numeric","1 hour");\n'
        "        event.insert();\n"
        "    }\n"
        "}\n"
    )
    doc = {
        "guideline": {"id": "crash", "name": "crash drill"},
        "concepts": [
            {"id": "8100", "name": "measure_X", "valueType": "numeric"},
            {"id": "9648", "name": "medication_intake", "valueType": "boolean"},
        ],
        "contexts": [{"id": "routine", "name": "Routine"}],
        "patterns": [
            {"id": "trig", "aggregator": "count", "comparison": ">=",
             "threshold": needed, "target": "high_X", "windowDays": window_days,
             "level": "mDSS"},
        ],
        "callbacks": [
            {"id": "cb1", "message": "high values detected", "triggerPattern": "trig"},
        ],
        "messages": [],
        "plans": [
            {"id": "root", "name": "root", "kind": "parallel",
             "children": ["m1", "m2", "m3", "lst"]},
            {"id": "m1", "name": "daily measurement", "kind": "periodic",
             "isProjected": True, "body": sched_body},
            {"id": "m2", "name": "watch high values", "kind": "monitoring",
             "isProjected": True, "body": monitor_body},
            {"id": "m3", "name": "intensified measurement", "kind": "periodic",
             "isProjected": True, "eligibilityCondition": "trig",
             "body": intense_body},
            {"id": "lst", "name": "listen for high-value callback",
             "kind": "monitoring", "completeCondition": "trig"},
        ],
    }
    return json.dumps(doc)


def _row(day: date, time_text: str, concept: str, name: str, value) -> list:
    treatment = (day - START).days + 1
    stamp = f"{day.day}/{day.month}/{day.year} {time_text}:00"
    return [1 + (treatment - 1) // 7, (treatment - 1) % 7 + 1, treatment, time_text,
            concept, "0", name, stamp, stamp, value, "", "SmartphoneGUI"]


def generate_case(seed: int):
    """Returns (guideline_text, scenario_csv, profile_doc, crash_at, restart_at,
    med_duration_days)."""
    rng = random.Random(seed)
    window = rng.randrange(3, 9)
    needed = rng.choice([2, 3])
    total_days = rng.randrange(22, 32)
    crash_day = rng.randrange(window + 3, total_days - 5)
    restart_hours = rng.choice([1, 5, 26, 49])
    med_duration = rng.randrange(5, 25)

    crash_at = datetime.combine(START + timedelta(days=crash_day), datetime.min.time()) \
        + timedelta(hours=23)
    restart_at = crash_at + timedelta(hours=restart_hours)
    quiet_from = crash_at - timedelta(days=window + 1)

    rows = []
    for offset in range(total_days):
        day = START + timedelta(days=offset)
        stamp = datetime.combine(day, datetime.min.time()) + timedelta(hours=9)
        if quiet_from <= stamp <= restart_at:
            continue  # the pre-crash gap keeps windows comparable
        value = 120 if rng.random() < 0.25 else 60
        rows.append(_row(day, "9:00", "8100", "measure X", value))

    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(HEADER)
    writer.writerows(rows)

    profile = {
        "patientId": "cp",
        "currentContext": "routine",
        "reminderLeadMinutes": -5,
        "dircs": [],
        "preferences": [],
        "prescriptions": [{
            "medication": "testmed",
            "dosePerTime": {"20:00": "1.0 mg"},
            "reminderLead": "10 minutes",
            "startDate": START.isoformat(),
            "endDate": (START + timedelta(days=med_duration - 1)).isoformat(),
        }],
        "thresholds": {},
    }
    guideline = crash_guideline(window, needed)
    return guideline, out.getvalue(), profile, crash_at, restart_at, med_duration
