#!/usr/bin/env python3
"""Regenerate the guideline, patient-profile, and scenario fixtures.

Writes into tests/fixtures/. Deterministic: same output on every run.
"""

from __future__ import annotations

import csv
import json
import sys
from datetime import date, datetime, timedelta
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
sys.path.insert(0, str(ROOT / "src"))

from pcb.knowledge import kb_statistics, load_guideline  # noqa: E402

# --------------------------------------------------------------- DSL bodies


def daily_prompt_unit(plan_id, name, concept, label, time, value_type, validity="1 hour",
                      days="1,2,3,4,5,6,7", lead='"5 minutes"'):
    return (
        f'unitProjection("{plan_id}","{name}") {{\n'
        "    while (true) {\n"
        f'        waitPeriodic("{days}", "{time}", {lead});\n'
        "        event = createEvent();\n"
        f'        event.patientDataEntry("{concept}","{label}","{value_type}","{validity}");\n'
        "        event.insert();\n"
        "    }\n"
        "}\n"
    )


BG_ROUTINE_UNIT = """unitProjection("20091","Routine daily BG measurements") {
    while (true) {
        waitPeriodic("1,2,3,4,5,6,7", "8:00", "5 minutes");
        event = createEvent();
        event.patientDataEntry("4985","BG Fasting","numeric","1 hour");
        event.insert();
        waitPeriodic("1,2,3,4,5,6,7", "9:00", "5 minutes");
        event = createEvent();
        event.patientDataEntry("4986","BG Breakfast","numeric","1 hour");
        event.insert();
        waitPeriodic("1,2,3,4,5,6,7", "13:00", "5 minutes");
        event = createEvent();
        event.patientDataEntry("4987","BG Lunch","numeric","1 hour");
        event.insert();
        waitPeriodic("1,2,3,4,5,6,7", "20:00", "5 minutes");
        event = createEvent();
        event.patientDataEntry("4988","BG Dinner","numeric","1 hour");
        event.insert();
    }
}
"""


def abnormal_bg_monitor_unit(plan_id, name):
    return (
        f'unitProjection("{plan_id}","{name}") {{\n'
        '    annotateTemporal("or", new String[] {\n'
        '        "event.getNumber(4985)>=150",\n'
        '        "event.getNumber(4986)>=150",\n'
        '        "event.getNumber(4987)>=150",\n'
        '        "event.getNumber(4988)>=150"\n'
        '    }, "abnormal_BG", "date");\n'
        "\n"
        "    while (true) {\n"
        '        waitTemporalQuery("count >= 2", "abnormal_BG", "8 calendardays");\n'
        '        callback("5112", "2 abnormal values in BG were found in your measurements '
        'in the past week, system is calculating another schedule for you for daily BG '
        'measurement");\n'
        "    }\n"
        "}\n"
    )


FIG11_UNIT_20102 = """unitProjection("20102","Semi-Routine Daily BG Fasting measurement") {
    while (true) {
        waitPeriodic("1,2,3,4,5,6,7", "8:00", null);
        event = createEvent();
        event.patientDataEntry("4985","BG Fasting","numeric","1 hour");
        event.insert();
    }
}
"""

FIG12_UNIT = (FIXTURES / "corpus" / "fig12_unit.pcb").read_text(encoding="utf-8")


def keto_monitor_unit(plan_id, name, with_survey, callback_id="5113"):
    survey = (
        "        event = createEvent();\n"
        '        event.patientDataEntry("5037","Are you Eating enough carbohydrates ?",'
        '"boolean","1 hour");\n'
        "        event.insert();\n"
        if with_survey
        else ""
    )
    return (
        f'unitProjection("{plan_id}","{name}") {{\n'
        "    while (true) {\n"
        '        waitTemporalQuery("count >= 2", "5021", "7 calendardays");\n'
        f"{survey}"
        f'        callback("{callback_id}", "Two positive ketonuria values were found in '
        'the past week");\n'
        "    }\n"
        "}\n"
    )


def bp_sched_unit(plan_id, name, days, time):
    return (
        f'unitProjection("{plan_id}","{name}") {{\n'
        "    while (true) {\n"
        f'        waitPeriodic("{days}", "{time}", "5 minutes");\n'
        "        event = createEvent();\n"
        '        event.patientDataEntry("5177","Systolic BP","numeric","1 hour");\n'
        "        event.insert();\n"
        "        event = createEvent();\n"
        '        event.patientDataEntry("5178","Diastolic BP","numeric","1 hour");\n'
        "        event.insert();\n"
        "    }\n"
        "}\n"
    )


def good_bp_monitor_unit(plan_id, name, abstraction):
    return (
        f'unitProjection("{plan_id}","{name}") {{\n'
        f'    annotateTemporal("or", new String[] {{\n'
        '        "event.getNumber(5177)>=140",\n'
        '        "event.getNumber(5178)>=90"\n'
        f'    }}, "{abstraction}", "date");\n'
        "\n"
        "    while (true) {\n"
        f'        waitTemporalQuery("count == 0", "{abstraction}", "14 calendardays");\n'
        f'        callback("5114", "Blood pressure has been good for two weeks");\n'
        "    }\n"
        "}\n"
    )


DIET_MONITOR_UNIT = """unitProjection("60001","Diet compliance reminder") {
    while (true) {
        waitTemporalQuery("count >= 2", "5055", "7 calendardays");
        patientNotification("5171", "Notify patient about importance of following diet");
    }
}
"""

AF_BP_MONITOR_UNIT = """unitProjection("70010","2 high BP values in past week") {
    annotateTemporal("or", new String[] {
        "event.getNumber(5177)>=140",
        "event.getNumber(5178)>=90"
    }, "bad_BP_af", "date");

    while (true) {
        waitTemporalQuery("count >= 2", "bad_BP_af", "7 calendardays");
        callback("5120", "Two high blood pressure values were found in the past week");
    }
}
"""

# -------------------------------------------------------------- file helpers


def concept(cid, name, value_type="numeric", valid_range=None):
    out = {"id": cid, "name": name, "valueType": value_type}
    if valid_range is not None:
        out["validRange"] = list(valid_range)
    return out


def pattern(pid, aggregator, comparison, threshold, target, window_days, level):
    return {
        "id": pid,
        "aggregator": aggregator,
        "comparison": comparison,
        "threshold": threshold,
        "target": target,
        "windowDays": window_days,
        "level": level,
    }


def plan(pid, name, kind, **kw):
    out = {"id": pid, "name": name, "kind": kind}
    for key in (
        "eligibilityCondition",
        "completeCondition",
        "abortCondition",
        "isProjected",
        "isPersonalized",
        "children",
        "body",
        "actorTag",
    ):
        if key in kw and kw[key] is not None:
            out[key] = kw[key]
    return out


def message(mid, audience, kind, text):
    return {"id": mid, "audience": audience, "kind": kind, "text": text}


def pad_fillers(doc, *, concepts_total, patterns_total, conditions_total,
                periodic_total, monitoring_total, callbacks_total, prefix):
    """Add inert library entries until the document hits the target counts."""
    concepts = doc["concepts"]
    patterns_ = doc["patterns"]
    plans = doc["plans"]
    callbacks = doc["callbacks"]

    while len(concepts) < concepts_total:
        i = len(concepts)
        concepts.append(concept(f"{prefix}c{i:03d}", f"auxiliary concept {i}"))

    while len(patterns_) < patterns_total:
        i = len(patterns_)
        patterns_.append(
            pattern(f"{prefix}p{i:03d}", "count", ">=", 99, concepts[-1]["id"], 30, "mDSS")
        )

    filler_patterns = [p["id"] for p in patterns_ if p["id"].startswith(f"{prefix}p")]

    def next_filler_pattern(idx):
        return filler_patterns[idx % len(filler_patterns)]

    library = plan(f"{prefix}library", "knowledge library", "parallel",
                   eligibilityCondition=filler_patterns[0], children=[])
    plans.append(library)
    root = next(p for p in plans if p["id"] == "root")
    root["children"] = list(root["children"]) + [f"{prefix}library"]
    library_children = library["children"]
    idx = 0

    def conditions_now():
        return sum(
            sum(1 for key in ("eligibilityCondition", "completeCondition", "abortCondition")
                if key in p)
            for p in plans
        )

    def periodic_now():
        return sum(1 for p in plans if p["kind"] == "periodic" and p.get("isProjected"))

    def monitoring_now():
        return sum(1 for p in plans if p["kind"] == "monitoring")

    while periodic_now() < periodic_total:
        pid = f"{prefix}per{idx:03d}"
        plans.append(
            plan(
                pid,
                f"library periodic plan {idx}",
                "periodic",
                isProjected=True,
                eligibilityCondition=next_filler_pattern(idx),
                body=daily_prompt_unit(
                    pid, f"library periodic plan {idx}", concepts[-1]["id"],
                    "auxiliary measurement", "8:00", "numeric",
                ),
            )
        )
        library_children.append(pid)
        idx += 1

    while monitoring_now() < monitoring_total:
        pid = f"{prefix}mon{idx:03d}"
        plans.append(
            plan(
                pid,
                f"library monitoring plan {idx}",
                "monitoring",
                eligibilityCondition=next_filler_pattern(idx),
                completeCondition=next_filler_pattern(idx + 1),
            )
        )
        library_children.append(pid)
        idx += 1

    while len(callbacks) < callbacks_total:
        i = len(callbacks)
        callbacks.append(
            {
                "id": f"{prefix}cb{i:02d}",
                "message": f"auxiliary callback {i}",
                "triggerPattern": next_filler_pattern(i),
            }
        )

    while conditions_now() < conditions_total:
        pid = f"{prefix}seq{idx:03d}"
        plans.append(
            plan(
                pid,
                f"library placeholder {idx}",
                "sequential",
                eligibilityCondition=next_filler_pattern(idx),
            )
        )
        library_children.append(pid)
        idx += 1



def pad_messages(doc, audience, kind, total, prefix, sample):
    have = sum(1 for m in doc["messages"] if m["audience"] == audience and m["kind"] == kind)
    i = 0
    while have < total:
        doc["messages"].append(
            message(f"{prefix}{audience[:2]}{kind[:3]}{i:02d}", audience, kind,
                    f"{sample} ({i})")
        )
        have += 1
        i += 1


# ------------------------------------------------------------- GDM guideline


def build_gdm():
    doc = {
        "guideline": {"id": "19857", "name": "GDM"},
        "concepts": [
            concept("4985", "BG_fasting", valid_range=(40, 400)),
            concept("4986", "BG_breakfast", valid_range=(40, 400)),
            concept("4987", "BG_lunch", valid_range=(40, 400)),
            concept("4988", "BG_dinner", valid_range=(40, 400)),
            concept("5021", "Ketonuria", "boolean"),
            concept("5037", "Eating_enough_carbohydrates", "boolean"),
            concept("5055", "Diet_noncompliance", "boolean"),
            concept("5065", "MET", valid_range=(0, 100)),
            concept("5177", "SBP", valid_range=(60, 250)),
            concept("5178", "DBP", valid_range=(30, 150)),
            concept("5128", "Personal_event_Diario", "string"),
            concept("5138", "Personal_event_Festivo", "string"),
        ],
        "contexts": [
            {"id": "routine", "name": "Routine", "eventConceptId": "5128"},
            {"id": "semiroutine", "name": "Semi-routine", "eventConceptId": "5138"},
        ],
        "patterns": [
            pattern("6001", "count", ">=", 2, "abnormal_BG", 8, "mDSS"),
            pattern("7001", "count", "==", 0, "5021", 14, "BE-DSS"),
            pattern("7002", "count", ">=", 2, "5021", 7, "mDSS"),
            pattern("7003", "count", ">=", 2, "5021", 7, "mDSS"),
            pattern("8001", "count", "==", 0, "bad_BP", 14, "mDSS"),
            pattern("5066", "sum", ">=", 5, "5065", 7, "mDSS"),
        ],
        "callbacks": [
            {
                "id": "5112",
                "message": "2 abnormal values in BG were found in your measurements in the past week",
                "triggerPattern": "6001",
            },
            {
                "id": "5113",
                "message": "Two positive ketonuria values were found in the past week",
                "triggerPattern": "7002",
            },
            {
                "id": "5115",
                "message": "Two positive ketonuria values on the reduced schedule",
                "triggerPattern": "7003",
            },
            {
                "id": "5114",
                "message": "Blood pressure has been good for two weeks",
                "triggerPattern": "8001",
            },
        ],
        "messages": [
            message("5051", "patient", "recommendation",
                    "Ketonuria has been positive; please increase your bedtime "
                    "carbohydrates by 1 unit (10 grams)"),
            message("5052", "careProvider", "recommendation",
                    "Consider start of insulin treatment"),
            message("5162", "patient", "notification",
                    "Enhorabuena, el ejercicio ayuda al buen control. Sigue asi."),
            message("5163", "patient", "notification",
                    "Recuerda que hacer ejercicio es importante para tu bienestar y para "
                    "mantener un buen control de la glucosa."),
            message("5171", "patient", "notification",
                    "Notify patient about importance of following diet"),
            message("5172", "careProvider", "notification",
                    "Please make sure your patient's proteinuria is checked every month"),
            message("5037", "patient", "dataEntry",
                    "Are you Eating enough carbohydrates ?"),
        ],
        "plans": [
            plan("root", "GDM management", "parallel",
                 children=["bg", "keto", "bp", "mets", "diet", "5050"]),
            plan("bg", "Blood glucose management", "parallel",
                 children=["20091", "20092", "20102", "20130", "20061"]),
            plan("20091", "Routine daily BG measurements", "periodic",
                 isProjected=True, isPersonalized=True,
                 completeCondition="6001", body=BG_ROUTINE_UNIT),
            plan("20092", "2 abnormal BG in past week (routine)", "monitoring",
                 isProjected=True, completeCondition="6001",
                 body=abnormal_bg_monitor_unit(
                     "20092", "2 abnormal BG in past week (routine)")),
            plan("20102", "Semi-Routine Daily BG Fasting measurement", "periodic",
                 isProjected=True, isPersonalized=True,
                 eligibilityCondition="6001", body=FIG11_UNIT_20102),
            plan("20130", "2 abnormal measurements in past week", "monitoring",
                 isProjected=True, eligibilityCondition="6001",
                 body=abnormal_bg_monitor_unit(
                     "20130", "2 abnormal measurements in past week")),
            plan("20061", "Monitor call-back abnormal BG", "monitoring",
                 completeCondition="6001"),
            plan("keto", "Ketonuria management", "parallel",
                 children=["30001", "30004", "30011", "30012", "30021", "30002",
                           "30003", "30005"]),
            plan("30001", "Measure ketonuria daily", "periodic",
                 isProjected=True, completeCondition="7001",
                 body=daily_prompt_unit("30001", "Measure ketonuria daily", "5021",
                                        "Ketonuria", "8:00", "boolean")),
            plan("30004", "2 positive ketonuria in week (daily phase)", "monitoring",
                 isProjected=True, completeCondition="7001",
                 body=keto_monitor_unit(
                     "30004", "2 positive ketonuria in week (daily phase)", True)),
            plan("30011", "Measure ketonuria twice a week", "periodic",
                 isProjected=True, eligibilityCondition="7001",
                 completeCondition="7003",
                 body=daily_prompt_unit("30011", "Measure ketonuria twice a week", "5021",
                                        "Ketonuria", "8:00", "boolean", days="2,5")),
            plan("30012", "2 positive ketonuria in week (twice weekly)", "monitoring",
                 isProjected=True, eligibilityCondition="7001", completeCondition="7003",
                 body=keto_monitor_unit(
                     "30012", "2 positive ketonuria in week (twice weekly)", True,
                     callback_id="5115")),
            plan("30021", "Measure ketonuria daily (resumed)", "periodic",
                 isProjected=True, eligibilityCondition="7003",
                 body=daily_prompt_unit("30021", "Measure ketonuria daily (resumed)",
                                        "5021", "Ketonuria", "8:00", "boolean")),
            plan("30002", "Monitor two negative ketonuria weeks", "monitoring",
                 completeCondition="7001"),
            plan("30003", "Monitor call-back positive ketonuria", "monitoring",
                 completeCondition="7002"),
            plan("30005", "Monitor call-back positive ketonuria (reduced)", "monitoring",
                 eligibilityCondition="7001", completeCondition="7003"),
            plan("bp", "Blood pressure management", "parallel",
                 children=["40001", "40002", "40003", "40011"]),
            plan("40001", "Measure BP twice a week", "periodic",
                 isProjected=True, completeCondition="8001",
                 body=bp_sched_unit("40001", "Measure BP twice a week", "2,5", "8:00")),
            plan("40002", "Good BP for two weeks", "monitoring",
                 isProjected=True, completeCondition="8001",
                 body=good_bp_monitor_unit("40002", "Good BP for two weeks", "bad_BP")),
            plan("40003", "Monitor call-back good BP", "monitoring",
                 completeCondition="8001"),
            plan("40011", "Measure BP weekly", "periodic",
                 isProjected=True, isPersonalized=True, eligibilityCondition="8001",
                 body=bp_sched_unit("40011", "Measure BP weekly", "1", "9:00")),
            plan("mets", "Exercise management", "parallel", children=["20010"]),
            plan("20010", "Weekly METS", "periodic", isProjected=True, body=FIG12_UNIT),
            plan("diet", "Diet compliance", "parallel", children=["60001"]),
            plan("60001", "Diet compliance reminder", "monitoring",
                 isProjected=True, body=DIET_MONITOR_UNIT),
            plan("5050", "Carbohydrate adjustment", "parallel",
                 eligibilityCondition="7002", children=["5051", "5052"]),
            plan("5051", "Increase carbohydrates at dinner/bedtime", "action",
                 actorTag="patient"),
            plan("5052", "Consider start of insulin treatment", "action",
                 actorTag="careProvider"),
        ],
    }
    pad_messages(doc, "patient", "notification", 10, "g",
                 "Your weekly summary is ready; keep up the good monitoring")
    pad_messages(doc, "careProvider", "notification", 2, "g",
                 "Patient monitoring summary available")
    pad_messages(doc, "careProvider", "recommendation", 7, "g",
                 "Review therapy adjustment for the patient")
    pad_fillers(doc, concepts_total=300, patterns_total=124, conditions_total=69,
                periodic_total=22, monitoring_total=17, callbacks_total=16, prefix="g")
    return doc


# -------------------------------------------------------------- AF guideline


def build_af():
    doc = {
        "guideline": {"id": "21001", "name": "AF"},
        "concepts": [
            concept("9648", "medication_intake", "boolean"),
            concept("9001", "HR_sensor_session", "boolean"),
            concept("5177", "SBP", valid_range=(60, 250)),
            concept("5178", "DBP", valid_range=(30, 150)),
            concept("9002", "Weight", valid_range=(30, 300)),
            concept("9003", "INR", valid_range=(0, 10)),
            concept("9128", "Personal_event_at_work", "string"),
            concept("9129", "Personal_event_holiday", "string"),
            concept("9130", "Personal_event_24h_monitoring", "string"),
            concept("9131", "Personal_event_exercise_program", "string"),
        ],
        "contexts": [
            {"id": "routine", "name": "Routine", "eventConceptId": "9128"},
            {"id": "semiroutine", "name": "Semi-routine", "eventConceptId": "9129"},
            {"id": "monitoring24h", "name": "24h monitoring", "eventConceptId": "9130"},
            {"id": "activityplus", "name": "Increased physical activity",
             "eventConceptId": "9131"},
        ],
        "patterns": [
            pattern("9201", "count", ">=", 2, "bad_BP_af", 7, "mDSS"),
            pattern("9202", "count", ">=", 3, "9001", 7, "mDSS"),
        ],
        "callbacks": [
            {
                "id": "5120",
                "message": "Two high blood pressure values were found in the past week",
                "triggerPattern": "9201",
            },
            {
                "id": "5121",
                "message": "Repeated missed sensor sessions",
                "triggerPattern": "9202",
            },
        ],
        "messages": [
            message("9place", "patient", "recommendation", "Start HR sensor for 30 minutes"),
            message("9notif", "patient", "notification",
                    "You wore the sensor for less than 6 hours. Please remember that the "
                    "recommended monitoring time is 24 hours"),
            message("9cg", "careProvider", "notification",
                    "Patient is not compliant to 'pill in the pocket' procedure"),
        ],
        "plans": [
            plan("root", "AF management", "parallel",
                 children=["70001", "70002", "70003", "70004", "70010", "70011", "70012"]),
            plan("70001", "Daily HR sensor session", "periodic", isProjected=True,
                 isPersonalized=True,
                 body=daily_prompt_unit("70001", "Daily HR sensor session", "9001",
                                        "Start HR sensor for 30 minutes", "10:00",
                                        "boolean", validity="2 hours")),
            plan("70002", "Measure BP twice a week", "periodic", isProjected=True,
                 completeCondition="9201",
                 body=bp_sched_unit("70002", "Measure BP twice a week", "2,5", "9:00")),
            plan("70003", "Weigh weekly", "periodic", isProjected=True,
                 body=daily_prompt_unit("70003", "Weigh weekly", "9002", "Body weight",
                                        "8:00", "numeric", days="2")),
            plan("70004", "INR check weekly", "periodic", isProjected=True,
                 body=daily_prompt_unit("70004", "INR check weekly", "9003", "INR value",
                                        "8:30", "numeric", days="3")),
            plan("70010", "2 high BP values in past week", "monitoring", isProjected=True,
                 completeCondition="9201", body=AF_BP_MONITOR_UNIT),
            plan("70011", "Monitor call-back high BP", "monitoring",
                 completeCondition="9201"),
            plan("70012", "Measure BP daily (intensified)", "periodic", isProjected=True,
                 eligibilityCondition="9201",
                 body=bp_sched_unit("70012", "Measure BP daily (intensified)",
                                    "1,2,3,4,5,6,7", "9:00")),
        ],
    }
    pad_messages(doc, "patient", "notification", 7, "a",
                 "Sensor session reminder: please keep the monitoring schedule")
    pad_messages(doc, "careProvider", "notification", 20, "a",
                 "Monitoring report available for your patient")
    pad_messages(doc, "patient", "recommendation", 5, "a",
                 "Please confirm today's therapy step")
    pad_messages(doc, "careProvider", "recommendation", 18, "a",
                 "Review anticoagulation therapy for the patient")
    pad_fillers(doc, concepts_total=100, patterns_total=71, conditions_total=20,
                periodic_total=18, monitoring_total=2, callbacks_total=2, prefix="a")
    return doc


# ------------------------------------------------------- ketonuria miniature


def build_keto_mini():
    return {
        "guideline": {"id": "31000", "name": "Ketonuria management"},
        "concepts": [concept("5021", "Ketonuria", "boolean")],
        "contexts": [{"id": "routine", "name": "Routine"}],
        "patterns": [
            pattern("7001", "count", "==", 0, "5021", 14, "BE-DSS"),
            pattern("7002", "count", ">=", 2, "5021", 7, "mDSS"),
        ],
        "callbacks": [
            {
                "id": "5113",
                "message": "Two positive ketonuria values were found in the past week",
                "triggerPattern": "7002",
            }
        ],
        "messages": [],
        "plans": [
            plan("root", "Ketonuria management", "parallel",
                 children=["30001", "30011", "30012", "30021", "30002", "30003"]),
            plan("30001", "Measure ketonuria daily", "periodic",
                 isProjected=True, completeCondition="7001",
                 body=daily_prompt_unit("30001", "Measure ketonuria daily", "5021",
                                        "Ketonuria", "8:00", "boolean")),
            plan("30011", "Measure ketonuria twice a week", "periodic",
                 isProjected=True, eligibilityCondition="7001", completeCondition="7002",
                 body=daily_prompt_unit("30011", "Measure ketonuria twice a week", "5021",
                                        "Ketonuria", "8:00", "boolean", days="2,5")),
            plan("30012", "2 positive ketonuria in week", "monitoring",
                 isProjected=True, eligibilityCondition="7001", completeCondition="7002",
                 body=keto_monitor_unit("30012", "2 positive ketonuria in week", False)),
            plan("30021", "Measure ketonuria daily (resumed)", "periodic",
                 isProjected=True, eligibilityCondition="7002",
                 body=daily_prompt_unit("30021", "Measure ketonuria daily (resumed)",
                                        "5021", "Ketonuria", "8:00", "boolean")),
            plan("30002", "Monitor two negative ketonuria weeks", "monitoring",
                 completeCondition="7001"),
            plan("30003", "Monitor call-back positive ketonuria", "monitoring",
                 completeCondition="7002"),
        ],
    }


# ------------------------------------------------------------- BG miniature


def build_bg_mini():
    return {
        "guideline": {"id": "19857", "name": "GDM"},
        "concepts": [
            concept("4985", "BG_fasting", valid_range=(40, 400)),
            concept("4986", "BG_breakfast", valid_range=(40, 400)),
            concept("4987", "BG_lunch", valid_range=(40, 400)),
            concept("4988", "BG_dinner", valid_range=(40, 400)),
            concept("5128", "Personal_event_Diario", "string"),
            concept("5138", "Personal_event_Festivo", "string"),
        ],
        "contexts": [
            {"id": "routine", "name": "Routine", "eventConceptId": "5128"},
            {"id": "semiroutine", "name": "Semi-routine", "eventConceptId": "5138"},
        ],
        "patterns": [pattern("6001", "count", ">=", 2, "abnormal_BG", 8, "mDSS")],
        "callbacks": [
            {
                "id": "5112",
                "message": "2 abnormal values in BG were found in your measurements in "
                "the past week",
                "triggerPattern": "6001",
            }
        ],
        "messages": [],
        "plans": [
            plan("root", "BG management", "parallel",
                 children=["20091", "20092", "20102", "20130", "20061"]),
            plan("20091", "Routine daily BG measurements", "periodic",
                 isProjected=True, isPersonalized=True, completeCondition="6001",
                 body=BG_ROUTINE_UNIT),
            plan("20092", "2 abnormal BG in past week (routine)", "monitoring",
                 isProjected=True, completeCondition="6001",
                 body=abnormal_bg_monitor_unit(
                     "20092", "2 abnormal BG in past week (routine)")),
            plan("20102", "Semi-Routine Daily BG Fasting measurement", "periodic",
                 isProjected=True, isPersonalized=True, eligibilityCondition="6001",
                 body=FIG11_UNIT_20102),
            plan("20130", "2 abnormal measurements in past week", "monitoring",
                 isProjected=True, eligibilityCondition="6001",
                 body=abnormal_bg_monitor_unit(
                     "20130", "2 abnormal measurements in past week")),
            plan("20061", "Monitor call-back abnormal BG", "monitoring",
                 completeCondition="6001"),
        ],
    }


# ------------------------------------------------------------------ profiles


def molly_profile():
    return {
        "patientId": "molly",
        "currentContext": "routine",
        "reminderLeadMinutes": -5,
        "dircs": [
            {"personalEvent": "Diario", "inducedContext": "routine",
             "startOffsetMinutes": 0, "endOffsetMinutes": None},
            {"personalEvent": "Festivo", "inducedContext": "semiroutine",
             "startOffsetMinutes": 0, "endOffsetMinutes": None},
        ],
        "preferences": [
            {"context": "routine", "targetConceptId": "4985", "reminderTime": "9:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "routine", "targetConceptId": "4986", "reminderTime": "10:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "routine", "targetConceptId": "4987", "reminderTime": "15:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "routine", "targetConceptId": "4988", "reminderTime": "22:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "semiroutine", "targetConceptId": "4985", "reminderTime": "10:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "semiroutine", "targetConceptId": "4986", "reminderTime": "11:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "semiroutine", "targetConceptId": "4987", "reminderTime": "15:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "semiroutine", "targetConceptId": "4988", "reminderTime": "22:00",
             "daysOfWeek": [1, 2, 3, 4, 5, 6, 7]},
            {"context": "routine", "targetConceptId": "5177", "reminderTime": "8:00",
             "daysOfWeek": [2]},
        ],
        "prescriptions": [],
        "thresholds": {},
    }


def plain_profile(patient_id):
    return {
        "patientId": patient_id,
        "currentContext": "routine",
        "reminderLeadMinutes": -5,
        "dircs": [],
        "preferences": [],
        "prescriptions": [],
        "thresholds": {},
    }


def carlo_profile():
    profile = plain_profile("carlo")
    profile["dircs"] = [
        {"personalEvent": "at work", "inducedContext": "routine",
         "startOffsetMinutes": 0, "endOffsetMinutes": None},
        {"personalEvent": "holiday", "inducedContext": "semiroutine",
         "startOffsetMinutes": 0, "endOffsetMinutes": None},
    ]
    profile["prescriptions"] = [
        {
            "medication": "atorvastatina",
            "dosePerTime": {"20:00": "80.0 mg"},
            "reminderLead": "30.0 minutes",
            "startDate": "2014-05-10",
            "endDate": "2014-07-09",
        }
    ]
    return profile


# ------------------------------------------------------------------ scenarios

HEADER = [
    "week", "day in week", "day of treatment", "valid time", "GESHER ID", "VMR Class",
    "conceptName", "Valid Start Time", "Valid End Time", "value", "Steps",
    "GENERATED BY component",
]

START = date(2014, 3, 2)  # a Sunday; day-of-week number 1


def row(day: date, time: str, concept_id: str, concept_name: str, value, step="",
        generated_by="SmartphoneGUI", vmr="0"):
    treatment_day = (day - START).days + 1
    week = 27 + (treatment_day - 1) // 7
    day_in_week = (treatment_day - 1) % 7 + 1
    stamp = f"{day.day}/{day.month}/{day.year} {time}:00"
    return [
        week, day_in_week, treatment_day, time, concept_id, vmr, concept_name,
        stamp, stamp, value, step, generated_by,
    ]


def write_csv(path: Path, rows):
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)


def keto_scenario():
    rows = []
    # 14 consecutive negative daily measurements, answered at the 8:00 prompt
    for offset in range(14):
        day = START + timedelta(days=offset)
        step = "1" if offset == 0 else ""
        rows.append(row(day, "8:00", "5021", "Ketouria", "--", step))
    switch_day = START + timedelta(days=13)
    rows.append(row(switch_day, "8:05", "30011", "projection: start twice weekly unit",
                    "TRUE", "1a", "BE-DSS"))
    # twice-weekly phase: Monday 17/3 and Thursday 20/3 both positive
    monday = date(2014, 3, 17)
    thursday = date(2014, 3, 20)
    rows.append(row(monday, "8:00", "5021", "Ketouria", "++", "2"))
    rows.append(row(thursday, "8:00", "5021", "Ketouria", "++", ""))
    rows.append(row(thursday, "8:05", "5113", "Call back positive ketonuria",
                    "TRUE", "2a", "mDSS"))
    rows.append(row(thursday, "8:05", "30021", "projection: start daily unit again",
                    "TRUE", "2b", "BE-DSS"))
    # back on the daily schedule
    for offset in (19, 20):
        day = START + timedelta(days=offset)
        rows.append(row(day, "8:00", "5021", "Ketouria", "--", ""))
    return rows


def molly_scenario():
    rows = []
    end = START + timedelta(days=55)  # weeks 27..34 inclusive

    bg_switch = date(2014, 4, 16)  # two abnormal breakfast values 16/4 and 17/4
    keto_switch = date(2014, 3, 22)  # negative-two-weeks reached (positives 6/3, 8/3)
    bp_switch = date(2014, 3, 15)  # good-BP pattern covers its window
    festivo_on = date(2014, 4, 2)
    festivo_off = date(2014, 4, 9)

    def bg_times(day):
        if festivo_on <= day < festivo_off:
            return {"4985": "10:00", "4986": "11:00", "4987": "15:00", "4988": "22:00"}
        return {"4985": "9:00", "4986": "10:00", "4987": "15:00", "4988": "22:00"}

    day = START
    while day <= end:
        weekday = (day - START).days % 7 + 1
        times = bg_times(day)
        after_bg_switch = day > date(2014, 4, 17)
        if not after_bg_switch:
            bg_value = {"4985": 85, "4986": 120, "4987": 105, "4988": 108}
            if day in (date(2014, 4, 16), date(2014, 4, 17)):
                bg_value = dict(bg_value, **{"4986": 160})
            for concept_id in ("4985", "4986", "4987", "4988"):
                rows.append(row(day, times[concept_id],
                                concept_id, f"BG_{concept_id}", bg_value[concept_id]))
        else:
            rows.append(row(day, times["4985"], "4985", "BG_fasting", 85))

        if day <= keto_switch:
            keto = "++" if day in (date(2014, 3, 6), date(2014, 3, 8)) else "--"
            rows.append(row(day, "8:00", "5021", "Ketouria", keto))
        elif weekday in (2, 5):
            rows.append(row(day, "8:00", "5021", "Ketouria", "--"))

        if day < bp_switch and weekday in (2, 5):
            rows.append(row(day, "8:00", "5177", "SBP", 120))
            rows.append(row(day, "8:00", "5178", "DBP", 70))
        elif day >= bp_switch and weekday == 2:
            rows.append(row(day, "8:00", "5177", "SBP", 118))
            rows.append(row(day, "8:00", "5178", "DBP", 72))

        rows.append(row(day, "16:00", "5065", "MET", 1 if weekday in (1, 4) else 0))
        day += timedelta(days=1)

    # diet non-compliance twice inside one week -> local diet notification
    rows.append(row(date(2014, 3, 7), "19:30", "5055", "Nutrition management", "++"))
    rows.append(row(date(2014, 3, 8), "12:30", "5055", "Nutrition management", "++", "5"))
    rows.append(row(date(2014, 3, 8), "12:32", "5171",
                    "Notify patient about importance of following diet", "TRUE", "5a",
                    "mDSS"))

    # the second positive ketonuria triggers the carbohydrate flow
    rows.append(row(date(2014, 3, 8), "8:03", "5037",
                    "patient data entry : Are you Eating enough carbohydrates ?", "yes",
                    "3", "SmartphoneGUI"))
    rows.append(row(date(2014, 3, 8), "8:04", "5113",
                    "Call back eating enought carbohydrates", "TRUE", "3b", "mDSS"))
    rows.append(row(date(2014, 3, 8), "8:05", "5051",
                    "Increase carbohydrates at dinner/bedtime", "accept", "4",
                    "SmartphoneGUI"))
    rows.append(row(date(2014, 3, 8), "8:06", "5052",
                    "Consider start of insulin treatment", "TRUE", "4b", "BE-DSS"))
    rows.append(row(date(2014, 3, 8), "14:00", "5052",
                    "Consider start of insulin treatment", "decline", "", "careGiver"))

    # context switches
    rows.append(row(festivo_on, "12:00", "5138", "Personal event", "Festivo", "6"))
    rows.append(row(festivo_on, "12:05", "20091", "projection: resent personalized units",
                    "TRUE", "6a", "BE-DSS"))
    rows.append(row(festivo_off, "12:00", "5128", "Personal event", "Diario", "7"))

    # assertions over the scripted switches
    rows.append(row(bp_switch, "8:05", "40011", "projection: BP weekly on Monday",
                    "TRUE", "8a", "BE-DSS"))
    rows.append(row(keto_switch, "8:05", "30011", "projection: ketonuria twice weekly",
                    "TRUE", "9a", "BE-DSS"))
    rows.append(row(date(2014, 4, 17), "10:05", "5112", "Call back abnormal BG",
                    "TRUE", "10a", "mDSS"))
    rows.append(row(date(2014, 4, 17), "10:05", "20102", "projection: semi-routine BG",
                    "TRUE", "10b", "BE-DSS"))

    # EMR laboratory values pad the record to the published transaction volume
    injected = sum(1 for r in rows if not str(r[10]).strip() or str(r[10]).isdigit())
    needed = 330 - injected
    assert needed >= 0, f"scenario already has {injected} injected rows"
    lab_day = START
    for i in range(needed):
        rows.append(row(lab_day + timedelta(days=i % 50), "6:00", "gc000",
                        "EMR laboratory result", 7 + (i % 3), "", "EMR"))

    rows.sort(key=lambda r: (datetime.strptime(r[7], "%d/%m/%Y %H:%M:%S"), str(r[10])))
    return rows


def carlo_scenario():
    rows = []
    start = date(2014, 5, 10)
    for offset in range(14):
        day = start + timedelta(days=offset)
        crashed = offset == 7
        if not crashed:
            rows.append(row(day, "10:00", "9001", "HR sensor session", "++"))
            rows.append(row(day, "20:00", "9648", "Medication intake", "++"))
        weekday = (day - date(2014, 5, 4)).days % 7 + 1  # 4/5/2014 is a Sunday
        if weekday in (2, 5):
            rows.append(row(day, "9:00", "5177", "SBP", 125))
            rows.append(row(day, "9:00", "5178", "DBP", 80))
    rows.sort(key=lambda r: (datetime.strptime(r[7], "%d/%m/%Y %H:%M:%S"), str(r[10])))
    return rows


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    guidelines = {
        "gdm_guideline.json": build_gdm(),
        "af_guideline.json": build_af(),
        "keto_mini_guideline.json": build_keto_mini(),
        "bg_mini_guideline.json": build_bg_mini(),
    }
    for name, doc in guidelines.items():
        text = json.dumps(doc, indent=1)
        (FIXTURES / name).write_text(text + "\n", encoding="utf-8")
        gl = load_guideline(text)
        stats = kb_statistics(gl)
        print(f"{name}: {stats.to_json()}")

    for name, profile in (
        ("molly_profile.json", molly_profile()),
        ("carlo_profile.json", carlo_profile()),
        ("keto_profile.json", plain_profile("kp01")),
    ):
        (FIXTURES / name).write_text(json.dumps(profile, indent=1) + "\n", encoding="utf-8")

    write_csv(FIXTURES / "keto_scenario.csv", keto_scenario())
    write_csv(FIXTURES / "molly_scenario.csv", molly_scenario())
    write_csv(FIXTURES / "carlo_scenario.csv", carlo_scenario())

    (FIXTURES / "drop_first_projection_faults.json").write_text(
        json.dumps({"rules": [{"kind": "projection", "attempt": 1, "action": "drop"}]},
                   indent=1) + "\n",
        encoding="utf-8",
    )
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
