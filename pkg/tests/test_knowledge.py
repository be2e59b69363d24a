import json
from pathlib import Path

import pytest

from pcb.knowledge import (
    DanglingReferenceError,
    DuplicateIdError,
    GuidelineError,
    KbStats,
    distribution_profile,
    kb_statistics,
    load_guideline,
    suggest_placement,
)

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name):
    return load_guideline((FIXTURES / name).read_text(encoding="utf-8"))


MINIMAL = {
    "guideline": {"id": "1", "name": "tiny"},
    "concepts": [],
    "contexts": [],
    "plans": [{"id": "root", "name": "root", "kind": "parallel"}],
    "patterns": [],
    "callbacks": [],
    "messages": [],
}


def as_text(doc):
    return json.dumps(doc)


# -------------------------------------------------------------------- loading


def test_gdm_fixture_matches_published_projection_counts():
    stats = kb_statistics(load_fixture("gdm_guideline.json"))
    assert stats.periodic_projections == 22
    assert stats.monitoring_projections == 17
    assert stats.callbacks == 16
    assert stats.raw_concepts == 300
    assert stats.data_patterns == 124
    assert stats.conditions == 69
    assert stats.customized_contexts == 2
    assert stats.notifications_to_patients == 10
    assert stats.notifications_to_care_providers == 2
    assert stats.recommendations_to_patients == 1
    assert stats.recommendations_to_care_providers == 7


def test_af_fixture_matches_published_projection_counts():
    stats = kb_statistics(load_fixture("af_guideline.json"))
    assert stats.periodic_projections == 18
    assert stats.monitoring_projections == 2
    assert stats.callbacks == 2
    assert stats.raw_concepts == 100
    assert stats.data_patterns == 71
    assert stats.conditions == 20
    assert stats.customized_contexts == 4


def test_loading_is_a_pure_fold():
    text = (FIXTURES / "gdm_guideline.json").read_text(encoding="utf-8")
    assert kb_statistics(load_guideline(text)) == kb_statistics(load_guideline(text))


def test_minimal_guideline_all_zero_stats():
    gl = load_guideline(as_text(MINIMAL))
    assert gl.root_id == "root"
    assert kb_statistics(gl) == KbStats()


def test_every_projected_body_parsed_at_load():
    gl = load_fixture("gdm_guideline.json")
    projected = [p.plan_id for p in gl.plans.values() if p.is_projected]
    assert projected
    assert set(projected) <= set(gl.parsed_bodies)
    assert "abnormal_BG" in gl.abstractions


def test_parse_error_carries_line_and_column():
    with pytest.raises(GuidelineError, match=r"line \d+, column \d+"):
        load_guideline('{"guideline": }')


def test_dangling_callback_reference():
    doc = dict(MINIMAL)
    doc["callbacks"] = [{"id": "9999", "message": "x", "triggerPattern": "nope"}]
    with pytest.raises(DanglingReferenceError, match="9999"):
        load_guideline(as_text(doc))


def test_body_referencing_undefined_callback():
    doc = json.loads(as_text(MINIMAL))
    doc["concepts"] = [{"id": "1", "name": "c", "valueType": "numeric"}]
    body = (
        'unitProjection("u1","u") {\n'
        "    while (true) {\n"
        '        waitTemporalQuery("count >= 1", "1", "7 days");\n'
        '        callback("9999", "missing");\n'
        "    }\n"
        "}\n"
    )
    doc["plans"] = [
        {"id": "root", "name": "root", "kind": "parallel", "children": ["u1"]},
        {"id": "u1", "name": "u", "kind": "periodic", "isProjected": True, "body": body},
    ]
    with pytest.raises(DanglingReferenceError, match="9999"):
        load_guideline(as_text(doc))


def test_duplicate_plan_id_rejected():
    doc = json.loads(as_text(MINIMAL))
    doc["plans"] = [
        {"id": "root", "name": "root", "kind": "parallel", "children": ["a"]},
        {"id": "a", "name": "a", "kind": "sequential"},
        {"id": "a", "name": "again", "kind": "sequential"},
    ]
    with pytest.raises(DuplicateIdError):
        load_guideline(as_text(doc))


def test_plan_under_two_parents_rejected():
    doc = json.loads(as_text(MINIMAL))
    doc["plans"] = [
        {"id": "root", "name": "root", "kind": "parallel", "children": ["a", "b"]},
        {"id": "a", "name": "a", "kind": "parallel", "children": ["c"]},
        {"id": "b", "name": "b", "kind": "parallel", "children": ["c"]},
        {"id": "c", "name": "c", "kind": "sequential"},
    ]
    with pytest.raises(GuidelineError, match="two parents"):
        load_guideline(as_text(doc))


def test_projected_plan_requires_body():
    doc = json.loads(as_text(MINIMAL))
    doc["plans"] = [
        {"id": "root", "name": "root", "kind": "parallel", "children": ["a"]},
        {"id": "a", "name": "a", "kind": "periodic", "isProjected": True},
    ]
    with pytest.raises(GuidelineError, match="no body"):
        load_guideline(as_text(doc))


# ----------------------------------------------------------------- profiling


def test_af_profile_is_mostly_local():
    stats = kb_statistics(load_fixture("af_guideline.json"))
    assert distribution_profile(stats) == "mostlyLocal"


def test_gdm_profile_is_mostly_central():
    stats = kb_statistics(load_fixture("gdm_guideline.json"))
    assert distribution_profile(stats) == "mostlyCentral"


def test_degenerate_profile_is_balanced():
    assert distribution_profile(KbStats()) == "balanced"


def test_profile_thresholds():
    assert distribution_profile(KbStats(periodic_projections=18, callbacks=2)) == "mostlyLocal"
    assert distribution_profile(KbStats(periodic_projections=22, callbacks=16)) == "mostlyCentral"
    assert distribution_profile(KbStats(periodic_projections=10, callbacks=4)) == "balanced"


# ------------------------------------------------------------------ placement


def local_traits(**overrides):
    traits = {
        "horizon": "shortTerm",
        "needsPhr": False,
        "populationData": False,
        "dataSources": "localOnly",
        "computation": "shortPattern",
    }
    traits.update(overrides)
    return traits


def test_monitor_todays_bg_stays_local():
    level, fired = suggest_placement(local_traits())
    assert level == "mDSS"
    assert fired == []


def test_previous_pregnancy_history_goes_central():
    level, fired = suggest_placement(local_traits(needsPhr=True, horizon="longTerm"))
    assert level == "BE-DSS"
    assert "PHR access" in fired
    assert "Horizon of future recommendations" in fired


def test_rule_extremes():
    all_central = {
        "horizon": "longTerm",
        "needsPhr": True,
        "populationData": True,
        "dataSources": "mixed",
        "computation": "longitudinalPattern",
    }
    level, fired = suggest_placement(all_central)
    assert level == "BE-DSS"
    assert len(fired) == 5
    level, fired = suggest_placement(local_traits())
    assert level == "mDSS" and not fired


def test_central_iff_rules_fired():
    import itertools

    options = {
        "horizon": ["shortTerm", "longTerm"],
        "needsPhr": [False, True],
        "populationData": [False, True],
        "dataSources": ["localOnly", "mixed"],
        "computation": ["shortPattern", "longitudinalPattern"],
    }
    keys = list(options)
    for combo in itertools.product(*(options[k] for k in keys)):
        traits = dict(zip(keys, combo))
        level, fired = suggest_placement(traits)
        assert (level == "BE-DSS") == bool(fired)
