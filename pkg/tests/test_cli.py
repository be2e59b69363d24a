import json
from pathlib import Path

from pcb.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def test_run_exit_zero_and_transcript_written(tmp_path, capsys):
    out = tmp_path / "transcript.jsonl"
    code = main([
        "run",
        "--guideline", str(FIXTURES / "keto_mini_guideline.json"),
        "--scenario", str(FIXTURES / "keto_scenario.csv"),
        "--patient", str(FIXTURES / "keto_profile.json"),
        "--transcript", str(out),
        "--report", "json",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["metrics"]["daysInSystem"] == 21
    assert out.exists() and out.read_text().startswith("{")


def test_metrics_recomputed_from_transcript(tmp_path, capsys):
    out = tmp_path / "transcript.jsonl"
    assert main([
        "run",
        "--guideline", str(FIXTURES / "keto_mini_guideline.json"),
        "--scenario", str(FIXTURES / "keto_scenario.csv"),
        "--patient", str(FIXTURES / "keto_profile.json"),
        "--transcript", str(out),
    ]) == 0
    capsys.readouterr()
    assert main(["metrics", "--log", str(out)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["functionalNotifications"] == 2
    assert doc["interactionHistogram"]["callbackTriggered"] == 1


def test_stats_json(capsys):
    assert main(["stats", "--guideline", str(FIXTURES / "gdm_guideline.json"),
                 "--report", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["periodicProjections"] == 22
    assert doc["distributionProfile"] == "mostlyCentral"


def test_missing_file_is_input_error(capsys):
    assert main(["stats", "--guideline", "no-such-file.json"]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_guideline_is_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert main(["stats", "--guideline", str(bad)]) == 2


def test_failed_assertion_sets_exit_one(tmp_path, capsys):
    scenario = (FIXTURES / "keto_scenario.csv").read_text().splitlines()
    scenario.append(
        "29,7,21,9:00,5113,0,never fires here,22/3/2014 9:00:00,22/3/2014 9:00:00,"
        "TRUE,9z,mDSS"
    )
    path = tmp_path / "failing.csv"
    path.write_text("\n".join(scenario) + "\n", encoding="utf-8")
    code = main([
        "run",
        "--guideline", str(FIXTURES / "keto_mini_guideline.json"),
        "--scenario", str(path),
        "--patient", str(FIXTURES / "keto_profile.json"),
    ])
    assert code == 1
    assert "FAIL step 9z" in capsys.readouterr().out


def test_crash_flags_trigger_recovery(tmp_path, capsys):
    code = main([
        "run",
        "--guideline", str(FIXTURES / "keto_mini_guideline.json"),
        "--scenario", str(FIXTURES / "keto_scenario.csv"),
        "--patient", str(FIXTURES / "keto_profile.json"),
        "--crash-at", "2014-03-05 12:00",
        "--restart-at", "2014-03-05 14:00",
        "--report", "json",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["metrics"]["technicalNotifications"] \
        == report["metrics"]["functionalNotifications"] + 1
