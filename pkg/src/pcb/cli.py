"""Command-line entry point.

pcb run      replay a scenario against a guideline and patient profile
pcb stats    knowledge-base statistics and distribution profile
pcb metrics  recompute session metrics from a saved transcript
pcb console  live session a human can drive from the browser console

Exit codes: 0 pass, 1 assertion failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timedelta
from pathlib import Path

from .bedss import PatientProfile
from .channel import load_fault_plan
from .consoleserve import ConsoleBridge
from .harness import POLICY_FLAGS, Session, render_report, run_scenario
from .knowledge import GuidelineError, distribution_profile, kb_statistics, load_guideline
from .metrics import compute_metrics
from .phr import InteractionRecord
from .scenario import ScenarioError

_TS = "%Y-%m-%d %H:%M:%S"


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _parse_when(text: str) -> datetime:
    for fmt in (_TS, "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M",
                "%Y-%m-%d"):
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise ValueError(f"cannot parse time {text!r}")


def cmd_run(args) -> int:
    fault_rules = load_fault_plan(_read(args.faults)) if args.faults else []
    crash_plan = []
    for crash_at, restart_at in zip(args.crash_at or (), args.restart_at or ()):
        crash_plan.append((_parse_when(crash_at), _parse_when(restart_at)))
    result = run_scenario(
        _read(args.guideline),
        _read(args.scenario),
        json.loads(_read(args.patient)),
        fault_rules=fault_rules,
        policy=POLICY_FLAGS[args.policy],
        seed=args.seed,
        crash_plan=crash_plan,
        serve_port=args.serve,
    )
    if args.transcript:
        Path(args.transcript).write_text(result.transcript_lines(), encoding="utf-8")
    print(render_report(result, args.report))
    return result.exit_code


def cmd_stats(args) -> int:
    gl = load_guideline(_read(args.guideline))
    stats = kb_statistics(gl)
    doc = dict(stats.to_json(), distributionProfile=distribution_profile(stats))
    if args.report == "json":
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        for key, value in doc.items():
            print(f"{key}: {value}")
    return 0


def cmd_metrics(args) -> int:
    records = []
    stamps = []
    for line in Path(args.log).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if "t" in entry:
            stamps.append(datetime.strptime(entry["t"], _TS))
        if entry.get("kind") == "interaction":
            records.append(InteractionRecord(
                datetime.strptime(entry["t"], _TS),
                entry["type"], entry["subtype"],
                entry.get("technicalOnly", False), entry.get("detail", ""),
            ))
    days = 0
    if stamps:
        days = (max(stamps).date() - min(stamps).date()).days + 1
    metrics = compute_metrics(records, days)
    print(json.dumps(metrics.to_json(), indent=1, sort_keys=True))
    return 0


def cmd_console(args) -> int:
    guideline = load_guideline(_read(args.guideline))
    profile = PatientProfile.from_json(json.loads(_read(args.patient)))
    start = _parse_when(args.start)
    session = Session(guideline, profile, start, seed=args.seed)
    bridge = ConsoleBridge(session, args.port, allow_clock=True)
    session.start()
    # let enrollment and the first projection settle before clients attach
    session.loop.run_until(start + timedelta(seconds=10))
    print(f"console session for {profile.patient_id} on ws://127.0.0.1:{bridge.ws.port}"
          f"/session/{profile.patient_id}", flush=True)
    bridge.serve_forever()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pcb")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a scenario")
    run.add_argument("--guideline", required=True)
    run.add_argument("--scenario", required=True)
    run.add_argument("--patient", required=True)
    run.add_argument("--policy", choices=sorted(POLICY_FLAGS), default="passing-of-control")
    run.add_argument("--faults")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--report", choices=("json", "text"), default="text")
    run.add_argument("--serve", type=int, default=None, metavar="PORT")
    run.add_argument("--transcript", help="write the transcript JSONL here")
    run.add_argument("--crash-at", action="append")
    run.add_argument("--restart-at", action="append")
    run.set_defaults(fn=cmd_run)

    stats = sub.add_parser("stats", help="knowledge-base statistics")
    stats.add_argument("--guideline", required=True)
    stats.add_argument("--report", choices=("json", "text"), default="text")
    stats.set_defaults(fn=cmd_stats)

    metrics = sub.add_parser("metrics", help="metrics from a transcript")
    metrics.add_argument("--log", required=True)
    metrics.set_defaults(fn=cmd_metrics)

    console = sub.add_parser("console", help="serve a live patient session")
    console.add_argument("--port", type=int, required=True)
    console.add_argument("--guideline", required=True)
    console.add_argument("--patient", required=True)
    console.add_argument("--start", default="2014-03-02")
    console.add_argument("--seed", type=int, default=0)
    console.set_defaults(fn=cmd_console)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (GuidelineError, ScenarioError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
