#!/usr/bin/env python3
"""Sweep fault plans over the ketonuria scenario and report convergence.

For each plan: did every projection apply exactly once, and does the device
unit set match the central ledger at the end of the run?
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pcb.channel import FaultRule  # noqa: E402
from pcb.harness import run_scenario  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

PLANS = {
    "no faults": [],
    "drop first transmission of every projection":
        [FaultRule(action="drop", kind="projection", attempt=1)],
    "drop first two transmissions of every projection":
        [FaultRule(action="drop", kind="projection", attempt=1),
         FaultRule(action="drop", kind="projection", attempt=2)],
    "duplicate every projection": [FaultRule(action="duplicate", kind="projection")],
    "drop every first ack": [FaultRule(action="drop", kind="ack", attempt=1)],
    "delay projections by five minutes":
        [FaultRule(action="delay", kind="projection", delay_seconds=300)],
}


def main() -> int:
    guideline = (FIXTURES / "keto_mini_guideline.json").read_text(encoding="utf-8")
    scenario = (FIXTURES / "keto_scenario.csv").read_text(encoding="utf-8")
    profile = json.loads((FIXTURES / "keto_profile.json").read_text(encoding="utf-8"))
    failures = 0
    for title, rules in PLANS.items():
        result = run_scenario(guideline, scenario, profile, fault_rules=rules)
        applied: dict[str, int] = {}
        for entry in result.transcript:
            if entry["kind"] == "projectionApplied":
                applied[entry["projectionId"]] = applied.get(entry["projectionId"], 0) + 1
        once = all(v == 1 for v in applied.values())
        session = result.session
        converged = set(session.mdss.units) == session.phr.active_units(
            session.profile.patient_id)
        ok = once and converged and result.exit_code == 0
        failures += 0 if ok else 1
        print(f"{'OK  ' if ok else 'FAIL'} {title}: "
              f"{len(applied)} projections, exactly-once={once}, "
              f"ledger-converged={converged}, exit={result.exit_code}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
