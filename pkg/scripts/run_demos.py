#!/usr/bin/env python3
"""Replay the bundled demo scenarios and print their session reports."""

from __future__ import annotations

import json
import sys
from datetime import datetime
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pcb.harness import render_report, run_scenario  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

DEMOS = [
    ("ketonuria daily -> twice weekly -> daily",
     "keto_mini_guideline.json", "keto_scenario.csv", "keto_profile.json", None),
    ("GDM eight-week record (Molly)",
     "gdm_guideline.json", "molly_scenario.csv", "molly_profile.json", None),
    ("AF fortnight with a device crash (Carlo)",
     "af_guideline.json", "carlo_scenario.csv", "carlo_profile.json",
     (datetime(2014, 5, 17, 23, 0), datetime(2014, 5, 18, 1, 0))),
]


def main() -> int:
    worst = 0
    for title, guideline, scenario, profile, crash in DEMOS:
        print(f"\n=== {title} ===")
        result = run_scenario(
            (FIXTURES / guideline).read_text(encoding="utf-8"),
            (FIXTURES / scenario).read_text(encoding="utf-8"),
            json.loads((FIXTURES / profile).read_text(encoding="utf-8")),
            crash_plan=[crash] if crash else None,
        )
        print(render_report(result))
        worst = max(worst, result.exit_code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
