"""Scenario files: longitudinal patient records replayed by the harness.

CSV with a mandatory header row. Rows whose step label carries a letter
suffix are assertions about expected system behaviour; bare-numbered or
unlabelled rows inject data through the component named in the last column.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

HEADER = [
    "week", "day in week", "day of treatment", "valid time", "GESHER ID", "VMR Class",
    "conceptName", "Valid Start Time", "Valid End Time", "value", "Steps",
    "GENERATED BY component",
]

GENERATORS = ("SmartphoneGUI", "mDSS", "BE-DSS", "EMR", "careGiver")

_TS = "%d/%m/%Y %H:%M:%S"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioRow:
    week: int
    day_in_week: int
    day_of_treatment: int
    valid_time: str
    concept_id: str
    vmr_class: str
    concept_name: str
    valid_start: datetime
    valid_end: datetime
    value: str
    step: str
    generated_by: str

    @property
    def is_assertion(self) -> bool:
        return bool(self.step) and not self.step.isdigit()


@dataclass
class Assertion:
    step: str
    at: datetime
    actor: str
    ref_id: str
    value: str
    window: timedelta = timedelta(days=1)
    # filled in while checking
    kind: str = ""
    passed: bool = False
    note: str = ""


def load_scenario(text: str) -> list[ScenarioRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ScenarioError("scenario file is empty")
    if [h.strip() for h in header] != HEADER:
        raise ScenarioError(f"bad scenario header: {header}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        if not raw or not any(cell.strip() for cell in raw):
            continue
        try:
            generated_by = raw[11].strip()
            base = generated_by.split("/")[0].split(" ")[0].strip() or "SmartphoneGUI"
            if base not in GENERATORS:
                raise ScenarioError(f"unknown generator {generated_by!r}")
            rows.append(
                ScenarioRow(
                    week=int(raw[0]),
                    day_in_week=int(raw[1]),
                    day_of_treatment=int(raw[2]),
                    valid_time=raw[3].strip(),
                    concept_id=raw[4].strip(),
                    vmr_class=raw[5].strip(),
                    concept_name=raw[6].strip(),
                    valid_start=datetime.strptime(raw[7].strip(), _TS),
                    valid_end=datetime.strptime(raw[8].strip(), _TS),
                    value=raw[9].strip(),
                    step=raw[10].strip(),
                    generated_by=base,
                )
            )
        except ScenarioError:
            raise
        except Exception as exc:
            raise ScenarioError(f"scenario line {lineno}: {exc}") from exc
    for earlier, later in zip(rows, rows[1:]):
        if later.valid_start < earlier.valid_start:
            raise ScenarioError(
                f"rows out of time order at step {later.step or later.concept_id}"
            )
    return rows


def parse_value(value: str, value_type: Optional[str]):
    """Scenario cell -> event value. '--' records a negative finding, '+'
    flavoured strings a positive one."""
    text = value.strip()
    if value_type == "numeric":
        return float(text)
    if value_type == "boolean":
        return text.lower() in ("true", "yes", "si", "1") or text.startswith("+")
    if value_type == "string":
        return text
    # untyped concepts: guess numbers, keep marker strings
    if text.startswith("+") or text.lower() in ("true", "yes"):
        return True
    if text.startswith("-") or text.lower() in ("false", "no"):
        return False
    try:
        return float(text)
    except ValueError:
        return text
