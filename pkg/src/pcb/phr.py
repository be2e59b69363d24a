"""Per-patient persistent record: events, prescriptions, preferences, DIRC
rules, the projected-plans ledger, and the append-only interaction log.

State lives in memory and, when a directory is given, is mirrored to
phr/<patientId>.jsonl as tagged records; reopening a store replays the log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Callable, Optional

from .events import Event

_TS = "%Y-%m-%d %H:%M:%S"

INTERACTION_TYPES = (
    "dataNotification",
    "projection",
    "careGiverRecommendation",
    "patientRecommendation",
)

INTERACTION_SUBTYPES = (
    "callbackTriggered",
    "monitoringTriggered",
    "contextChanged",
    "patientDataEntry",
    "careGiverAccepted",
    "careGiverDeclined",
    "patientAccepted",
    "patientDeclined",
    "procedure",
    "notification",
)


@dataclass(frozen=True)
class Prescription:
    medication: str
    dose_per_time: dict[str, str]  # time of day -> dose text
    reminder_lead: str  # duration literal
    start_date: date
    end_date: date

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise ValueError("prescription ends before it starts")
        if not self.dose_per_time:
            raise ValueError("prescription has no doses")

    def valid_on(self, day: date) -> bool:
        return self.start_date <= day <= self.end_date

    def to_json(self) -> dict:
        return {
            "medication": self.medication,
            "dosePerTime": dict(self.dose_per_time),
            "reminderLead": self.reminder_lead,
            "startDate": self.start_date.isoformat(),
            "endDate": self.end_date.isoformat(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Prescription":
        return cls(
            data["medication"],
            dict(data["dosePerTime"]),
            data["reminderLead"],
            date.fromisoformat(data["startDate"]),
            date.fromisoformat(data["endDate"]),
        )


@dataclass(frozen=True)
class DircRule:
    patient_id: str
    personal_event: str
    induced_context: str
    start_offset_minutes: int = 0
    end_offset_minutes: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "patientId": self.patient_id,
            "personalEvent": self.personal_event,
            "inducedContext": self.induced_context,
            "startOffsetMinutes": self.start_offset_minutes,
            "endOffsetMinutes": self.end_offset_minutes,
        }


@dataclass(frozen=True)
class Preference:
    patient_id: str
    context: str
    target_concept_id: str
    reminder_time: str  # "H:MM"
    days_of_week: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "patientId": self.patient_id,
            "context": self.context,
            "targetConceptId": self.target_concept_id,
            "reminderTime": self.reminder_time,
            "daysOfWeek": list(self.days_of_week),
        }


@dataclass(frozen=True)
class ProjectedPlanRecord:
    projection_id: str
    unit_id: str
    sent_date: datetime
    status: str  # start | stop

    def to_json(self) -> dict:
        return {
            "projectionId": self.projection_id,
            "unitId": self.unit_id,
            "sentDate": self.sent_date.strftime(_TS),
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProjectedPlanRecord":
        return cls(
            data["projectionId"],
            data["unitId"],
            datetime.strptime(data["sentDate"], _TS),
            data["status"],
        )


@dataclass(frozen=True)
class InteractionRecord:
    timestamp: datetime
    type: str
    subtype: str
    technical_only: bool = False
    detail: str = ""

    def __post_init__(self):
        if self.type not in INTERACTION_TYPES:
            raise ValueError(f"unknown interaction type {self.type!r}")
        if self.subtype not in INTERACTION_SUBTYPES:
            raise ValueError(f"unknown interaction subtype {self.subtype!r}")
        if self.technical_only and self.type != "projection":
            raise ValueError("technicalOnly is reserved for projection resends")

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp.strftime(_TS),
            "type": self.type,
            "subtype": self.subtype,
            "technicalOnly": self.technical_only,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InteractionRecord":
        return cls(
            datetime.strptime(data["timestamp"], _TS),
            data["type"],
            data["subtype"],
            data["technicalOnly"],
            data.get("detail", ""),
        )


class PatientRecord:
    """All stored state for one patient. Single writer, any readers."""

    def __init__(self, patient_id: str, log_path: Optional[Path] = None):
        self.patient_id = patient_id
        self.events: list[Event] = []
        self.prescriptions: list[Prescription] = []
        self.preferences: list[Preference] = []
        self.dircs: list[DircRule] = []
        self.ledger: list[ProjectedPlanRecord] = []
        self.interactions: list[InteractionRecord] = []
        self.current_context: str = ""
        self._log_path = log_path
        self._next_event_id = 1

    # -- persistence -----------------------------------------------------

    def _append(self, kind: str, payload: dict) -> None:
        if self._log_path is None:
            return
        self._log_path.parent.mkdir(parents=True, exist_ok=True)
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"kind": kind, "payload": payload}, sort_keys=True) + "\n")

    def replay_line(self, line: str) -> None:
        record = json.loads(line)
        kind, payload = record["kind"], record["payload"]
        if kind == "event":
            self.events.append(Event.from_json(payload))
            self._next_event_id += 1
        elif kind == "prescription":
            self.prescriptions.append(Prescription.from_json(payload))
        elif kind == "preference":
            self.preferences.append(
                Preference(
                    payload["patientId"],
                    payload["context"],
                    payload["targetConceptId"],
                    payload["reminderTime"],
                    tuple(payload["daysOfWeek"]),
                )
            )
        elif kind == "dirc":
            self.dircs.append(
                DircRule(
                    payload["patientId"],
                    payload["personalEvent"],
                    payload["inducedContext"],
                    payload["startOffsetMinutes"],
                    payload["endOffsetMinutes"],
                )
            )
        elif kind == "ledger":
            self.ledger.append(ProjectedPlanRecord.from_json(payload))
        elif kind == "interaction":
            self.interactions.append(InteractionRecord.from_json(payload))
        elif kind == "context":
            self.current_context = payload["context"]
        else:
            raise ValueError(f"unknown record kind {kind!r}")


class PhrStore:
    """The per-patient stores plus the insert hook feeding subscriptions."""

    def __init__(self, root_dir: Optional[Path] = None):
        self.root_dir = Path(root_dir) if root_dir else None
        self._records: dict[str, PatientRecord] = {}
        self.on_insert: Optional[Callable[[Event], None]] = None

    def _path_for(self, patient_id: str) -> Optional[Path]:
        if self.root_dir is None:
            return None
        return self.root_dir / "phr" / f"{patient_id}.jsonl"

    def record(self, patient_id: str) -> PatientRecord:
        if patient_id not in self._records:
            rec = PatientRecord(patient_id, self._path_for(patient_id))
            path = self._path_for(patient_id)
            if path is not None and path.exists():
                for line in path.read_text(encoding="utf-8").splitlines():
                    if line.strip():
                        rec.replay_line(line)
            self._records[patient_id] = rec
        return self._records[patient_id]

    # -- events ------------------------------------------------------------

    def insert_event(self, event: Event) -> int:
        rec = self.record(event.patient_id)
        rec.events.append(event)
        event_id = rec._next_event_id
        rec._next_event_id += 1
        rec._append("event", event.to_json())
        if self.on_insert is not None:
            self.on_insert(event)
        return event_id

    def events_for(
        self,
        patient_id: str,
        concept_id: Optional[str] = None,
        start: Optional[datetime] = None,
        end: Optional[datetime] = None,
    ) -> list[Event]:
        out = []
        for ev in self.record(patient_id).events:
            if concept_id is not None and ev.concept_id != concept_id:
                continue
            if start is not None and ev.valid_start < start:
                continue
            if end is not None and ev.valid_start > end:
                continue
            out.append(ev)
        # canonical read order: reads are independent of insertion order
        out.sort(key=lambda ev: (ev.valid_start, ev.concept_id, str(ev.value)))
        return out

    # -- enrollment data -----------------------------------------------------

    def add_prescription(self, patient_id: str, prescription: Prescription) -> None:
        rec = self.record(patient_id)
        rec.prescriptions.append(prescription)
        rec._append("prescription", prescription.to_json())

    def add_preference(self, preference: Preference) -> None:
        rec = self.record(preference.patient_id)
        replaced = [
            p
            for p in rec.preferences
            if not (
                p.context == preference.context
                and p.target_concept_id == preference.target_concept_id
            )
        ]
        rec.preferences = replaced + [preference]
        rec._append("preference", preference.to_json())

    def add_dirc(self, rule: DircRule) -> None:
        rec = self.record(rule.patient_id)
        rec.dircs.append(rule)
        rec._append("dirc", rule.to_json())

    def preference_for(
        self, patient_id: str, context: str, concept_id: str
    ) -> Optional[Preference]:
        for pref in self.record(patient_id).preferences:
            if pref.context == context and pref.target_concept_id == concept_id:
                return pref
        return None

    def dirc_for(self, patient_id: str, personal_event: str) -> Optional[DircRule]:
        for rule in self.record(patient_id).dircs:
            if rule.personal_event == personal_event:
                return rule
        return None

    def set_context(self, patient_id: str, context: str) -> None:
        rec = self.record(patient_id)
        rec.current_context = context
        rec._append("context", {"context": context})

    # -- projected-plans ledger ------------------------------------------------

    def record_projection(
        self,
        patient_id: str,
        projection_id: str,
        stop_ids: list[str],
        start_ids: list[str],
        at: datetime,
    ) -> list[ProjectedPlanRecord]:
        overlap = set(stop_ids) & set(start_ids)
        if overlap:
            raise ValueError(f"stop and start ids overlap: {sorted(overlap)}")
        rec = self.record(patient_id)
        added = []
        for unit_id in stop_ids:
            added.append(ProjectedPlanRecord(projection_id, unit_id, at, "stop"))
        for unit_id in start_ids:
            added.append(ProjectedPlanRecord(projection_id, unit_id, at, "start"))
        for row in added:
            rec.ledger.append(row)
            rec._append("ledger", row.to_json())
        return added

    def active_units(self, patient_id: str, gl_id: Optional[str] = None) -> set[str]:
        """Units whose latest ledger record is a start. gl_id is accepted for
        interface symmetry; a patient record holds one guideline session."""
        latest: dict[str, ProjectedPlanRecord] = {}
        for row in self.record(patient_id).ledger:
            latest[row.unit_id] = row
        return {uid for uid, row in latest.items() if row.status == "start"}

    def latest_start(self, patient_id: str, unit_id: str) -> Optional[ProjectedPlanRecord]:
        found = None
        for row in self.record(patient_id).ledger:
            if row.unit_id == unit_id and row.status == "start":
                found = row
        return found

    # -- interaction log ---------------------------------------------------------

    def log_interaction(self, patient_id: str, record: InteractionRecord) -> None:
        rec = self.record(patient_id)
        rec.interactions.append(record)
        rec._append("interaction", record.to_json())

    def interactions_for(self, patient_id: str) -> list[InteractionRecord]:
        return list(self.record(patient_id).interactions)
