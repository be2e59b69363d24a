"""Timestamped patient data items shared by the stores and both engines."""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from typing import Union

Value = Union[float, bool, str]

SOURCES = ("sensor", "patientEntry", "careGiver", "dss")
QUALITIES = ("normal", "low", "veryLow")

_TS = "%Y-%m-%d %H:%M:%S"


@dataclass(frozen=True)
class Event:
    patient_id: str
    concept_id: str
    value: Value
    valid_start: datetime
    valid_end: datetime
    source: str = "patientEntry"
    quality: str = "normal"

    def __post_init__(self):
        if self.valid_start > self.valid_end:
            raise ValueError(
                f"validity interval inverted: {self.valid_start} > {self.valid_end}"
            )
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.quality not in QUALITIES:
            raise ValueError(f"unknown quality {self.quality!r}")

    def with_quality(self, quality: str) -> "Event":
        return replace(self, quality=quality)

    def to_json(self) -> dict:
        return {
            "patientId": self.patient_id,
            "conceptId": self.concept_id,
            "value": self.value,
            "validStart": self.valid_start.strftime(_TS),
            "validEnd": self.valid_end.strftime(_TS),
            "source": self.source,
            "quality": self.quality,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Event":
        return cls(
            patient_id=data["patientId"],
            concept_id=data["conceptId"],
            value=data["value"],
            valid_start=datetime.strptime(data["validStart"], _TS),
            valid_end=datetime.strptime(data["validEnd"], _TS),
            source=data["source"],
            quality=data["quality"],
        )
