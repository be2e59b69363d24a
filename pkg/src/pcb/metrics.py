"""Interaction classification and mean-time-between-interaction metrics.

FMTBI divides session days by the functional data-notification count; TMTBI
folds crash-recovery resends into the denominator. Values are kept as exact
rationals; rounding to two decimals happens only in report rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .phr import INTERACTION_SUBTYPES, InteractionRecord


def classify_interaction(record) -> str:
    """Total mapping of an interaction record onto the ten analysis subtypes."""
    if isinstance(record, InteractionRecord):
        return record.subtype
    subtype = record.get("subtype")
    if subtype in INTERACTION_SUBTYPES:
        return subtype
    type_ = record.get("type")
    if type_ == "projection":
        return "procedure"
    if type_ in ("careGiverRecommendation", "patientRecommendation"):
        kind = record.get("kind", "notification")
        if kind == "dataEntry":
            return "patientDataEntry"
        return "procedure" if kind == "recommendation" else "notification"
    if type_ == "dataNotification":
        if "callbackId" in record:
            return "callbackTriggered"
        if "patternId" in record:
            return "monitoringTriggered"
        if "personalEvent" in record:
            return "contextChanged"
        if "event" in record:
            return "patientDataEntry"
        response = record.get("response")
        actor = record.get("actor", "patient")
        if response in ("accept", "decline"):
            side = "careGiver" if actor == "careGiver" else "patient"
            return f"{side}Accepted" if response == "accept" else f"{side}Declined"
    raise ValueError(f"unclassifiable interaction record: {record!r}")


@dataclass
class SessionMetrics:
    days_in_system: int
    functional_notifications: int
    technical_notifications: int
    fmtbi: Optional[Fraction]
    tmtbi: Optional[Fraction]
    interaction_histogram: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "daysInSystem": self.days_in_system,
            "functionalNotifications": self.functional_notifications,
            "technicalNotifications": self.technical_notifications,
            "fmtbi": None if self.fmtbi is None else round2(self.fmtbi),
            "tmtbi": None if self.tmtbi is None else round2(self.tmtbi),
            "interactionHistogram": dict(sorted(self.interaction_histogram.items())),
        }


def round2(value) -> float:
    """Round half away from zero to two decimals (report display only)."""
    fr = Fraction(value)
    sign = -1 if fr < 0 else 1
    return sign * float(math.floor(abs(fr) * 100 + Fraction(1, 2))) / 100


def compute_metrics(records: list[InteractionRecord], days_in_system: int) -> SessionMetrics:
    functional = sum(1 for r in records if r.type == "dataNotification")
    technical_resends = sum(
        1 for r in records if r.type == "projection" and r.technical_only
    )
    technical = functional + technical_resends
    histogram: dict[str, int] = {}
    for record in records:
        subtype = classify_interaction(record)
        histogram[subtype] = histogram.get(subtype, 0) + 1
    return SessionMetrics(
        days_in_system=days_in_system,
        functional_notifications=functional,
        technical_notifications=technical,
        fmtbi=Fraction(days_in_system, functional) if functional else None,
        tmtbi=Fraction(days_in_system, technical) if technical else None,
        interaction_histogram=histogram,
    )
