"""Duration literals of the unit-projection language.

Accepted spellings: "8 calendardays", "1 hour", "30.0 minutes", "61"
(bare number = days). Internally a duration is whole minutes plus a flag
marking calendar-day semantics (date arithmetic instead of elapsed time).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

MINUTES_PER_DAY = 24 * 60

_UNIT_MINUTES = {
    "minute": 1,
    "minutes": 1,
    "hour": 60,
    "hours": 60,
    "day": MINUTES_PER_DAY,
    "days": MINUTES_PER_DAY,
    "calendarday": MINUTES_PER_DAY,
    "calendardays": MINUTES_PER_DAY,
}

_DURATION_RE = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*$")


class DurationError(ValueError):
    pass


@dataclass(frozen=True)
class Duration:
    minutes: int
    calendar_days: bool = False

    @property
    def days(self) -> int:
        return self.minutes // MINUTES_PER_DAY

    def render(self) -> str:
        if self.calendar_days:
            return f"{self.days} calendardays"
        if self.minutes % 60 == 0 and self.minutes != 0:
            hours = self.minutes // 60
            return f"{hours} hour" + ("s" if abs(hours) != 1 else "")
        return f"{self.minutes} minutes"


def parse_duration(text: str) -> Duration:
    m = _DURATION_RE.match(text)
    if not m:
        raise DurationError(f"bad duration literal: {text!r}")
    amount = float(m.group(1))
    unit = m.group(2).lower()
    if unit == "":
        unit = "days"
    if unit not in _UNIT_MINUTES:
        raise DurationError(f"unknown duration unit in {text!r}")
    minutes = amount * _UNIT_MINUTES[unit]
    if minutes != int(minutes):
        raise DurationError(f"duration {text!r} is not a whole number of minutes")
    return Duration(int(minutes), calendar_days=unit.startswith("calendarday"))


_TIME_RE = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*$")


def parse_time_of_day(text: str) -> int:
    """Parse "H:MM" / "HH:MM" into minutes since midnight."""
    m = _TIME_RE.match(text)
    if not m:
        raise DurationError(f"bad time of day: {text!r}")
    h, mi = int(m.group(1)), int(m.group(2))
    if h > 23 or mi > 59:
        raise DurationError(f"time of day out of range: {text!r}")
    return h * 60 + mi


def render_time_of_day(minutes: int) -> str:
    return f"{minutes // 60}:{minutes % 60:02d}"
