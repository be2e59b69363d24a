"""Textual substitution of <$ID$> knowledge-threshold tokens."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"<\$([A-Za-z0-9_]+)\$>")


class UnboundThresholdError(KeyError):
    def __init__(self, missing: list[str]):
        super().__init__(f"unbound threshold ids: {', '.join(sorted(missing))}")
        self.missing = sorted(missing)


def _render_number(value: float) -> str:
    if float(value) == int(value):
        return str(int(value))
    return repr(float(value))


def find_threshold_ids(source: str) -> list[str]:
    return sorted({m.group(1) for m in _TOKEN_RE.finditer(source)})


def substitute_thresholds(source: str, kb_values: dict[str, float]) -> str:
    missing = [ref for ref in find_threshold_ids(source) if ref not in kb_values]
    if missing:
        raise UnboundThresholdError(missing)
    return _TOKEN_RE.sub(lambda m: _render_number(kb_values[m.group(1)]), source)
