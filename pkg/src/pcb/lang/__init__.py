"""Unit-projection language: AST, parser, canonical writer, substitution."""

from . import nodes
from .durations import Duration, DurationError, parse_duration, parse_time_of_day, render_time_of_day
from .parser import DslError, parse_envelope, parse_unit
from .thresholds import UnboundThresholdError, find_threshold_ids, substitute_thresholds
from .writer import render_expr, serialize, serialize_unit

__all__ = [
    "nodes",
    "Duration",
    "DurationError",
    "DslError",
    "UnboundThresholdError",
    "parse_duration",
    "parse_time_of_day",
    "render_time_of_day",
    "parse_envelope",
    "parse_unit",
    "find_threshold_ids",
    "substitute_thresholds",
    "render_expr",
    "serialize",
    "serialize_unit",
]
