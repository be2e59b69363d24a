"""Distributed guideline execution via projection/call-back."""

__version__ = "0.1.0"
