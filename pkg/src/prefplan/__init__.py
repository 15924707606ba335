"""Preference-aware task and motion planning."""

__version__ = "0.1.0"
