"""Differential-thrust control toolkit for a fin-damaged transport aircraft."""

__version__ = "0.1.0"
