"""Reactive motion generation from demonstrations via phase-conditioned
neural potential fields."""

__version__ = "0.1.0"
