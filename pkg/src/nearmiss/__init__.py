"""Closed-loop adversarial near-miss training for a 2D driving agent."""

__version__ = "0.1.0"
