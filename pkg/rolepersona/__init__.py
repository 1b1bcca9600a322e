"""Personality-grounded role-play dataset construction and evaluation."""

__version__ = "0.1.0"
