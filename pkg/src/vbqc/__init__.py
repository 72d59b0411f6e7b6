"""Simulation of noise-robust verifiable blind quantum computation."""

from __future__ import annotations

__version__ = "0.1.0"
