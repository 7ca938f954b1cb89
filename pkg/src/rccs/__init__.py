"""Workbench for reversible CCS and its configuration-structure model."""

from __future__ import annotations

__all__ = [
    "terms",
    "machine",
    "structures",
    "encoding",
    "equivalences",
    "cli",
]
