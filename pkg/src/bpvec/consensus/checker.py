"""Trace-only safety checker, independent of the simulator's internal state."""
from __future__ import annotations

from typing import Iterable


def check_safety(events: Iterable[dict]) -> list[tuple[int, str, str]]:
    """Return (height, block_a, block_b) for every conflicting pair of commits in a trace."""
    by_height: dict[int, str] = {}
    conflicts = []
    for ev in events:
        if ev.get("event") != "commit":
            continue
        h, b = ev["height"], ev["block"]
        seen = by_height.setdefault(h, b)
        if seen != b:
            conflicts.append((h, seen, b))
    return conflicts
