"""Append-only event journal.

One JSON event per line, typed by an ``event`` field. The journal is the
source of truth: orchestrator state is a fold over it. A torn final line
(crash mid-append) is treated as an event that never happened.
"""

from __future__ import annotations

import json
from pathlib import Path


class Journal:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, event: dict) -> None:
        if "event" not in event:
            raise ValueError("journal events must carry an 'event' field")
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()

    def events(self) -> list[dict]:
        return read_events(self.path)


def read_events(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    events: list[dict] = []
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.readlines()
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            events.append(json.loads(stripped))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                break  # torn tail from a crash mid-append
            raise
    return events
