"""Review queue with lease-based assignment.

Reviewers lease items one at a time; a lease that is not followed by a
verdict within the timeout silently expires and the item is served again.
Verdicts are first-writer-wins per (image_id, round): a second submission is
a conflict and the original verdict stands. Leases are volatile (in-memory
only) -- a crash simply expires them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

DEFAULT_LEASE_TIMEOUT = 600.0  # seconds


class UnknownItemError(KeyError):
    def __str__(self) -> str:
        # KeyError.__str__ reprs the message, which reads badly in API errors.
        return self.args[0] if self.args else ""


class ConflictError(Exception):
    """A verdict already exists for this (image_id, round)."""


class LeaseError(Exception):
    """The item is currently leased to a different reviewer."""


@dataclass
class QueueItem:
    image_id: str
    predicted_class: str
    confidence: float
    round: int
    lease_reviewer: Optional[str] = None
    lease_expires: float = 0.0
    verdict: Optional[dict] = None

    def lease_active(self, now: float) -> bool:
        return self.lease_reviewer is not None and now < self.lease_expires


@dataclass
class ReviewQueue:
    lease_timeout: float = DEFAULT_LEASE_TIMEOUT
    clock: Callable[[], float] = time.time
    _items: dict[tuple[str, int], QueueItem] = field(default_factory=dict)
    _order: list[tuple[str, int]] = field(default_factory=list)

    def enqueue(self, image_id: str, predicted_class: str, confidence: float, round_: int) -> QueueItem:
        key = (image_id, round_)
        if key in self._items:
            return self._items[key]
        item = QueueItem(image_id, predicted_class, confidence, round_)
        self._items[key] = item
        self._order.append(key)
        return item

    def next_for(self, reviewer_id: str, round_: int) -> Optional[QueueItem]:
        """Lease the oldest unadjudicated, unleased item of this round."""
        now = self.clock()
        for key in self._order:
            item = self._items[key]
            if item.round != round_ or item.verdict is not None:
                continue
            if item.lease_active(now) and item.lease_reviewer != reviewer_id:
                continue
            item.lease_reviewer = reviewer_id
            item.lease_expires = now + self.lease_timeout
            return item
        return None

    def check_submit(self, image_id: str, round_: int, reviewer_id: str) -> QueueItem:
        """Raise if a verdict from this reviewer would be rejected; mutate nothing."""
        key = (image_id, round_)
        if key not in self._items:
            raise UnknownItemError(f"no queue item for {image_id!r} in round {round_}")
        item = self._items[key]
        if item.verdict is not None:
            raise ConflictError(
                f"verdict already recorded for {image_id!r} in round {round_}"
            )
        now = self.clock()
        if item.lease_active(now) and item.lease_reviewer != reviewer_id:
            raise LeaseError(
                f"{image_id!r} is leased to {item.lease_reviewer!r} until {item.lease_expires}"
            )
        return item

    def submit(self, image_id: str, round_: int, reviewer_id: str, verdict: dict) -> QueueItem:
        item = self.check_submit(image_id, round_, reviewer_id)
        item.verdict = verdict
        item.lease_reviewer = None
        item.lease_expires = 0.0
        return item

    def apply_verdict_unchecked(self, image_id: str, round_: int, verdict: dict) -> None:
        """Record a journaled verdict without lease checks (replay path)."""
        key = (image_id, round_)
        if key in self._items:
            item = self._items[key]
            item.verdict = verdict
            item.lease_reviewer = None
            item.lease_expires = 0.0

    def pending(self, round_: int) -> list[QueueItem]:
        return [
            self._items[k]
            for k in self._order
            if self._items[k].round == round_ and self._items[k].verdict is None
        ]

    def adjudicated(self, round_: int) -> list[QueueItem]:
        return [
            self._items[k]
            for k in self._order
            if self._items[k].round == round_ and self._items[k].verdict is not None
        ]

    def counts(self, round_: int) -> dict[str, int]:
        now = self.clock()
        pending = leased = done = 0
        for key in self._order:
            item = self._items[key]
            if item.round != round_:
                continue
            if item.verdict is not None:
                done += 1
            elif item.lease_active(now):
                leased += 1
            else:
                pending += 1
        return {"pending": pending, "leased": leased, "done": done}

    def get(self, image_id: str, round_: int) -> QueueItem:
        key = (image_id, round_)
        if key not in self._items:
            raise UnknownItemError(f"no queue item for {image_id!r} in round {round_}")
        return self._items[key]
