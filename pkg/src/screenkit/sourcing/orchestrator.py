"""The three-stage filtering state machine.

Thresholds follow the pipeline's wording literally: stage-2 retention is a
strict ``> 0.8`` on the predicted class's confidence, freezing requires
holdout accuracy strictly ``> 0.95``, and stage-3 keeps only valid items with
confidence ``>= 0.9`` inclusive.

All durable state flows through :meth:`Orchestrator._record`, which appends
the event to the journal and then folds it into memory -- replay applies the
same fold to the journal file, so crash-restart reproduces identical state.
Review leases are deliberately volatile: a crash expires them.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from .backends import CLASSES, ClassifierBackend
from .journal import Journal, read_events
from .queue import ReviewQueue, QueueItem

logger = logging.getLogger(__name__)


class PhaseError(Exception):
    pass


class SeedError(Exception):
    pass


class OutstandingReviewError(Exception):
    def __init__(self, image_ids: list[str]):
        self.image_ids = image_ids
        super().__init__(f"round has unadjudicated items: {image_ids[:10]}")


class Phase(str, Enum):
    SEEDING = "seeding"
    ITERATING = "iterating"
    FROZEN = "frozen"
    BULK_FILTERING = "bulk_filtering"


_PHASE_ORDER = {
    Phase.SEEDING: 0,
    Phase.ITERATING: 1,
    Phase.FROZEN: 2,
    Phase.BULK_FILTERING: 3,
}


@dataclass(frozen=True)
class OrchestratorConfig:
    retain_confidence: float = 0.8     # stage 2 keeps strictly above this
    final_confidence: float = 0.9      # stage 3 keeps at or above this
    freeze_accuracy: float = 0.95      # freeze strictly above this
    batch_size: int = 5000
    seed_min_per_class: int = 5000
    holdout_fraction: float = 0.1
    lease_timeout_seconds: float = 600.0
    seed: int = 0

    def scaled_for_test_profile(self) -> "OrchestratorConfig":
        """Same thresholds, desk-scale batch and seed minimums."""
        return OrchestratorConfig(
            retain_confidence=self.retain_confidence,
            final_confidence=self.final_confidence,
            freeze_accuracy=self.freeze_accuracy,
            batch_size=20,
            seed_min_per_class=5,
            holdout_fraction=self.holdout_fraction,
            lease_timeout_seconds=self.lease_timeout_seconds,
            seed=self.seed,
        )


@dataclass(frozen=True)
class Verdict:
    image_id: str
    decision: str  # accept | reject | relabel
    reviewer_id: str
    timestamp: float
    relabel_class: Optional[str] = None

    def __post_init__(self) -> None:
        if self.decision not in ("accept", "reject", "relabel"):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == "relabel":
            if self.relabel_class not in CLASSES:
                raise ValueError(f"relabel needs a valid class, got {self.relabel_class!r}")
        elif self.relabel_class is not None:
            raise ValueError("relabel_class only allowed with decision=relabel")


@dataclass
class PoolEntry:
    label: str
    provenance: str  # seed | human_verified
    round_added: int


@dataclass
class OrchestratorState:
    phase: str = Phase.SEEDING
    round: int = 0
    model_version: Optional[str] = None
    frozen_version: Optional[str] = None
    train_count: int = 0


class Orchestrator:
    def __init__(
        self,
        config: OrchestratorConfig,
        backend: ClassifierBackend,
        journal_path: str | Path,
        intake_path: Optional[str | Path] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config
        self.backend = backend
        self.journal = Journal(journal_path)
        self.intake_path = Path(intake_path) if intake_path else None
        self.clock = clock
        self.state = OrchestratorState()
        self.pool: dict[str, PoolEntry] = {}
        self.holdout: dict[str, str] = {}
        self.queue = ReviewQueue(lease_timeout=config.lease_timeout_seconds, clock=clock)
        self.intake: list[str] = []

    # ------------------------------------------------------------------
    # journal fold

    def _record(self, event: dict) -> None:
        self.journal.append(event)
        self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "seeded":
            for cls_name, ids in event["train"].items():
                for image_id in ids:
                    self.pool[image_id] = PoolEntry(cls_name, "seed", 0)
            for cls_name, ids in event["holdout"].items():
                for image_id in ids:
                    self.holdout[image_id] = cls_name
        elif kind == "trained":
            self.state.model_version = event["model_version"]
            self.state.train_count += 1
        elif kind == "phase":
            new_phase = Phase(event["phase"])
            if _PHASE_ORDER[new_phase] < _PHASE_ORDER[self.state.phase]:
                raise PhaseError(
                    f"phase may not move backwards: {self.state.phase} -> {new_phase}"
                )
            self.state.phase = new_phase
            if "round" in event:
                self.state.round = event["round"]
        elif kind == "enqueued":
            for image_id, cls_name, conf in event["items"]:
                self.queue.enqueue(image_id, cls_name, conf, event["round"])
        elif kind in ("batch_classified", "dropped", "evaluated"):
            pass  # audit-only events
        elif kind == "verdict":
            self.queue.apply_verdict_unchecked(
                event["image_id"],
                event["round"],
                {
                    "decision": event["decision"],
                    "relabel_class": event.get("relabel_class"),
                    "reviewer_id": event["reviewer_id"],
                    "timestamp": event["timestamp"],
                },
            )
        elif kind == "round_absorbed":
            for image_id, cls_name in event["added"]:
                self.pool[image_id] = PoolEntry(cls_name, "human_verified", event["round"])
        elif kind == "frozen":
            self.state.frozen_version = event["model_version"]
            self.state.phase = Phase.FROZEN
        elif kind == "bulk_filtered":
            self.intake.extend(image_id for image_id, _, _ in event["kept"])
        else:
            raise ValueError(f"unknown journal event {kind!r}")

    @classmethod
    def replay(
        cls,
        config: OrchestratorConfig,
        backend: ClassifierBackend,
        journal_path: str | Path,
        intake_path: Optional[str | Path] = None,
        clock: Callable[[], float] = time.time,
    ) -> "Orchestrator":
        """Rebuild state by folding the journal; never calls the backend."""
        orch = cls(config, backend, journal_path, intake_path, clock)
        for event in read_events(journal_path):
            orch._apply(event)
        if hasattr(backend, "seek"):
            backend.seek(orch.state.train_count)
        return orch

    # ------------------------------------------------------------------
    # stage 1

    def stage1_seed(self, seed_sets: dict[str, list[str]]) -> OrchestratorState:
        """Populate the pool from per-class seed sets, carve the holdout, train once."""
        if self.state.phase != Phase.SEEDING:
            raise PhaseError(f"stage1_seed requires phase seeding, not {self.state.phase}")
        if set(seed_sets) != set(CLASSES):
            raise SeedError(f"seed sets must cover classes {CLASSES}, got {sorted(seed_sets)}")
        for cls_name, ids in seed_sets.items():
            if len(ids) < self.config.seed_min_per_class:
                raise SeedError(
                    f"class {cls_name!r} has {len(ids)} seeds, "
                    f"minimum is {self.config.seed_min_per_class}"
                )
            if len(set(ids)) != len(ids):
                raise SeedError(f"duplicate image ids in seed set {cls_name!r}")

        rng = random.Random(self.config.seed)
        train: dict[str, list[str]] = {}
        holdout: dict[str, list[str]] = {}
        for cls_name in CLASSES:
            ids = list(seed_sets[cls_name])
            n_holdout = int(round(len(ids) * self.config.holdout_fraction))
            held = set(rng.sample(ids, n_holdout))
            holdout[cls_name] = [i for i in ids if i in held]
            train[cls_name] = [i for i in ids if i not in held]

        self._record({"event": "seeded", "train": train, "holdout": holdout})
        version = self.backend.train(self.training_labels())
        self._record({"event": "trained", "model_version": version})
        self._record({"event": "phase", "phase": Phase.ITERATING, "round": 1})
        return self.state

    def training_labels(self) -> dict[str, str]:
        return {image_id: entry.label for image_id, entry in self.pool.items()}

    # ------------------------------------------------------------------
    # stage 2

    def stage2_ingest_batch(self, images: list[str]) -> list[QueueItem]:
        """Classify a batch; confident items join the review queue, rest dropped."""
        if self.state.phase != Phase.ITERATING:
            raise PhaseError(f"ingest requires phase iterating, not {self.state.phase}")
        if len(images) > self.config.batch_size:
            raise ValueError(
                f"batch of {len(images)} exceeds configured batch_size "
                f"{self.config.batch_size}"
            )
        results = self.backend.classify(images)
        round_ = self.state.round
        classified = [[image_id, cls_name, conf] for image_id, (cls_name, conf) in zip(images, results)]
        retained = [row for row in classified if row[2] > self.config.retain_confidence]
        dropped = [row for row in classified if row[2] <= self.config.retain_confidence]
        self._record({"event": "batch_classified", "round": round_, "results": classified})
        if dropped:
            self._record({"event": "dropped", "round": round_, "items": dropped})
        self._record({"event": "enqueued", "round": round_, "items": retained})
        return [self.queue.get(image_id, round_) for image_id, _, _ in retained]

    def queue_next(self, reviewer_id: str) -> Optional[QueueItem]:
        return self.queue.next_for(reviewer_id, self.state.round)

    def submit_verdict(self, verdict: Verdict) -> QueueItem:
        round_ = self.state.round
        self.queue.check_submit(verdict.image_id, round_, verdict.reviewer_id)
        self._record(
            {
                "event": "verdict",
                "round": round_,
                "image_id": verdict.image_id,
                "decision": verdict.decision,
                "relabel_class": verdict.relabel_class,
                "reviewer_id": verdict.reviewer_id,
                "timestamp": verdict.timestamp,
            }
        )
        return self.queue.get(verdict.image_id, round_)

    def stage2_absorb_verdicts_and_retrain(self) -> OrchestratorState:
        """Fold the round's verdicts into the pool, retrain, maybe freeze."""
        if self.state.phase != Phase.ITERATING:
            raise PhaseError(f"absorb requires phase iterating, not {self.state.phase}")
        round_ = self.state.round
        pending = self.queue.pending(round_)
        if pending:
            raise OutstandingReviewError([item.image_id for item in pending])

        added: list[list[str]] = []
        for item in self.queue.adjudicated(round_):
            decision = item.verdict["decision"]
            if decision == "accept":
                label = item.predicted_class
            elif decision == "relabel":
                label = item.verdict["relabel_class"]
            else:
                continue
            if item.image_id in self.pool or item.image_id in self.holdout:
                logger.warning("skipping %s: already in pool/holdout", item.image_id)
                continue
            added.append([item.image_id, label])

        if not added:
            logger.warning("round %d absorbed zero accepted verdicts; retrain skipped", round_)
            self._record({"event": "round_absorbed", "round": round_, "added": [], "retrained": False})
            self._record({"event": "phase", "phase": Phase.ITERATING, "round": round_ + 1})
            return self.state

        self._record({"event": "round_absorbed", "round": round_, "added": added, "retrained": True})
        version = self.backend.train(self.training_labels())
        self._record({"event": "trained", "model_version": version})
        accuracy = self.backend.evaluate(dict(self.holdout))
        self._record(
            {"event": "evaluated", "round": round_, "model_version": version, "accuracy": accuracy}
        )
        if accuracy > self.config.freeze_accuracy:
            self._record({"event": "frozen", "model_version": version})
        else:
            self._record({"event": "phase", "phase": Phase.ITERATING, "round": round_ + 1})
        return self.state

    # ------------------------------------------------------------------
    # stage 3

    def stage3_bulk_filter(self, images: list[str]) -> list[str]:
        """Classify with the frozen model; keep only confident valid screens."""
        if self.state.phase not in (Phase.FROZEN, Phase.BULK_FILTERING):
            raise PhaseError(
                f"bulk filter requires a frozen model, phase is {self.state.phase}"
            )
        if self.state.phase == Phase.FROZEN:
            self._record({"event": "phase", "phase": Phase.BULK_FILTERING})
        results = self.backend.classify(images)
        kept = []
        dropped = []
        for image_id, (cls_name, conf) in zip(images, results):
            row = [image_id, cls_name, conf]
            if cls_name == "valid" and conf >= self.config.final_confidence:
                kept.append(row)
            else:
                dropped.append(row)
        self._record(
            {
                "event": "bulk_filtered",
                "model_version": self.state.frozen_version,
                "kept": kept,
                "dropped": dropped,
            }
        )
        self.write_intake()
        return [image_id for image_id, _, _ in kept]

    def write_intake(self) -> None:
        """Rewrite the annotation intake manifest from state (idempotent)."""
        if self.intake_path is None:
            return
        self.intake_path.parent.mkdir(parents=True, exist_ok=True)
        with self.intake_path.open("w", encoding="utf-8") as fh:
            for image_id in self.intake:
                fh.write(image_id + "\n")

    # ------------------------------------------------------------------

    def state_snapshot(self) -> dict:
        """Deterministic view of durable state (leases excluded)."""
        return {
            "phase": self.state.phase.value,
            "round": self.state.round,
            "model_version": self.state.model_version,
            "frozen_version": self.state.frozen_version,
            "train_count": self.state.train_count,
            "pool": {
                image_id: [e.label, e.provenance, e.round_added]
                for image_id, e in sorted(self.pool.items())
            },
            "holdout": dict(sorted(self.holdout.items())),
            "queue": [
                [
                    item.round,
                    item.image_id,
                    item.predicted_class,
                    item.confidence,
                    item.verdict["decision"] if item.verdict else None,
                ]
                for item in (self.queue._items[k] for k in self.queue._order)
            ],
            "intake": list(self.intake),
        }
