"""Three-stage source filtering with a human verification loop.

Stage 1 seeds the labeled pool and trains the first classifier version.
Stage 2 iterates: classify a batch, keep confident items for human review,
absorb verdicts into the pool, retrain, and freeze once holdout accuracy
clears the bar. Stage 3 bulk-filters the remaining corpus with the frozen
model. Every step is an append-only journal event; state is a fold of the
journal, so a crash-restart replays to the identical state.
"""

from .backends import ClassifierBackend, ScriptedClassifierBackend, CLASSES
from .journal import Journal, read_events
from .queue import (
    ConflictError,
    LeaseError,
    QueueItem,
    ReviewQueue,
    UnknownItemError,
)
from .orchestrator import (
    Orchestrator,
    OrchestratorConfig,
    Phase,
    PhaseError,
    PoolEntry,
    SeedError,
    Verdict,
)

__all__ = [
    "CLASSES",
    "ClassifierBackend",
    "ConflictError",
    "Journal",
    "LeaseError",
    "Orchestrator",
    "OrchestratorConfig",
    "Phase",
    "PhaseError",
    "PoolEntry",
    "QueueItem",
    "ReviewQueue",
    "ScriptedClassifierBackend",
    "SeedError",
    "UnknownItemError",
    "Verdict",
    "read_events",
]
