"""Benchmark split construction.

The eval split is drawn proportionally over (os, dominant element kind)
strata with largest-remainder apportionment, so per-stratum counts deviate
from exact proportionality by at most one. Everything is driven by an
explicit seed and fully deterministic.
"""

from __future__ import annotations

import math
import random

from .records import DatasetManifest


class SplitError(Exception):
    pass


def make_benchmark_split(
    manifest: DatasetManifest, eval_size: int, seed: int
) -> DatasetManifest:
    """Label every record train/eval; exactly ``eval_size`` records go to eval.

    Returns a new manifest sharing the record objects but with fresh split
    labels. Train and eval partition the corpus.
    """
    records = manifest.records
    if not records:
        raise SplitError("cannot split an empty manifest")
    if eval_size > len(records):
        raise SplitError(f"eval_size {eval_size} exceeds corpus size {len(records)}")
    if eval_size < 0:
        raise SplitError("eval_size must be >= 0")

    rng = random.Random(seed)

    strata: dict[tuple[str, str], list[str]] = {}
    for record in records:
        key = (record.os.value, record.dominant_kind().value)
        strata.setdefault(key, []).append(record.image_id)

    total = len(records)
    keys = sorted(strata)
    quotas = {k: eval_size * len(strata[k]) / total for k in keys}
    counts = {k: math.floor(quotas[k]) for k in keys}
    leftover = eval_size - sum(counts.values())

    # Largest remainder; equal remainders broken by a seeded draw. Strata
    # already at capacity are skipped, so a rare second pass mops up.
    tiebreak = {k: rng.random() for k in keys}
    order = sorted(keys, key=lambda k: (-(quotas[k] - counts[k]), tiebreak[k]))
    while leftover > 0:
        placed = False
        for k in order:
            if leftover == 0:
                break
            if counts[k] < len(strata[k]):
                counts[k] += 1
                leftover -= 1
                placed = True
        if not placed:
            raise SplitError("apportionment failed to place all eval slots")

    eval_ids: set[str] = set()
    for k in keys:
        eval_ids.update(rng.sample(strata[k], counts[k]))

    labels = {
        r.image_id: ("eval" if r.image_id in eval_ids else "train") for r in records
    }
    return DatasetManifest(
        records=records,
        split_labels=labels,
        schema_version=manifest.schema_version,
    )
