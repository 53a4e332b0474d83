"""Spatially-spread element sampling and sequential mark assignment.

Captioning every detected element crowds the screenshot, so a subset is drawn
that spreads across the screen: a uniform random start, then repeated cycles
that pick uniformly among the few elements farthest from the most recently
selected one. Chaining the distance reference (rather than always measuring
from the start) gives stronger spatial spread.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace

from .geometry import center, euclidean
from .records import UiElement


@dataclass(frozen=True)
class SamplerConfig:
    min_cycles: int = 5
    max_cycles: int = 8
    farthest_pool: int = 5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.min_cycles > self.max_cycles:
            raise ValueError("min_cycles must be <= max_cycles")
        if self.min_cycles < 0:
            raise ValueError("cycle counts must be >= 0")
        if self.farthest_pool < 1:
            raise ValueError("farthest_pool must be >= 1")


@dataclass
class MarkedSet:
    """Selected elements with their 1-based sequential mark ids."""

    entries: list[tuple[int, UiElement]]

    def mark_ids(self) -> list[int]:
        return [m for m, _ in self.entries]

    def elements(self) -> list[UiElement]:
        return [e for _, e in self.entries]


def derive_seed(base_seed: int, image_id: str) -> int:
    """Stable per-image seed from the pipeline seed; never uses builtin hash()."""
    digest = hashlib.sha256(f"{base_seed}:{image_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sample_elements(
    elements: list[UiElement], config: SamplerConfig
) -> list[UiElement]:
    """Draw a spread-out ordered subset; fully deterministic given the seed.

    Draw order from the seeded stream: cycle count first (uniform over
    [min_cycles, max_cycles]), then the uniform start, then one pick per
    cycle from the pool of the farthest not-yet-selected elements (pool size
    clamps to what remains). Stops early when elements run out.
    """
    if not elements:
        raise ValueError("cannot sample from an empty element list")
    rng = random.Random(config.rng_seed)
    cycles = rng.randint(config.min_cycles, config.max_cycles)
    target = min(1 + cycles, len(elements))

    centers = [center(e.bbox) for e in elements]
    remaining = list(range(len(elements)))
    start = remaining.pop(rng.randrange(len(remaining)))
    selected = [start]

    while len(selected) < target:
        ref = centers[selected[-1]]
        # farthest first; ties broken by input index for determinism
        remaining.sort(key=lambda i: (-euclidean(ref, centers[i]), i))
        pool = remaining[: min(config.farthest_pool, len(remaining))]
        pick = pool[rng.randrange(len(pool))]
        remaining.remove(pick)
        selected.append(pick)

    return [elements[i] for i in selected]


def assign_marks(subset: list[UiElement]) -> MarkedSet:
    """Ids 1..n in selection order. Duplicated elements are an error."""
    if not subset:
        raise ValueError("cannot mark an empty selection")
    seen = []
    for el in subset:
        if el in seen:
            raise ValueError(f"duplicate element in selection: {el.bbox.as_list()}")
        seen.append(el)
    return MarkedSet(
        entries=[(i, replace(el, mark_id=i)) for i, el in enumerate(subset, start=1)]
    )
