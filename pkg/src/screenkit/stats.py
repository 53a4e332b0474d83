"""Corpus statistics: caption lengths, UI type mix, per-OS kind counts and the
spatial density of element centers on a normalized G x G grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import center
from .records import ScreenshotRecord

DEFAULT_HEATMAP_GRID = 64


@dataclass
class StatsReport:
    caption_length_histogram: dict[int, int]
    ui_type_distribution: dict[str, float]
    per_os_kind_counts: dict[tuple[str, str], int]
    spatial_heatmap: np.ndarray
    record_count: int
    element_count: int
    caption_count: int = 0
    heatmap_grid: int = DEFAULT_HEATMAP_GRID

    @property
    def mean_caption_length(self) -> float:
        if self.caption_count == 0:
            return 0.0
        total = sum(length * n for length, n in self.caption_length_histogram.items())
        return total / self.caption_count

    def to_json_dict(self) -> dict:
        return {
            "totals": {
                "record_count": self.record_count,
                "element_count": self.element_count,
                "caption_count": self.caption_count,
                "mean_caption_length": self.mean_caption_length,
            },
            "caption_length_histogram": {
                str(k): v for k, v in sorted(self.caption_length_histogram.items())
            },
            "ui_type_distribution": dict(sorted(self.ui_type_distribution.items())),
            "per_os_kind_counts": {
                f"{os}/{kind}": n
                for (os, kind), n in sorted(self.per_os_kind_counts.items())
            },
            "heatmap_grid": self.heatmap_grid,
            "spatial_heatmap": self.spatial_heatmap.tolist(),
        }


def compute_stats(
    records: list[ScreenshotRecord], heatmap_grid: int = DEFAULT_HEATMAP_GRID
) -> StatsReport:
    """Single pass over records; empty input yields a zeroed report.

    Caption length is measured in characters of the raw caption. The heatmap
    increments the cell containing each element's normalized center and is
    normalized to sum to 1 when any elements exist.
    """
    if heatmap_grid < 1:
        raise ValueError("heatmap_grid must be >= 1")
    length_hist: dict[int, int] = {}
    type_counts: dict[str, int] = {}
    os_kind: dict[tuple[str, str], int] = {}
    heat = np.zeros((heatmap_grid, heatmap_grid), dtype=float)
    element_count = 0
    caption_count = 0

    for record in records:
        for el in record.elements:
            element_count += 1
            key = (record.os.value, el.kind.value)
            os_kind[key] = os_kind.get(key, 0) + 1
            c = center(el.bbox)
            col = min(int(c.x / record.width * heatmap_grid), heatmap_grid - 1)
            row = min(int(c.y / record.height * heatmap_grid), heatmap_grid - 1)
            heat[row, col] += 1
            if el.caption is not None:
                caption_count += 1
                n = len(el.caption.raw)
                length_hist[n] = length_hist.get(n, 0) + 1
                t = el.caption.ui_type.value
                type_counts[t] = type_counts.get(t, 0) + 1

    distribution = (
        {t: n / caption_count for t, n in type_counts.items()} if caption_count else {}
    )
    if element_count:
        heat /= element_count

    return StatsReport(
        caption_length_histogram=length_hist,
        ui_type_distribution=distribution,
        per_os_kind_counts=os_kind,
        spatial_heatmap=heat,
        record_count=len(records),
        element_count=element_count,
        caption_count=caption_count,
        heatmap_grid=heatmap_grid,
    )
