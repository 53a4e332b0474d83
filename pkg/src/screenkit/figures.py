"""Matplotlib figure rendering for stats and eval reports.

Everything is rendered headless (Agg) straight to files so the CLI can run in
batch jobs. Figure styling is deliberately plain; these are working plots,
not publication graphics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .evalharness import MetricsReport
from .stats import StatsReport


def _save(fig, path: Path, metadata: dict | None = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=metadata)
    plt.close(fig)
    return path


def render_caption_length_figure(stats: StatsReport, path: str | Path, metadata: dict | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    if stats.caption_length_histogram:
        lengths = sorted(stats.caption_length_histogram)
        counts = [stats.caption_length_histogram[n] for n in lengths]
        ax.bar(lengths, counts, color="#4878cf", width=0.9)
    ax.set_xlabel("caption length (chars)")
    ax.set_ylabel("captions")
    ax.set_title(f"Caption lengths (mean {stats.mean_caption_length:.1f})")
    return _save(fig, Path(path), metadata)


def render_ui_type_figure(stats: StatsReport, path: str | Path, metadata: dict | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ordered = sorted(stats.ui_type_distribution.items(), key=lambda kv: (-kv[1], kv[0]))
    if ordered:
        names = [k for k, _ in ordered]
        fracs = [v for _, v in ordered]
        ax.bar(names, fracs, color="#6acc65")
        ax.tick_params(axis="x", rotation=45)
    ax.set_ylabel("fraction of captions")
    ax.set_title("UI type distribution")
    fig.tight_layout()
    return _save(fig, Path(path), metadata)


def render_os_kind_figure(stats: StatsReport, path: str | Path, metadata: dict | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    oses = sorted({os_name for os_name, _ in stats.per_os_kind_counts})
    kinds = sorted({kind for _, kind in stats.per_os_kind_counts})
    x = np.arange(len(oses))
    width = 0.8 / max(1, len(kinds))
    for i, kind in enumerate(kinds):
        counts = [stats.per_os_kind_counts.get((os_name, kind), 0) for os_name in oses]
        ax.bar(x + i * width, counts, width, label=kind)
    ax.set_xticks(x + width * (len(kinds) - 1) / 2 if kinds else x)
    ax.set_xticklabels(oses)
    ax.set_ylabel("elements")
    ax.set_title("Elements per OS and kind")
    if kinds:
        ax.legend()
    return _save(fig, Path(path), metadata)


def render_heatmap_figure(stats: StatsReport, path: str | Path, metadata: dict | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    grid = np.asarray(stats.spatial_heatmap, dtype=float)
    im = ax.imshow(grid, cmap="viridis", origin="upper")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("Element center density")
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, Path(path), metadata)


def render_stats_figures(stats: StatsReport, out_dir: str | Path, metadata: dict | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        render_caption_length_figure(stats, out_dir / "caption_lengths.png", metadata),
        render_ui_type_figure(stats, out_dir / "ui_types.png", metadata),
        render_os_kind_figure(stats, out_dir / "os_kind_counts.png", metadata),
        render_heatmap_figure(stats, out_dir / "spatial_heatmap.png", metadata),
    ]


def render_metrics_figure(report: MetricsReport, path: str | Path, metadata: dict | None = None) -> Path:
    """Grouped bars: one cluster per group, one bar per metric column."""
    taus = sorted(report.iou_at)
    metric_names = [f"IoU@{tau:g}" for tau in taus] + ["ElemAcc"]

    def values_for(rep: MetricsReport) -> list[float]:
        return [rep.iou_at[tau] for tau in taus] + [rep.element_accuracy]

    groups = [("overall", report)] + [
        (f"{platform}/{kind}", sub) for (platform, kind), sub in sorted(report.groups.items())
    ]
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(groups)), 4))
    x = np.arange(len(groups))
    width = 0.8 / len(metric_names)
    for i, name in enumerate(metric_names):
        vals = [values_for(rep)[i] for _, rep in groups]
        ax.bar(x + i * width, vals, width, label=name)
    ax.set_xticks(x + width * (len(metric_names) - 1) / 2)
    ax.set_xticklabels([name for name, _ in groups], rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("Grounding metrics by group")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(path), metadata)
