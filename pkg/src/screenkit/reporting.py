"""Plain-text report rendering: fixed-width metric tables and TSV stats dumps."""

from __future__ import annotations

from pathlib import Path

from .evalharness import MetricsReport
from .stats import StatsReport


def _fmt_ratio(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def metrics_table(report: MetricsReport) -> str:
    """Render the per-platform, per-kind breakdown as a fixed-width table.

    One row per group plus an overall row; IoU columns first, then element
    accuracy and the text metrics.
    """
    taus = sorted(report.iou_at)
    headers = ["group", "n"] + [f"IoU@{tau:g}" for tau in taus] + ["ElemAcc", "EM", "F1"]

    def row_for(name: str, rep: MetricsReport) -> list[str]:
        return (
            [name, str(rep.sample_count)]
            + [_fmt_ratio(rep.iou_at[tau]) for tau in taus]
            + [_fmt_ratio(rep.element_accuracy), _fmt_ratio(rep.em_score), _fmt_ratio(rep.f1_score)]
        )

    rows = [row_for("overall", report)]
    for (platform, kind), sub in sorted(report.groups.items()):
        rows.append(row_for(f"{platform}/{kind}", sub))

    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))
    ]

    def render(cells: list[str]) -> str:
        parts = [cells[0].ljust(widths[0])]
        parts += [cells[i].rjust(widths[i]) for i in range(1, len(cells))]
        return "  ".join(parts)

    lines = [render(headers), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    lines += [render(r) for r in rows]
    if report.point_prediction_count:
        lines.append(
            f"note: {report.point_prediction_count} point prediction(s) scored 0 on IoU metrics"
        )
    if report.missing_prediction_count:
        lines.append(
            f"note: {report.missing_prediction_count} sample(s) had no prediction (counted as misses)"
        )
    return "\n".join(lines) + "\n"


def write_stats_tables(
    stats: StatsReport, out_dir: str | Path, header_line: str | None = None
) -> list[Path]:
    """Write the stats breakdown as TSV files; returns the paths written.

    ``header_line`` (seed/config fingerprint) goes in as a leading comment.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def comment(fh) -> None:
        if header_line:
            fh.write(f"# {header_line}\n")

    path = out_dir / "caption_lengths.tsv"
    with path.open("w", encoding="utf-8") as fh:
        comment(fh)
        fh.write("length\tcount\n")
        for length in sorted(stats.caption_length_histogram):
            fh.write(f"{length}\t{stats.caption_length_histogram[length]}\n")
    written.append(path)

    path = out_dir / "ui_types.tsv"
    with path.open("w", encoding="utf-8") as fh:
        comment(fh)
        fh.write("ui_type\tfraction\n")
        ordered = sorted(
            stats.ui_type_distribution.items(), key=lambda kv: (-kv[1], kv[0])
        )
        for ui_type, fraction in ordered:
            fh.write(f"{ui_type}\t{fraction:.6f}\n")
    written.append(path)

    path = out_dir / "os_kind_counts.tsv"
    with path.open("w", encoding="utf-8") as fh:
        comment(fh)
        fh.write("os\tkind\tcount\n")
        for (os_name, kind), count in sorted(stats.per_os_kind_counts.items()):
            fh.write(f"{os_name}\t{kind}\t{count}\n")
    written.append(path)

    path = out_dir / "spatial_heatmap.tsv"
    with path.open("w", encoding="utf-8") as fh:
        comment(fh)
        for row in stats.spatial_heatmap:
            fh.write("\t".join(f"{cell:.6f}" for cell in row) + "\n")
    written.append(path)

    return written
