"""Single command line entry point for every pipeline stage.

Subcommands are thin drivers over the library modules. Exit codes: 0 on
success, 1 on a stage error, 2 on a configuration error. Errors go to stderr
as one JSON object per line so wrapper scripts can parse them; human-oriented
summaries go to stdout.

Stage commands are single-instance per dataset root (advisory lock file);
``serve`` runs without the lock since it is read-mostly.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import yaml
from filelock import FileLock, Timeout
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from . import __version__
from .captions import (
    CaptionCoverageError,
    CaptionRequest,
    ElementRef,
    FixtureCaptionerBackend,
    HttpCaptionerBackend,
    TemplateCaptionerBackend,
    caption_elements,
    parse_caption,
    validate_captions,
)
from .config import ConfigError, PipelineConfig, load_config
from .evalharness import EvalInputError, evaluate_files
from .figures import render_metrics_figure, render_stats_figures
from .fusion import FixtureDetectorBackend, HttpDetectorBackend, fuse
from .marking import render_marks
from .records import Os, ScreenshotRecord, validate_record
from .reporting import metrics_table, write_stats_tables
from .sampling import assign_marks, derive_seed, sample_elements
from .sourcing import (
    Orchestrator,
    PhaseError,
    ScriptedClassifierBackend,
    SeedError,
)
from .sourcing.orchestrator import OutstandingReviewError
from .splits import SplitError, make_benchmark_split
from .stats import compute_stats
from .store import DatasetStore, StoreError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class StageError(Exception):
    pass


def _emit_error(kind: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def _artifact_header(config: PipelineConfig) -> dict:
    return {
        "schema_version": "1",
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "tool_version": __version__,
    }


def _header_line(config: PipelineConfig) -> str:
    return f"seed={config.seed} config_hash={config.config_hash()} tool_version={__version__}"


# ----------------------------------------------------------------------
# backend resolution

def _make_detector(spec: str):
    if spec.startswith("fixture:"):
        return FixtureDetectorBackend(spec[len("fixture:"):])
    if spec.startswith(("http://", "https://")):
        return HttpDetectorBackend(spec)
    raise StageError(f"unsupported detector backend {spec!r}")


def _make_captioner(spec: str):
    if spec == "template":
        return TemplateCaptionerBackend()
    if spec.startswith("template:"):
        return TemplateCaptionerBackend(spec[len("template:"):])
    if spec.startswith("fixture:"):
        return FixtureCaptionerBackend(spec[len("fixture:"):])
    if spec.startswith(("http://", "https://")):
        return HttpCaptionerBackend(spec)
    raise StageError(f"unsupported captioner backend {spec!r}")


class _NullClassifier:
    """Placeholder for serve-mode replays when no fixture is configured."""

    model_version = None

    def train(self, pool):
        raise StageError("no classifier backend configured")

    def classify(self, images):
        raise StageError("no classifier backend configured")

    def evaluate(self, holdout):
        raise StageError("no classifier backend configured")


def _make_orchestrator(config: PipelineConfig, require_classifier: bool = True) -> Orchestrator:
    fixture = config.backends.classifier_fixture
    if fixture:
        backend = ScriptedClassifierBackend.from_file(fixture)
    elif require_classifier:
        raise StageError("filter stages need backends.classifier_fixture in the config")
    else:
        backend = _NullClassifier()
    return Orchestrator.replay(
        config.orchestrator,
        backend,
        config.paths.journal,
        intake_path=config.paths.intake,
    )


# ----------------------------------------------------------------------
# subcommands

def _read_id_list(path: str) -> list[str]:
    ids = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            ids.append(line)
    if not ids:
        raise StageError(f"no image ids found in {path}")
    return ids


def cmd_filter(config: PipelineConfig, args: argparse.Namespace) -> int:
    orch = _make_orchestrator(config)
    if args.stage == "seed":
        if not args.input:
            raise StageError("--input (per-class seed id file) is required for --stage seed")
        seed_sets = yaml.safe_load(Path(args.input).read_text(encoding="utf-8"))
        if not isinstance(seed_sets, dict):
            raise StageError("seed input must map class names to id lists")
        state = orch.stage1_seed(seed_sets)
        print(json.dumps({"stage": "seed", "phase": state.phase.value, "round": state.round,
                          "model_version": state.model_version}))
    elif args.stage == "ingest":
        if not args.input:
            raise StageError("--input (image id list) is required for --stage ingest")
        items = orch.stage2_ingest_batch(_read_id_list(args.input))
        print(json.dumps({"stage": "ingest", "round": orch.state.round,
                          "enqueued": len(items),
                          "queue": orch.queue.counts(orch.state.round)}))
    elif args.stage == "retrain":
        state = orch.stage2_absorb_verdicts_and_retrain()
        print(json.dumps({"stage": "retrain", "phase": state.phase.value,
                          "round": state.round, "model_version": state.model_version,
                          "frozen_version": state.frozen_version}))
    elif args.stage == "bulk":
        if not args.input:
            raise StageError("--input (image id list) is required for --stage bulk")
        kept = orch.stage3_bulk_filter(_read_id_list(args.input))
        print(json.dumps({"stage": "bulk", "kept": len(kept),
                          "intake": config.paths.intake}))
    else:  # pragma: no cover - argparse restricts choices
        raise StageError(f"unknown stage {args.stage!r}")
    return 0


def _load_sidecar_meta(image_path: Path) -> dict:
    sidecar = image_path.with_suffix(".meta.json")
    if sidecar.exists():
        return json.loads(sidecar.read_text(encoding="utf-8"))
    return {}


def cmd_annotate(config: PipelineConfig, args: argparse.Namespace) -> int:
    detector = _make_detector(config.backends.detector)
    store = DatasetStore(config.paths.dataset_root)
    store.init_layout()
    input_dir = Path(args.input)
    image_paths = sorted(
        p for p in input_dir.iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES
    ) if input_dir.is_dir() else []
    if not image_paths:
        raise StageError(f"no images found under {args.input}")

    marked_dir = Path(config.paths.dataset_root) / "marked"
    marked_dir.mkdir(parents=True, exist_ok=True)
    records: list[ScreenshotRecord] = []
    for image_path in image_paths:
        image_id = image_path.stem
        image_bytes = image_path.read_bytes()
        detections = detector.detect(image_id, image_bytes, image_path.suffix.lstrip("."))
        fused = fuse(detections, config.fusion)

        with Image.open(image_path) as img:
            img.load()
            width, height = img.size
            elements = list(fused)
            if fused:
                sampler = replace(
                    config.sampler, rng_seed=derive_seed(config.seed, image_id)
                )
                subset = sample_elements(fused, sampler)
                marked = assign_marks(subset)
                for (mark_id, marked_el), original in zip(marked.entries, subset):
                    elements[elements.index(original)] = marked_el
                marked_img = render_marks(img, marked)
                info = PngInfo()
                info.add_text("Description", _header_line(config))
                marked_img.save(marked_dir / f"{image_id}.png", pnginfo=info)

        shutil.copyfile(image_path, store.images_dir / image_path.name)
        meta = _load_sidecar_meta(image_path)
        record = ScreenshotRecord(
            image_id=image_id,
            image_path=f"images/{image_path.name}",
            width=width,
            height=height,
            os=Os.coerce(meta.get("os", "unknown")),
            source=meta.get("source", "capture"),
            elements=elements,
        )
        violations = validate_record(record, config.max_elements)
        if violations:
            raise StageError(f"record {image_id!r} failed validation: {violations}")
        records.append(record)

    shard = store.add_records(records, shard_name=args.shard, header=_artifact_header(config))
    print(json.dumps({"records_written": len(records), "shard": str(shard)}))
    return 0


def cmd_caption(config: PipelineConfig, args: argparse.Namespace) -> int:
    backend = _make_captioner(config.backends.captioner)
    store = DatasetStore(config.paths.dataset_root)
    manifest = store.load_manifest()
    if not manifest.records:
        raise StageError("no records in the dataset store; run annotate first")

    marked_dir = Path(config.paths.dataset_root) / "marked"
    updated: list[ScreenshotRecord] = []
    all_violations: list[str] = []
    all_warnings: list[str] = []
    captioned = 0
    for record in manifest.records:
        marked_els = sorted(
            (el for el in record.elements if el.mark_id > 0), key=lambda e: e.mark_id
        )
        if not marked_els:
            continue
        marked_path = marked_dir / f"{record.image_id}.png"
        request = CaptionRequest(
            image_id=record.image_id,
            elements=[ElementRef(el.mark_id, el.bbox, el.kind) for el in marked_els],
            marked_image=marked_path.read_bytes() if marked_path.exists() else None,
        )
        response = caption_elements(request, backend, config.caption_retry)
        by_mark = {
            el.mark_id: replace(el, caption=parse_caption(response.entries[el.mark_id]))
            for el in marked_els
        }
        new_elements = [by_mark.get(el.mark_id, el) if el.mark_id > 0 else el
                        for el in record.elements]
        new_record = replace(record, elements=new_elements)
        validation = validate_captions(new_record, config.caption_limits)
        all_violations += [f"{record.image_id}: {v}" for v in validation.violations]
        all_warnings += [f"{record.image_id}: {w}" for w in validation.warnings]
        captioned += len(marked_els)
        updated.append(new_record)

    if updated:
        store.replace_records(updated, header=_artifact_header(config))
    print(json.dumps({
        "records_updated": len(updated),
        "captions_written": captioned,
        "violations": all_violations,
        "warnings": all_warnings,
    }))
    return 0


def cmd_split(config: PipelineConfig, args: argparse.Namespace) -> int:
    store = DatasetStore(config.paths.dataset_root)
    manifest = store.load_manifest()
    new_manifest = make_benchmark_split(manifest, args.eval_size, config.seed)
    store.save_splits(new_manifest.split_labels)
    labels = list(new_manifest.split_labels.values())
    print(json.dumps({
        "eval": labels.count("eval"),
        "train": labels.count("train"),
        "seed": config.seed,
    }))
    return 0


def cmd_stats(config: PipelineConfig, args: argparse.Namespace) -> int:
    store = DatasetStore(config.paths.dataset_root)
    manifest = store.load_manifest()
    stats = compute_stats(manifest.records, config.stats.heatmap_grid)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    stats_json = out_dir / "stats.json"
    payload = {"_header": _artifact_header(config)}
    payload.update(stats.to_json_dict())
    stats_json.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    tables = write_stats_tables(stats, out_dir, header_line=_header_line(config))
    figures = render_stats_figures(stats, out_dir,
                                   metadata={"Description": _header_line(config)})
    print(json.dumps({
        "records": stats.record_count,
        "elements": stats.element_count,
        "mean_caption_length": stats.mean_caption_length,
        "outputs": [str(stats_json)] + [str(p) for p in tables + figures],
    }))
    return 0


def cmd_eval(config: PipelineConfig, args: argparse.Namespace) -> int:
    report = evaluate_files(args.pred, args.samples, tuple(config.eval.taus))
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = {"_header": _artifact_header(config)}
    payload.update(report.to_json_dict())
    (out_dir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    table = metrics_table(report)
    (out_dir / "table.txt").write_text(
        f"# {_header_line(config)}\n{table}", encoding="utf-8"
    )
    render_metrics_figure(report, out_dir / "metrics.png",
                          metadata={"Description": _header_line(config)})
    sys.stdout.write(table)
    return 0


def cmd_serve(config: PipelineConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    orch = _make_orchestrator(config, require_classifier=False)
    store = DatasetStore(config.paths.dataset_root)
    app = create_app(
        orch,
        store,
        reviewer_token=config.service.reviewer_token,
        static_dir=config.service.static_dir,
    )
    uvicorn.run(app, host=args.host or config.service.host,
                port=args.port or config.service.port, log_level="warning")
    return 0


# ----------------------------------------------------------------------
# argument parsing and dispatch

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenkit",
        description="GUI screenshot dataset pipeline: filter, annotate, caption, "
                    "split, stats, eval, serve.",
    )
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="override the pipeline seed")
    parser.add_argument("--profile", choices=("test", "full"),
                        help="test profile shrinks scale knobs, thresholds unchanged")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="three-stage source filtering")
    p.add_argument("--stage", choices=("seed", "ingest", "retrain", "bulk"), required=True)
    p.add_argument("--input", help="stage input file (seed mapping or image id list)")

    p = sub.add_parser("annotate", help="detect, fuse, sample and mark screenshots")
    p.add_argument("--input", required=True, help="directory of screenshots")
    p.add_argument("--shard", default="shard-000.jsonl", help="output shard file name")

    p = sub.add_parser("caption", help="caption marked elements and validate")

    p = sub.add_parser("split", help="stratified train/eval split")
    p.add_argument("--eval-size", type=int, required=True)

    p = sub.add_parser("stats", help="dataset statistics, tables and figures")
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("eval", help="score a prediction run")
    p.add_argument("--pred", required=True, help="prediction file")
    p.add_argument("--samples", required=True, help="ground truth sample file")
    p.add_argument("--output", required=True, help="output directory")

    p = sub.add_parser("serve", help="run the review HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


_COMMANDS = {
    "filter": cmd_filter,
    "annotate": cmd_annotate,
    "caption": cmd_caption,
    "split": cmd_split,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "serve": cmd_serve,
}

_STAGE_ERRORS = (
    StageError,
    StoreError,
    PhaseError,
    SeedError,
    SplitError,
    EvalInputError,
    CaptionCoverageError,
    OutstandingReviewError,
    FileNotFoundError,
    KeyError,
    ValueError,
    OSError,
)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    flag_overrides: dict = {}
    if args.seed is not None:
        flag_overrides["seed"] = args.seed
    if args.profile is not None:
        flag_overrides["profile"] = args.profile

    try:
        config = load_config(args.config, flag_overrides=flag_overrides)
    except ConfigError as exc:
        _emit_error("config", exc)
        return 2

    command = _COMMANDS[args.command]
    try:
        if args.command == "serve":
            return command(config, args)
        root = Path(config.paths.dataset_root)
        root.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(root / ".screenkit.lock"))
        try:
            with lock.acquire(timeout=0):
                return command(config, args)
        except Timeout as exc:
            raise StageError(
                f"another stage command holds the lock for {root}"
            ) from exc
    except _STAGE_ERRORS as exc:
        _emit_error(type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
