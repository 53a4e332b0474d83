"""Scoring for grounding and OCR prediction runs.

Grounding metrics: element accuracy (predicted center or click point inside
the ground-truth box, boundary inclusive) and IoU@tau over box predictions.
Text metrics: exact match and token-level F1 after a fixed normalization
(trim, collapse internal whitespace, casefold; punctuation is kept).

Missing predictions count as misses rather than being excluded, so a model
cannot inflate its score by answering selectively. Point predictions score 0
on the IoU metrics and are flagged in the report instead of erroring.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .geometry import BBox, Point, center, iou, point_in
from .records import ElementKind
from .store import StoreError, iter_jsonl

PLATFORMS = ("mobile", "desktop", "web")
DEFAULT_TAUS = (0.2, 0.5, 0.7)


class EvalInputError(Exception):
    """Bad prediction/sample input; carries offending sample ids when known."""

    def __init__(self, message: str, sample_ids: Optional[list[str]] = None):
        self.sample_ids = sample_ids or []
        super().__init__(message)


@dataclass(frozen=True)
class GroundingSample:
    sample_id: str
    image_id: str
    instruction: str
    gt_bbox: BBox
    platform: str
    kind: ElementKind
    gt_text: Optional[str] = None

    def __post_init__(self) -> None:
        if self.platform not in PLATFORMS:
            raise ValueError(f"platform must be one of {PLATFORMS}, got {self.platform!r}")


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    bbox: Optional[BBox] = None
    point: Optional[Point] = None
    pred_text: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.bbox is None) == (self.point is None):
            raise ValueError("prediction needs exactly one of bbox or point")

    def as_point(self) -> Point:
        return self.point if self.point is not None else center(self.bbox)


@dataclass
class MetricsReport:
    element_accuracy: float
    iou_at: dict[float, float]
    em_score: Optional[float]
    f1_score: Optional[float]
    sample_count: int
    ocr_sample_count: int
    point_prediction_count: int
    missing_prediction_count: int
    groups: dict[tuple[str, str], "MetricsReport"] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "element_accuracy": self.element_accuracy,
            "iou_at": {f"{tau:g}": v for tau, v in sorted(self.iou_at.items())},
            "em_score": self.em_score,
            "f1_score": self.f1_score,
            "sample_count": self.sample_count,
            "ocr_sample_count": self.ocr_sample_count,
            "point_prediction_count": self.point_prediction_count,
            "missing_prediction_count": self.missing_prediction_count,
        }
        if self.groups:
            out["groups"] = {
                f"{platform}/{kind}": sub.to_json_dict()
                for (platform, kind), sub in sorted(self.groups.items())
            }
        return out


def _index_predictions(preds: Sequence[Prediction]) -> dict[str, Prediction]:
    by_id: dict[str, Prediction] = {}
    dupes = []
    for pred in preds:
        if pred.sample_id in by_id:
            dupes.append(pred.sample_id)
        by_id[pred.sample_id] = pred
    if dupes:
        raise EvalInputError(f"duplicate sample_id in predictions: {sorted(set(dupes))}", dupes)
    return by_id


def element_accuracy(preds: Sequence[Prediction], samples: Sequence[GroundingSample]) -> float:
    """Fraction of samples whose predicted center/point lands inside the gt box."""
    if not samples:
        raise EvalInputError("no samples to score")
    by_id = _index_predictions(preds)
    hits = 0
    for sample in samples:
        pred = by_id.get(sample.sample_id)
        if pred is None:
            continue
        if point_in(sample.gt_bbox, pred.as_point()):
            hits += 1
    return hits / len(samples)


def iou_at(preds: Sequence[Prediction], samples: Sequence[GroundingSample], tau: float) -> float:
    """Fraction of samples whose predicted box overlaps gt at IoU >= tau."""
    if not 0.0 < tau <= 1.0:
        raise EvalInputError(f"tau must be in (0, 1], got {tau}")
    if not samples:
        raise EvalInputError("no samples to score")
    by_id = _index_predictions(preds)
    hits = 0
    for sample in samples:
        pred = by_id.get(sample.sample_id)
        if pred is None or pred.bbox is None:
            continue
        if iou(pred.bbox, sample.gt_bbox) >= tau:
            hits += 1
    return hits / len(samples)


def normalize_text(text: str) -> str:
    return " ".join(text.split()).casefold()


def em_score(preds: Sequence[Prediction], samples: Sequence[GroundingSample]) -> float:
    """Normalized exact match over samples carrying gt_text."""
    ocr = [s for s in samples if s.gt_text is not None]
    if not ocr:
        raise EvalInputError("no samples with gt_text to score")
    by_id = _index_predictions(preds)
    hits = 0
    for sample in ocr:
        pred = by_id.get(sample.sample_id)
        if pred is None or pred.pred_text is None:
            continue
        if normalize_text(pred.pred_text) == normalize_text(sample.gt_text):
            hits += 1
    return hits / len(ocr)


def _token_f1(pred_text: str, gt_text: str) -> float:
    pred_tokens = Counter(normalize_text(pred_text).split())
    gt_tokens = Counter(normalize_text(gt_text).split())
    overlap = sum((pred_tokens & gt_tokens).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred_tokens.values())
    recall = overlap / sum(gt_tokens.values())
    return 2 * precision * recall / (precision + recall)


def f1_score(preds: Sequence[Prediction], samples: Sequence[GroundingSample]) -> float:
    """Mean token-multiset F1 over samples carrying gt_text."""
    ocr = [s for s in samples if s.gt_text is not None]
    if not ocr:
        raise EvalInputError("no samples with gt_text to score")
    by_id = _index_predictions(preds)
    total = 0.0
    for sample in ocr:
        pred = by_id.get(sample.sample_id)
        if pred is None or pred.pred_text is None:
            continue
        total += _token_f1(pred.pred_text, sample.gt_text)
    return total / len(ocr)


# ----------------------------------------------------------------------
# file handling

def sample_from_dict(data: dict) -> GroundingSample:
    return GroundingSample(
        sample_id=str(data["sample_id"]),
        image_id=str(data["image_id"]),
        instruction=str(data["instruction"]),
        gt_bbox=BBox.from_list(data["gt_bbox"]),
        platform=str(data["platform"]),
        kind=ElementKind(data["kind"]),
        gt_text=None if data.get("gt_text") is None else str(data["gt_text"]),
    )


def prediction_from_dict(data: dict) -> Prediction:
    bbox = data.get("bbox")
    point = data.get("point")
    return Prediction(
        sample_id=str(data["sample_id"]),
        bbox=None if bbox is None else BBox.from_list(bbox),
        point=None if point is None else Point(float(point[0]), float(point[1])),
        pred_text=None if data.get("pred_text") is None else str(data["pred_text"]),
    )


def read_samples(path: str | Path) -> list[GroundingSample]:
    samples = []
    for lineno, data in iter_jsonl(path):
        try:
            samples.append(sample_from_dict(data))
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"bad sample: {exc}", line=lineno) from exc
    return samples


def read_predictions(path: str | Path) -> list[Prediction]:
    preds = []
    for lineno, data in iter_jsonl(path):
        try:
            preds.append(prediction_from_dict(data))
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"bad prediction: {exc}", line=lineno) from exc
    return preds


# ----------------------------------------------------------------------
# full report

def _score_subset(
    preds_by_id: dict[str, Prediction],
    samples: Sequence[GroundingSample],
    taus: Sequence[float],
) -> MetricsReport:
    subset_preds = [
        preds_by_id[s.sample_id] for s in samples if s.sample_id in preds_by_id
    ]
    ocr = [s for s in samples if s.gt_text is not None]
    report = MetricsReport(
        element_accuracy=element_accuracy(subset_preds, samples),
        iou_at={tau: iou_at(subset_preds, samples, tau) for tau in taus},
        em_score=em_score(subset_preds, samples) if ocr else None,
        f1_score=f1_score(subset_preds, samples) if ocr else None,
        sample_count=len(samples),
        ocr_sample_count=len(ocr),
        point_prediction_count=sum(1 for p in subset_preds if p.bbox is None),
        missing_prediction_count=sum(
            1 for s in samples if s.sample_id not in preds_by_id
        ),
    )
    return report


def evaluate_run(
    preds: Sequence[Prediction],
    samples: Sequence[GroundingSample],
    taus: Sequence[float] = DEFAULT_TAUS,
) -> MetricsReport:
    """Score a prediction run: overall plus per-(platform, kind) breakdown."""
    if not preds:
        raise EvalInputError("prediction set is empty")
    if not samples:
        raise EvalInputError("sample set is empty")
    by_id = _index_predictions(preds)
    known = {s.sample_id for s in samples}
    unmatched = sorted(set(by_id) - known)
    if unmatched:
        raise EvalInputError(
            f"predictions reference unknown sample_ids: {unmatched}", unmatched
        )
    if not set(by_id) & known:
        raise EvalInputError("no prediction matches any sample")

    report = _score_subset(by_id, samples, taus)
    grouped: dict[tuple[str, str], list[GroundingSample]] = {}
    for sample in samples:
        grouped.setdefault((sample.platform, sample.kind.value), []).append(sample)
    for key, members in sorted(grouped.items()):
        report.groups[key] = _score_subset(by_id, members, taus)
    return report


def evaluate_files(
    pred_path: str | Path,
    sample_path: str | Path,
    taus: Sequence[float] = DEFAULT_TAUS,
) -> MetricsReport:
    return evaluate_run(read_predictions(pred_path), read_samples(sample_path), taus)
