"""Fusing text-detector and icon-detector outputs into interactive elements.

Text boxes are kept, attached to icons, or discarded by four rules applied in
order per text box:

  (a) wider than ``max_text_width_fraction`` of the image -> discarded
      (long text lines are unlikely to be interactive);
  (b) fully contained (within ``containment_eps``) in at least one icon ->
      dropped as a standalone box, its string attached to the smallest
      containing icon as embedded text;
  (c) best IoU against any icon >= ``iou_keep_threshold`` -> kept as a text
      element (the text detector's box wins on accuracy);
  (d) otherwise discarded.

Icon boxes are deduplicated (IoU >= ``icon_nms_iou`` keeps only the
higher-confidence box) and always emitted. Fusion never invents geometry:
every output box is one of the input boxes, icons first in input order, then
surviving texts in input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import httpx

from .geometry import BBox, contains, iou
from .records import ElementKind, UiElement, UNASSIGNED_MARK


@dataclass(frozen=True)
class TextDetection:
    bbox: BBox
    text: str
    confidence: float


@dataclass(frozen=True)
class IconDetection:
    bbox: BBox
    confidence: float


@dataclass
class RawDetections:
    text_boxes: list[TextDetection]
    icon_boxes: list[IconDetection]
    image_width: int
    image_height: int

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        for det in list(self.text_boxes) + list(self.icon_boxes):
            if not 0.0 <= det.confidence <= 1.0:
                raise ValueError(f"confidence out of range: {det.confidence}")
            if det.bbox.x2 > self.image_width or det.bbox.y2 > self.image_height:
                raise ValueError(f"box out of image bounds: {det.bbox.as_list()}")


@dataclass(frozen=True)
class FusionConfig:
    iou_keep_threshold: float = 0.7
    containment_eps: float = 1.0
    max_text_width_fraction: float = 0.6
    icon_nms_iou: float = 0.9

    def __post_init__(self) -> None:
        for name in ("iou_keep_threshold", "max_text_width_fraction", "icon_nms_iou"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]: {v}")
        if self.containment_eps < 0:
            raise ValueError("containment_eps must be >= 0")


def dedupe_icons(
    icon_boxes: list[IconDetection], config: FusionConfig
) -> list[IconDetection]:
    """Greedy suppression by descending confidence (ties: earlier index wins).

    Among icon pairs overlapping at IoU >= ``icon_nms_iou`` only the
    higher-confidence box survives. Survivors keep their input order.
    """
    order = sorted(range(len(icon_boxes)), key=lambda i: (-icon_boxes[i].confidence, i))
    suppressed: set[int] = set()
    kept: set[int] = set()
    for i in order:
        if i in suppressed:
            continue
        kept.add(i)
        for j in order:
            if j == i or j in suppressed or j in kept:
                continue
            if iou(icon_boxes[i].bbox, icon_boxes[j].bbox) >= config.icon_nms_iou:
                suppressed.add(j)
    return [d for i, d in enumerate(icon_boxes) if i in kept]


def _reading_order(texts: list[TextDetection]) -> list[TextDetection]:
    return sorted(texts, key=lambda t: (t.bbox.y1, t.bbox.x1))


def fuse(raw: RawDetections, config: FusionConfig) -> list[UiElement]:
    """Apply the fusion rules; returns elements with marks still unassigned."""
    icons = dedupe_icons(raw.icon_boxes, config)
    attached: dict[int, list[TextDetection]] = {i: [] for i in range(len(icons))}
    kept_texts: list[TextDetection] = []
    width_cap = config.max_text_width_fraction * raw.image_width

    for text in raw.text_boxes:
        if text.bbox.width > width_cap:
            continue
        containing = [
            i
            for i, icon in enumerate(icons)
            if contains(icon.bbox, text.bbox, config.containment_eps)
        ]
        if containing:
            tightest = min(containing, key=lambda i: icons[i].bbox.area)
            attached[tightest].append(text)
            continue
        best = max((iou(text.bbox, icon.bbox) for icon in icons), default=0.0)
        if best >= config.iou_keep_threshold:
            kept_texts.append(text)

    out: list[UiElement] = []
    for i, icon in enumerate(icons):
        parts = [t.text for t in _reading_order(attached[i]) if t.text]
        out.append(
            UiElement(
                mark_id=UNASSIGNED_MARK,
                bbox=icon.bbox,
                kind=ElementKind.ICON_WIDGET,
                embedded_text=" ".join(parts) if parts else None,
                source_confidence=icon.confidence,
            )
        )
    for text in kept_texts:
        out.append(
            UiElement(
                mark_id=UNASSIGNED_MARK,
                bbox=text.bbox,
                kind=ElementKind.TEXT,
                embedded_text=text.text or None,
                source_confidence=text.confidence,
            )
        )
    return out


def detections_to_dict(raw: RawDetections) -> dict:
    return {
        "text_boxes": [
            {"bbox": t.bbox.as_list(), "recognized_text": t.text, "confidence": t.confidence}
            for t in raw.text_boxes
        ],
        "icon_boxes": [
            {"bbox": i.bbox.as_list(), "confidence": i.confidence}
            for i in raw.icon_boxes
        ],
        "image_width": raw.image_width,
        "image_height": raw.image_height,
    }


def detections_from_dict(data: dict) -> RawDetections:
    return RawDetections(
        text_boxes=[
            TextDetection(
                bbox=BBox.from_list(t["bbox"]),
                text=t["recognized_text"],
                confidence=float(t["confidence"]),
            )
            for t in data["text_boxes"]
        ],
        icon_boxes=[
            IconDetection(bbox=BBox.from_list(i["bbox"]), confidence=float(i["confidence"]))
            for i in data["icon_boxes"]
        ],
        image_width=int(data["image_width"]),
        image_height=int(data["image_height"]),
    )


class DetectorBackend(Protocol):
    """Adapter seam for the element detectors; detect must not mutate images."""

    def detect(self, image_id: str, image_bytes: bytes, image_format: str) -> RawDetections: ...


class FixtureDetectorBackend:
    """Reads canned detections from ``<fixture_dir>/<image_id>.json`` sidecars."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def detect(self, image_id: str, image_bytes: bytes, image_format: str) -> RawDetections:
        path = self.fixture_dir / f"{image_id}.json"
        if not path.exists():
            raise FileNotFoundError(f"no canned detections for image_id {image_id!r}")
        return detections_from_dict(json.loads(path.read_text(encoding="utf-8")))


class HttpDetectorBackend:
    """Remote detector adapter: POSTs image bytes, expects the detections JSON."""

    def __init__(
        self,
        url: str,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.url = url
        self.max_in_flight = max_in_flight
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def detect(self, image_id: str, image_bytes: bytes, image_format: str) -> RawDetections:
        response = self._client.post(
            self.url,
            content=image_bytes,
            headers={
                "content-type": f"image/{image_format}",
                "x-image-id": image_id,
            },
        )
        response.raise_for_status()
        return detections_from_dict(response.json())

    def close(self) -> None:
        self._client.close()
