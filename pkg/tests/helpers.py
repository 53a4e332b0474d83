"""Shared builders for test fixtures: records, screenshots, detection sidecars."""

from __future__ import annotations

import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

from screenkit.geometry import BBox
from screenkit.records import (
    ElementKind,
    Os,
    RegionCaption,
    ScreenshotRecord,
    UiElement,
    UiType,
)

WORDS = [
    "Save", "Cancel", "Open", "Settings", "Wi-Fi", "Volume", "Search",
    "Close", "Help", "設定", "Übernehmen", "OK",
]


def make_caption(
    raw: str = "Blue button with text 'Save'",
    ui_type: str = "button",
    text: str | None = "Save",
    attributes: tuple[str, ...] = ("blue",),
) -> RegionCaption:
    return RegionCaption(
        ui_type=UiType.coerce(ui_type), text=text, attributes=attributes, raw=raw
    )


def make_element(
    x1: float, y1: float, x2: float, y2: float,
    kind: ElementKind = ElementKind.ICON_WIDGET,
    mark_id: int = 0,
    embedded_text: str | None = None,
    caption: RegionCaption | None = None,
    confidence: float = 0.9,
) -> UiElement:
    return UiElement(
        mark_id=mark_id,
        bbox=BBox(x1, y1, x2, y2),
        kind=kind,
        embedded_text=embedded_text,
        caption=caption,
        source_confidence=confidence,
    )


def make_record(
    image_id: str = "img-001",
    os_name: str = "windows",
    width: int = 640,
    height: int = 480,
    elements: list[UiElement] | None = None,
    source: str = "capture",
) -> ScreenshotRecord:
    if elements is None:
        elements = [
            make_element(10, 10, 60, 40, mark_id=1, caption=make_caption()),
            make_element(100, 50, 180, 90, kind=ElementKind.TEXT, mark_id=2,
                         embedded_text="Cancel",
                         caption=make_caption(raw="Gray text 'Cancel'",
                                              ui_type="other", text="Cancel",
                                              attributes=("gray",))),
        ]
    return ScreenshotRecord(
        image_id=image_id,
        image_path=f"images/{image_id}.png",
        width=width,
        height=height,
        os=Os.coerce(os_name),
        source=source,
        elements=elements,
    )


def random_records(n: int, seed: int = 7) -> list[ScreenshotRecord]:
    """Valid, varied records (unicode text, marked/unmarked mix) for round-trips."""
    rng = random.Random(seed)
    records = []
    for i in range(n):
        width = rng.choice([640, 1024, 1920])
        height = rng.choice([480, 768, 1080])
        elements = []
        n_elements = rng.randint(0, 6)
        for mark, _ in enumerate(range(n_elements), start=1):
            x1 = rng.uniform(0, width - 40)
            y1 = rng.uniform(0, height - 24)
            w = rng.uniform(8, min(200, width - x1))
            h = rng.uniform(8, min(90, height - y1))
            kind = rng.choice(list(ElementKind))
            word = rng.choice(WORDS)
            marked = rng.random() < 0.7
            caption = None
            if marked:
                color = rng.choice(["blue", "red", "dark gray"])
                caption = make_caption(
                    raw=f"{color.capitalize()} button with text '{word}'",
                    ui_type="button", text=word, attributes=tuple(color.split()),
                )
            elements.append(
                UiElement(
                    mark_id=mark if marked else 0,
                    bbox=BBox(round(x1, 2), round(y1, 2), round(x1 + w, 2), round(y1 + h, 2)),
                    kind=kind,
                    embedded_text=word if kind is ElementKind.TEXT else None,
                    caption=caption,
                    source_confidence=round(rng.uniform(0.5, 1.0), 4),
                )
            )
        records.append(
            ScreenshotRecord(
                image_id=f"shot-{i:04d}",
                image_path=f"images/shot-{i:04d}.png",
                width=width,
                height=height,
                os=rng.choice(list(Os)),
                source=rng.choice(["capture", "web-crawl", "vm-fleet"]),
                elements=elements,
            )
        )
    return records


def build_screenshot(path: Path, width: int = 320, height: int = 240, seed: int = 0) -> Path:
    """Small synthetic desktop-ish screenshot: flat background plus window shapes."""
    rng = random.Random(seed)
    img = Image.new("RGB", (width, height), (226, 229, 233))
    draw = ImageDraw.Draw(img)
    for _ in range(rng.randint(2, 5)):
        x1 = rng.randrange(0, width - 60)
        y1 = rng.randrange(0, height - 40)
        x2 = x1 + rng.randrange(40, min(140, width - x1))
        y2 = y1 + rng.randrange(24, min(90, height - y1))
        fill = tuple(rng.randrange(60, 240) for _ in range(3))
        draw.rectangle([x1, y1, x2, y2], fill=fill, outline=(90, 90, 90))
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)
    return path


def write_detection_fixture(
    fixture_dir: Path,
    image_id: str,
    texts: list[tuple[list[float], str, float]],
    icons: list[tuple[list[float], float]],
    width: int,
    height: int,
) -> Path:
    payload = {
        "text_boxes": [
            {"bbox": bbox, "recognized_text": text, "confidence": conf}
            for bbox, text, conf in texts
        ],
        "icon_boxes": [{"bbox": bbox, "confidence": conf} for bbox, conf in icons],
        "image_width": width,
        "image_height": height,
    }
    fixture_dir.mkdir(parents=True, exist_ok=True)
    out = fixture_dir / f"{image_id}.json"
    out.write_text(json.dumps(payload), encoding="utf-8")
    return out


def write_classifier_fixture(path: Path, versions: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"versions": versions}), encoding="utf-8")
    return path


def random_detection_set(rng: random.Random) -> dict:
    """Random raw detections exercising every fusion rule, as plain dicts.

    Coordinates land on a 0.25 lattice. The mix includes near-duplicate icons
    (NMS), texts nested in icons (with eps-boundary pokes), heavily
    overlapping texts, over-wide OCR lines and plain strays.
    """
    width, height = rng.choice([(400, 300), (1000, 600), (640, 640)])

    def snap(v):
        return round(v * 4) / 4

    def rand_box(max_w, max_h):
        x1 = snap(rng.uniform(0, width - 8))
        y1 = snap(rng.uniform(0, height - 6))
        w = snap(rng.uniform(4, min(max_w, width - x1)))
        h = snap(rng.uniform(4, min(max_h, height - y1)))
        return [x1, y1, x1 + max(w, 0.5), y1 + max(h, 0.5)]

    confidences = [0.3, 0.45, 0.5, 0.7, 0.8, 0.9, 0.95]

    icons = []
    for _ in range(rng.randint(0, 10)):
        if icons and rng.random() < 0.3:
            # near-duplicate of an earlier icon to trigger the dedupe
            base = rng.choice(icons)[0]
            if rng.random() < 0.5:
                box = list(base)
            else:
                grow = rng.choice([0.25, 0.5])
                box = [base[0], base[1], min(width, base[2] + grow),
                       min(height, base[3] + grow)]
            icons.append((box, rng.choice(confidences)))
        else:
            icons.append((rand_box(180, 120), rng.choice(confidences)))

    texts = []
    words = ["Save", "Open", "", "Wi-Fi", "OK", "Cancel", "Menu"]
    for _ in range(rng.randint(0, 22)):
        roll = rng.random()
        if roll < 0.15:
            # over-wide OCR line
            w = snap(rng.uniform(0.61, 0.95) * width)
            x1 = snap(rng.uniform(0, width - w))
            y1 = snap(rng.uniform(0, height - 8))
            box = [x1, y1, x1 + w, y1 + 6]
        elif roll < 0.45 and icons:
            # nested in an icon, sometimes poking out around the eps boundary
            ib = rng.choice(icons)[0]
            inset = rng.choice([0.5, 1.0, 2.0])
            box = [ib[0] + inset, ib[1] + inset,
                   max(ib[0] + inset + 0.5, ib[2] - inset),
                   max(ib[1] + inset + 0.5, ib[3] - inset)]
            poke = rng.choice([0.0, 0.0, 1.0, 1.25])
            box = [max(0.0, box[0] - poke), box[1], min(float(width), box[2]), box[3]]
        elif roll < 0.65 and icons:
            # heavy overlap with an icon (IoU somewhere around the threshold)
            ib = rng.choice(icons)[0]
            dx = rng.choice([0.0, 0.5, 1.0, 2.0])
            box = [min(ib[0] + dx, width - 1), ib[1],
                   min(ib[2] + dx, float(width)), ib[3]]
            if box[2] <= box[0]:
                box[2] = box[0] + 0.5
        else:
            box = rand_box(200, 30)
        texts.append((box, rng.choice(words), rng.choice(confidences)))

    return {"texts": texts, "icons": icons, "width": width, "height": height}
