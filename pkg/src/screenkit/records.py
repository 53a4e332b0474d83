"""Annotation record schema.

One :class:`ScreenshotRecord` holds everything known about a single screen:
its image, OS/source metadata and the list of annotated interactive elements.
Field names on the wire are a compatibility contract; see :mod:`screenkit.store`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .geometry import BBox

# mark_id value meaning "not yet assigned" (marks are given out by the sampler)
UNASSIGNED_MARK = 0

DEFAULT_MAX_ELEMENTS = 200


class Os(str, Enum):
    WINDOWS = "windows"
    MACOS = "macos"
    LINUX = "linux"
    UNKNOWN = "unknown"

    @classmethod
    def coerce(cls, value: str) -> "Os":
        try:
            return cls(value.lower())
        except (ValueError, AttributeError):
            return cls.UNKNOWN


class ElementKind(str, Enum):
    TEXT = "text"
    ICON_WIDGET = "icon_widget"


class UiType(str, Enum):
    BUTTON = "button"
    ICON = "icon"
    INPUT = "input"
    DROPDOWN = "dropdown"
    CHECKBOX = "checkbox"
    LINK = "link"
    TAB = "tab"
    MENU = "menu"
    SLIDER = "slider"
    OTHER = "other"

    @classmethod
    def coerce(cls, value: str) -> "UiType":
        """Map anything outside the closed vocabulary to OTHER."""
        try:
            return cls(value.lower())
        except (ValueError, AttributeError):
            return cls.OTHER


@dataclass(frozen=True)
class RegionCaption:
    """Structured caption for one element; ``raw`` keeps the backend output verbatim."""

    ui_type: UiType
    text: Optional[str]
    attributes: tuple[str, ...]
    raw: str

    def __post_init__(self) -> None:
        if not self.raw:
            raise ValueError("caption raw text must be non-empty")
        if not isinstance(self.ui_type, UiType):
            object.__setattr__(self, "ui_type", UiType.coerce(self.ui_type))
        if isinstance(self.attributes, list):
            object.__setattr__(self, "attributes", tuple(self.attributes))


@dataclass(frozen=True)
class UiElement:
    """One annotated interactive element on a screenshot."""

    mark_id: int
    bbox: BBox
    kind: ElementKind
    embedded_text: Optional[str] = None
    caption: Optional[RegionCaption] = None
    source_confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.mark_id < 0:
            raise ValueError("mark_id must be >= 0 (0 means unassigned)")
        if not 0.0 <= self.source_confidence <= 1.0:
            raise ValueError("source_confidence must be in [0, 1]")


@dataclass
class ScreenshotRecord:
    image_id: str
    image_path: str
    width: int
    height: int
    os: Os
    source: str
    elements: list[UiElement] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    def dominant_kind(self) -> ElementKind:
        """Majority element kind; ties and empty records resolve to icon_widget."""
        if not self.elements:
            return ElementKind.ICON_WIDGET
        texts = sum(1 for e in self.elements if e.kind is ElementKind.TEXT)
        icons = len(self.elements) - texts
        return ElementKind.ICON_WIDGET if icons >= texts else ElementKind.TEXT


@dataclass
class DatasetManifest:
    """Corpus-level index: ordered records plus train/eval split labels."""

    records: list[ScreenshotRecord] = field(default_factory=list)
    split_labels: dict[str, str] = field(default_factory=dict)
    schema_version: str = "1"

    def __post_init__(self) -> None:
        for image_id, label in self.split_labels.items():
            if label not in ("train", "eval"):
                raise ValueError(f"bad split label {label!r} for {image_id}")


def validate_record(
    record: ScreenshotRecord, max_elements: int = DEFAULT_MAX_ELEMENTS
) -> list[str]:
    """Collect invariant violations; empty list means the record is valid.

    Violations are data, not faults: this never raises on a malformed record.
    """
    violations: list[str] = []
    if len(record.elements) > max_elements:
        violations.append(
            f"element count {len(record.elements)} exceeds cap {max_elements}"
        )
    seen_marks: set[int] = set()
    for i, el in enumerate(record.elements):
        b = el.bbox
        if b.x2 > record.width or b.y2 > record.height:
            violations.append(f"element {i}: bbox out of bounds {b.as_list()}")
        if el.mark_id != UNASSIGNED_MARK:
            if el.mark_id in seen_marks:
                violations.append(f"element {i}: duplicate mark_id {el.mark_id}")
            seen_marks.add(el.mark_id)
        if el.caption is not None and not el.caption.raw:
            violations.append(f"element {i}: empty caption")
    return violations
