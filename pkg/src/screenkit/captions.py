"""Region caption backends, rule-based parsing and validation.

Backends sit behind a small contract so a remote vision-language endpoint and
a deterministic stub are interchangeable. Raw captions are free text like
"Blue button with Wi-Fi icon"; parsing lifts them into a structured form
(type, visible text, attributes) with deterministic rules over a closed
vocabulary -- downstream consumers need structure, not prose.
"""

from __future__ import annotations

import base64
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import httpx

from .geometry import BBox
from .records import ElementKind, RegionCaption, ScreenshotRecord, UiType

# Modifier words recognised as attributes when they precede the type word.
COLOR_WORDS = frozenset(
    """red orange yellow green blue purple pink brown black white gray grey
    cyan magenta teal violet indigo maroon navy olive silver gold""".split()
)
STATE_WORDS = frozenset({"disabled", "selected", "focused"})

_TYPE_WORDS = {t.value for t in UiType if t is not UiType.OTHER}
_QUOTED = re.compile(r"'([^']+)'|\"([^\"]+)\"")
_TEXT_MARKER = re.compile(r"\b(?:with text|labeled)\b", re.IGNORECASE)


@dataclass(frozen=True)
class ElementRef:
    mark_id: int
    bbox: BBox
    kind: ElementKind


@dataclass
class CaptionRequest:
    image_id: str
    elements: list[ElementRef]
    prompt_template_id: str = "default"
    marked_image: Optional[bytes] = None

    def mark_ids(self) -> list[int]:
        return [e.mark_id for e in self.elements]


@dataclass
class CaptionResponse:
    entries: dict[int, str]
    backend_id: str
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        for mark_id, raw in self.entries.items():
            if not raw.strip():
                raise ValueError(f"empty caption entry for mark {mark_id}")


@dataclass(frozen=True)
class RetryPolicy:
    """``max_attempts`` counts backend calls in total (first try included)."""

    max_attempts: int = 2

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


class CaptionCoverageError(Exception):
    """Raised when some marks stay uncaptioned after all retries."""

    def __init__(self, missing: list[int]):
        self.missing = missing
        super().__init__(f"no caption for mark ids {missing} after retries")


class CaptionerBackend(Protocol):
    backend_id: str

    def caption(self, request: CaptionRequest) -> CaptionResponse: ...


class TemplateCaptionerBackend:
    """Deterministic stub: captions are a pure function of (image_id, mark_id)."""

    def __init__(self, template: str = "Blue button with icon {mark_id}"):
        self.backend_id = "template-stub"
        self.template = template

    def caption(self, request: CaptionRequest) -> CaptionResponse:
        entries = {
            ref.mark_id: self.template.format(
                image_id=request.image_id, mark_id=ref.mark_id, kind=ref.kind.value
            )
            for ref in request.elements
        }
        return CaptionResponse(entries=entries, backend_id=self.backend_id)


class FixtureCaptionerBackend:
    """Stub configured by a sidecar file: {image_id: {mark_id: caption}}."""

    def __init__(self, path: str | Path):
        self.backend_id = "fixture-stub"
        self._table = json.loads(Path(path).read_text(encoding="utf-8"))

    def caption(self, request: CaptionRequest) -> CaptionResponse:
        if request.image_id not in self._table:
            raise KeyError(f"no fixture captions for image_id {request.image_id!r}")
        canned = self._table[request.image_id]
        entries = {
            ref.mark_id: canned[str(ref.mark_id)]
            for ref in request.elements
            if str(ref.mark_id) in canned
        }
        return CaptionResponse(entries=entries, backend_id=self.backend_id)


class HttpCaptionerBackend:
    """Remote captioner adapter.

    Request: JSON with image_id, prompt_template_id, elements
    [{mark_id, bbox, kind}] and base64 image bytes. Response: JSON with
    entries [{mark_id, caption}].
    """

    def __init__(
        self,
        url: str,
        timeout: float = 60.0,
        max_in_flight: int = 2,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.backend_id = f"http:{url}"
        self.url = url
        self.max_in_flight = max_in_flight
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def caption(self, request: CaptionRequest) -> CaptionResponse:
        payload = {
            "image_id": request.image_id,
            "prompt_template_id": request.prompt_template_id,
            "elements": [
                {"mark_id": e.mark_id, "bbox": e.bbox.as_list(), "kind": e.kind.value}
                for e in request.elements
            ],
            "image_b64": base64.b64encode(request.marked_image or b"").decode("ascii"),
        }
        started = time.perf_counter()
        response = self._client.post(self.url, json=payload)
        response.raise_for_status()
        data = response.json()
        entries = {int(e["mark_id"]): e["caption"] for e in data["entries"]}
        return CaptionResponse(
            entries=entries,
            backend_id=data.get("backend_id", self.backend_id),
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )

    def close(self) -> None:
        self._client.close()


def caption_elements(
    request: CaptionRequest,
    backend: CaptionerBackend,
    retry_policy: RetryPolicy = RetryPolicy(),
) -> CaptionResponse:
    """Caption every requested mark, re-querying only the missing ids.

    The incoming request must carry consecutive marks starting at 1 (internal
    retry sub-requests are allowed to carry a sparse subset). Entries that are
    empty after trimming count as missing.
    """
    ids = request.mark_ids()
    if ids != list(range(1, len(ids) + 1)):
        raise ValueError(f"mark ids must be consecutive from 1, got {ids}")

    wanted = set(ids)
    collected: dict[int, str] = {}
    latency = 0.0
    backend_id = ""
    for _ in range(retry_policy.max_attempts):
        missing = sorted(wanted - set(collected))
        if not missing:
            break
        sub = CaptionRequest(
            image_id=request.image_id,
            elements=[e for e in request.elements if e.mark_id in missing],
            prompt_template_id=request.prompt_template_id,
            marked_image=request.marked_image,
        )
        response = backend.caption(sub)
        latency += response.latency_ms
        backend_id = response.backend_id
        for mark_id, raw in response.entries.items():
            if mark_id in wanted and raw.strip():
                collected.setdefault(mark_id, raw.strip())

    still_missing = sorted(wanted - set(collected))
    if still_missing:
        raise CaptionCoverageError(still_missing)
    return CaptionResponse(entries=collected, backend_id=backend_id, latency_ms=latency)


def parse_caption(raw: str) -> RegionCaption:
    """Lift a raw caption into (ui_type, text, attributes); total on any input.

    ui_type is the first vocabulary word in the caption (else ``other``); the
    visible text is the first quoted span, else whatever follows a
    "with text" / "labeled" marker; attributes are color/state words that
    precede the type word.
    """
    if not raw:
        raise ValueError("raw caption must be non-empty")
    tokens = re.findall(r"[a-z]+", raw.lower())

    ui_type = UiType.OTHER
    type_pos: Optional[int] = None
    for i, tok in enumerate(tokens):
        if tok in _TYPE_WORDS:
            ui_type = UiType(tok)
            type_pos = i
            break

    text: Optional[str] = None
    m = _QUOTED.search(raw)
    if m:
        text = m.group(1) or m.group(2)
    else:
        marker = _TEXT_MARKER.search(raw)
        if marker:
            tail = raw[marker.end():].strip().strip(".,;:!?")
            if tail:
                text = tail

    attributes: list[str] = []
    prefix = tokens if type_pos is None else tokens[:type_pos]
    for tok in prefix:
        if tok in COLOR_WORDS or tok in STATE_WORDS:
            attributes.append(tok)

    return RegionCaption(ui_type=ui_type, text=text, attributes=tuple(attributes), raw=raw)


@dataclass(frozen=True)
class CaptionLimits:
    min_chars: int = 5
    max_chars: int = 120


@dataclass
class CaptionValidation:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_captions(
    record: ScreenshotRecord, limits: CaptionLimits = CaptionLimits()
) -> CaptionValidation:
    """Flag length violations, coverage gaps and duplicate raw captions.

    Only marked elements (mark_id > 0) are expected to carry captions;
    duplicates are a warning, everything else a violation.
    """
    result = CaptionValidation()
    seen_raw: dict[str, int] = {}
    for el in record.elements:
        if el.mark_id == 0:
            continue
        if el.caption is None:
            result.violations.append(f"mark {el.mark_id}: missing caption")
            continue
        raw = el.caption.raw
        if not raw.strip():
            result.violations.append(f"mark {el.mark_id}: empty caption")
            continue
        if len(raw) < limits.min_chars:
            result.violations.append(
                f"mark {el.mark_id}: caption too short ({len(raw)} < {limits.min_chars})"
            )
        elif len(raw) > limits.max_chars:
            result.violations.append(
                f"mark {el.mark_id}: caption too long ({len(raw)} > {limits.max_chars})"
            )
        if raw in seen_raw:
            result.warnings.append(
                f"mark {el.mark_id}: duplicate caption (same raw as mark {seen_raw[raw]})"
            )
        else:
            seen_raw[raw] = el.mark_id
    return result
