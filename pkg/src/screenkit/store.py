"""Line-delimited on-disk dataset store.

One record per line, UTF-8 JSON, streaming-friendly. Field names and their
order are a compatibility contract:

    image_id, image_path, width, height, os, source,
    elements[].{mark_id, bbox, kind, embedded_text, caption, source_confidence}
    caption.{ui_type, text, attributes, raw}

``bbox`` is serialised as [x1, y1, x2, y2] in absolute pixels.

A dataset directory looks like::

    root/
      manifest.jsonl     # index: one line per record reference + split label
      records/           # record shards (JSONL as above)
      images/            # raster payloads referenced by image_path

Files written by the CLI may start with a header line whose only key is
``_header`` (seed, config hash); readers skip it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

from .geometry import BBox
from .records import (
    DatasetManifest,
    ElementKind,
    Os,
    RegionCaption,
    ScreenshotRecord,
    UiElement,
    UiType,
)

HEADER_KEY = "_header"


class StoreError(Exception):
    """Raised for malformed files; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def caption_to_dict(caption: RegionCaption) -> dict:
    return {
        "ui_type": caption.ui_type.value,
        "text": caption.text,
        "attributes": list(caption.attributes),
        "raw": caption.raw,
    }


def caption_from_dict(data: dict) -> RegionCaption:
    return RegionCaption(
        ui_type=UiType.coerce(data.get("ui_type") or ""),
        text=data.get("text"),
        attributes=tuple(data.get("attributes") or ()),
        raw=data["raw"],
    )


def element_to_dict(el: UiElement) -> dict:
    return {
        "mark_id": el.mark_id,
        "bbox": el.bbox.as_list(),
        "kind": el.kind.value,
        "embedded_text": el.embedded_text,
        "caption": caption_to_dict(el.caption) if el.caption else None,
        "source_confidence": el.source_confidence,
    }


def element_from_dict(data: dict) -> UiElement:
    return UiElement(
        mark_id=int(data["mark_id"]),
        bbox=BBox.from_list(data["bbox"]),
        kind=ElementKind(data["kind"]),
        embedded_text=data.get("embedded_text"),
        caption=caption_from_dict(data["caption"]) if data.get("caption") else None,
        source_confidence=float(data["source_confidence"]),
    )


def record_to_dict(record: ScreenshotRecord) -> dict:
    return {
        "image_id": record.image_id,
        "image_path": record.image_path,
        "width": record.width,
        "height": record.height,
        "os": record.os.value,
        "source": record.source,
        "elements": [element_to_dict(e) for e in record.elements],
    }


def record_from_dict(data: dict) -> ScreenshotRecord:
    return ScreenshotRecord(
        image_id=data["image_id"],
        image_path=data["image_path"],
        width=int(data["width"]),
        height=int(data["height"]),
        os=Os.coerce(data["os"]),
        source=data["source"],
        elements=[element_from_dict(e) for e in data["elements"]],
    )


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_records(
    records: Iterable[ScreenshotRecord],
    path: str | Path,
    header: Optional[dict] = None,
) -> int:
    """Write records one JSON object per line; returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(_dump_line({HEADER_KEY: header}) + "\n")
        for record in records:
            fh.write(_dump_line(record_to_dict(record)) + "\n")
            count += 1
    return count


def iter_jsonl(path: str | Path):
    """Yield (lineno, object) per line, skipping a first-line header object.

    Blank lines are ignored; invalid JSON raises :class:`StoreError` with the
    line number.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if lineno == 1 and isinstance(data, dict) and set(data) == {HEADER_KEY}:
                continue
            yield lineno, data


def read_records(path: str | Path) -> list[ScreenshotRecord]:
    """Read records back; malformed lines raise :class:`StoreError` with the line number."""
    records: list[ScreenshotRecord] = []
    for lineno, data in iter_jsonl(path):
        try:
            records.append(record_from_dict(data))
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"bad record: {exc}", line=lineno) from exc
    return records


class DatasetStore:
    """Single-writer, many-reader dataset directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.manifest_path = self.root / "manifest.jsonl"
        self.records_dir = self.root / "records"
        self.images_dir = self.root / "images"

    def init_layout(self) -> None:
        self.records_dir.mkdir(parents=True, exist_ok=True)
        self.images_dir.mkdir(parents=True, exist_ok=True)

    def add_records(
        self,
        records: list[ScreenshotRecord],
        shard_name: str = "shard-000.jsonl",
        header: Optional[dict] = None,
    ) -> Path:
        """Write one record shard and index its entries in the manifest.

        Re-adding an image_id replaces its manifest entry, so repeating a
        stage over the same inputs does not accumulate duplicate index rows.
        """
        self.init_layout()
        shard = self.records_dir / shard_name
        write_records(records, shard, header=header)
        manifest = self._read_index()
        fresh = {record.image_id for record in records}
        manifest["entries"] = [
            entry for entry in manifest["entries"] if entry["image_id"] not in fresh
        ]
        for record in records:
            manifest["entries"].append(
                {
                    "image_id": record.image_id,
                    "shard": f"records/{shard_name}",
                    "split": manifest["splits"].get(record.image_id),
                }
            )
        self._write_index(manifest)
        return shard

    def load_manifest(self) -> DatasetManifest:
        index = self._read_index()
        by_shard: dict[str, list[str]] = {}
        order: list[str] = []
        splits: dict[str, str] = {}
        for entry in index["entries"]:
            by_shard.setdefault(entry["shard"], []).append(entry["image_id"])
            order.append(entry["image_id"])
            if entry.get("split"):
                splits[entry["image_id"]] = entry["split"]
        loaded: dict[str, ScreenshotRecord] = {}
        for shard, shard_ids in by_shard.items():
            wanted = set(shard_ids)
            for record in read_records(self.root / shard):
                if record.image_id in wanted:
                    loaded[record.image_id] = record
        missing = [image_id for image_id in order if image_id not in loaded]
        if missing:
            raise StoreError(f"manifest references missing records: {missing[:5]}")
        return DatasetManifest(
            records=[loaded[image_id] for image_id in order],
            split_labels=splits,
            schema_version=index["schema_version"],
        )

    def replace_records(
        self, records: list[ScreenshotRecord], header: Optional[dict] = None
    ) -> int:
        """Rewrite existing records in place (matched by image_id within their shard)."""
        index = self._read_index()
        shard_of = {e["image_id"]: e["shard"] for e in index["entries"]}
        updated = {r.image_id: r for r in records}
        missing = sorted(set(updated) - set(shard_of))
        if missing:
            raise StoreError(f"cannot replace records not in the store: {missing[:5]}")
        count = 0
        for shard_name in sorted({shard_of[image_id] for image_id in updated}):
            shard_path = self.root / shard_name
            existing = read_records(shard_path)
            merged = []
            for record in existing:
                if record.image_id in updated:
                    merged.append(updated[record.image_id])
                    count += 1
                else:
                    merged.append(record)
            write_records(merged, shard_path, header=header)
        return count

    def get_record(self, image_id: str) -> Optional[ScreenshotRecord]:
        index = self._read_index()
        shard_name = None
        for entry in index["entries"]:
            if entry["image_id"] == image_id:
                shard_name = entry["shard"]
                break
        if shard_name is None:
            return None
        for record in read_records(self.root / shard_name):
            if record.image_id == image_id:
                return record
        return None

    def image_path(self, image_id: str) -> Optional[Path]:
        if not self.images_dir.is_dir():
            return None
        matches = sorted(self.images_dir.glob(f"{image_id}.*"))
        return matches[0] if matches else None

    def save_splits(self, split_labels: dict[str, str]) -> None:
        index = self._read_index()
        for entry in index["entries"]:
            entry["split"] = split_labels.get(entry["image_id"])
        index["splits"] = dict(split_labels)
        self._write_index(index)

    def _read_index(self) -> dict:
        if not self.manifest_path.exists():
            return {"schema_version": "1", "entries": [], "splits": {}}
        entries = []
        splits: dict[str, str] = {}
        schema_version = "1"
        with self.manifest_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreError(f"invalid JSON: {exc.msg}", line=lineno) from exc
                if set(data) == {HEADER_KEY}:
                    schema_version = data[HEADER_KEY].get("schema_version", "1")
                    continue
                entries.append(data)
                if data.get("split"):
                    splits[data["image_id"]] = data["split"]
        return {"schema_version": schema_version, "entries": entries, "splits": splits}

    def _write_index(self, index: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        with self.manifest_path.open("w", encoding="utf-8") as fh:
            fh.write(_dump_line({HEADER_KEY: {"schema_version": index["schema_version"]}}) + "\n")
            for entry in index["entries"]:
                fh.write(_dump_line(entry) + "\n")
