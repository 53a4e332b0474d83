"""Detector fusion rules, checked case by case and against the exhaustive oracle."""

import random

import httpx
import pytest

from helpers import random_detection_set, write_detection_fixture
from oracles import oracle_fuse
from screenkit.fusion import (
    FixtureDetectorBackend,
    FusionConfig,
    HttpDetectorBackend,
    IconDetection,
    RawDetections,
    TextDetection,
    dedupe_icons,
    detections_from_dict,
    detections_to_dict,
    fuse,
)
from screenkit.geometry import BBox
from screenkit.records import ElementKind, UNASSIGNED_MARK

CFG = FusionConfig()


def raw_from_plain(plain: dict) -> RawDetections:
    return RawDetections(
        text_boxes=[
            TextDetection(bbox=BBox(*b), text=t, confidence=c)
            for b, t, c in plain["texts"]
        ],
        icon_boxes=[
            IconDetection(bbox=BBox(*b), confidence=c) for b, c in plain["icons"]
        ],
        image_width=plain["width"],
        image_height=plain["height"],
    )


def fused_as_dicts(elements) -> list[dict]:
    return [
        {
            "bbox": el.bbox.as_list(),
            "kind": el.kind.value,
            "embedded_text": el.embedded_text,
            "source_confidence": el.source_confidence,
        }
        for el in elements
    ]


class TestWidthRule:
    def test_wide_text_discarded_even_when_contained(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 620, 100], 0.9)],
            "texts": [([5, 10, 605.5, 30], "too wide", 0.9)],  # width 600.5 > 600
            "width": 1000, "height": 300,
        })
        out = fuse(raw, CFG)
        assert len(out) == 1
        assert out[0].embedded_text is None

    def test_exactly_cap_width_survives(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 620, 100], 0.9)],
            "texts": [([5, 10, 605, 30], "at the cap", 0.9)],  # width 600 == 0.6*1000
            "width": 1000, "height": 300,
        })
        out = fuse(raw, CFG)
        assert out[0].embedded_text == "at the cap"


class TestContainmentRule:
    def test_contained_text_attaches(self):
        raw = raw_from_plain({
            "icons": [([10, 10, 100, 60], 0.8)],
            "texts": [([20, 20, 80, 40], "Save", 0.9)],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert len(out) == 1
        assert out[0].kind is ElementKind.ICON_WIDGET
        assert out[0].embedded_text == "Save"

    def test_eps_pixel_poke_still_attaches(self):
        raw = raw_from_plain({
            "icons": [([10, 10, 100, 60], 0.8)],
            "texts": [([9, 20, 80, 40], "Save", 0.9)],  # 1px out, eps=1 absorbs
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert out[0].embedded_text == "Save"

    def test_beyond_eps_does_not_attach(self):
        raw = raw_from_plain({
            "icons": [([10, 10, 100, 60], 0.8)],
            "texts": [([8.75, 20, 80, 40], "Save", 0.9)],  # 1.25px out
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        # not contained, IoU well under 0.7 -> dropped
        assert out[0].embedded_text is None
        assert len(out) == 1

    def test_smallest_containing_icon_wins(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 200, 150], 0.8), ([10, 10, 60, 40], 0.8)],
            "texts": [([15, 15, 50, 30], "inner", 0.9)],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert out[0].embedded_text is None       # big icon
        assert out[1].embedded_text == "inner"     # tight icon

    def test_reading_order_join(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 100, 100], 0.8)],
            "texts": [
                ([10, 60, 40, 70], "world", 0.9),
                ([10, 10, 40, 20], "hello", 0.9),
                ([50, 10, 80, 20], "big", 0.9),
            ],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert out[0].embedded_text == "hello big world"

    def test_empty_strings_skipped_in_join(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 100, 100], 0.8)],
            "texts": [([10, 10, 40, 20], "", 0.9)],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert out[0].embedded_text is None


class TestIouRule:
    def test_exact_point_seven_kept(self):
        # icon (0,0,10,8.5) area 85; text (0,1.5,10,10) area 85; overlap 70
        # IoU = 70 / (85 + 85 - 70) = 0.7 exactly
        raw = raw_from_plain({
            "icons": [([0, 0, 10, 8.5], 0.8)],
            "texts": [([0, 1.5, 10, 10], "Save", 0.9)],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        kinds = [el.kind for el in out]
        assert kinds == [ElementKind.ICON_WIDGET, ElementKind.TEXT]
        assert out[1].embedded_text == "Save"

    def test_just_under_threshold_dropped(self):
        # same shape but a hair less overlap
        raw = raw_from_plain({
            "icons": [([0, 0, 10, 8.5], 0.8)],
            "texts": [([0, 1.75, 10, 10], "Save", 0.9)],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        assert [el.kind for el in out] == [ElementKind.ICON_WIDGET]

    def test_no_icons_means_no_texts_survive(self):
        raw = raw_from_plain({
            "icons": [],
            "texts": [([10, 10, 60, 30], "stray", 0.9)],
            "width": 400, "height": 300,
        })
        assert fuse(raw, CFG) == []


class TestIconDedupe:
    def test_exact_point_nine_suppresses(self):
        # areas 100 and 90, overlap 90 -> IoU 0.9 exactly
        icons = [
            IconDetection(BBox(0, 0, 10, 10), 0.8),
            IconDetection(BBox(0, 0, 10, 9), 0.9),
        ]
        kept = dedupe_icons(icons, CFG)
        assert len(kept) == 1
        assert kept[0].confidence == 0.9

    def test_confidence_tie_earlier_index_wins(self):
        icons = [
            IconDetection(BBox(0, 0, 10, 10), 0.8),
            IconDetection(BBox(0, 0, 10, 9), 0.8),
        ]
        kept = dedupe_icons(icons, CFG)
        assert kept == [icons[0]]

    def test_below_threshold_both_kept_in_input_order(self):
        icons = [
            IconDetection(BBox(0, 0, 10, 10), 0.5),
            IconDetection(BBox(0, 0, 10, 7), 0.9),  # IoU 0.7 < 0.9
        ]
        kept = dedupe_icons(icons, CFG)
        assert kept == icons


class TestStructure:
    def test_icons_before_texts_in_input_order(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 20, 20], 0.5), ([100, 0, 120, 20], 0.6)],
            "texts": [
                ([100.5, 0, 120, 19.5], "b", 0.7),
                ([0.5, 0.5, 19.5, 19.5], "a", 0.7),
            ],
            "width": 400, "height": 300,
        })
        out = fuse(raw, CFG)
        # both texts attach (contained); icons keep their input order
        assert [el.bbox.x1 for el in out] == [0, 100]
        assert [el.embedded_text for el in out] == ["a", "b"]

    def test_never_invents_geometry(self):
        rng = random.Random(77)
        for _ in range(50):
            plain = random_detection_set(rng)
            raw = raw_from_plain(plain)
            inputs = {tuple(b) for b, _, _ in plain["texts"]}
            inputs |= {tuple(b) for b, _ in plain["icons"]}
            for el in fuse(raw, CFG):
                assert tuple(el.bbox.as_list()) in inputs

    def test_marks_unassigned(self):
        rng = random.Random(78)
        plain = random_detection_set(rng)
        for el in fuse(raw_from_plain(plain), CFG):
            assert el.mark_id == UNASSIGNED_MARK

    def test_confidence_carried_through(self):
        raw = raw_from_plain({
            "icons": [([0, 0, 20, 20], 0.45)],
            "texts": [],
            "width": 400, "height": 300,
        })
        assert fuse(raw, CFG)[0].source_confidence == 0.45


class TestValidation:
    def test_rejects_out_of_image_box(self):
        with pytest.raises(ValueError):
            raw_from_plain({
                "icons": [([0, 0, 500, 20], 0.5)],
                "texts": [],
                "width": 400, "height": 300,
            })

    def test_rejects_bad_confidence(self):
        with pytest.raises(ValueError):
            raw_from_plain({
                "icons": [([0, 0, 50, 20], 1.5)],
                "texts": [],
                "width": 400, "height": 300,
            })

    def test_config_range_checks(self):
        with pytest.raises(ValueError):
            FusionConfig(iou_keep_threshold=0.0)
        with pytest.raises(ValueError):
            FusionConfig(containment_eps=-0.5)
        with pytest.raises(ValueError):
            FusionConfig(max_text_width_fraction=1.2)


class TestOracleEquivalence:
    def test_matches_brute_force_on_random_instances(self):
        rng = random.Random(20240815)
        cfg_dict = {
            "iou_keep_threshold": CFG.iou_keep_threshold,
            "containment_eps": CFG.containment_eps,
            "max_text_width_fraction": CFG.max_text_width_fraction,
            "icon_nms_iou": CFG.icon_nms_iou,
        }
        for i in range(300):
            plain = random_detection_set(rng)
            got = fused_as_dicts(fuse(raw_from_plain(plain), CFG))
            expected = oracle_fuse(plain, cfg_dict)
            assert got == expected, f"instance {i} diverged"


class TestSerializationAndBackends:
    def test_detections_round_trip(self):
        rng = random.Random(5)
        plain = random_detection_set(rng)
        raw = raw_from_plain(plain)
        again = detections_from_dict(detections_to_dict(raw))
        assert detections_to_dict(again) == detections_to_dict(raw)

    def test_fixture_backend_reads_sidecar(self, tmp_path):
        write_detection_fixture(
            tmp_path, "shot-1",
            texts=[([10, 10, 60, 30], "Save", 0.9)],
            icons=[([5, 5, 80, 40], 0.8)],
            width=200, height=100,
        )
        backend = FixtureDetectorBackend(tmp_path)
        raw = backend.detect("shot-1", b"", "png")
        assert raw.image_width == 200
        assert raw.text_boxes[0].text == "Save"

    def test_fixture_backend_missing_id(self, tmp_path):
        backend = FixtureDetectorBackend(tmp_path)
        with pytest.raises(FileNotFoundError):
            backend.detect("ghost", b"", "png")

    def test_http_backend_posts_bytes(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["id"] = request.headers["x-image-id"]
            seen["body"] = request.content
            return httpx.Response(200, json={
                "text_boxes": [],
                "icon_boxes": [{"bbox": [1, 2, 3, 4], "confidence": 0.5}],
                "image_width": 100, "image_height": 100,
            })

        backend = HttpDetectorBackend(
            "http://detector.local/detect",
            transport=httpx.MockTransport(handler),
        )
        raw = backend.detect("img-9", b"PNGBYTES", "png")
        assert seen == {"id": "img-9", "body": b"PNGBYTES"}
        assert raw.icon_boxes[0].bbox.as_list() == [1, 2, 3, 4]
