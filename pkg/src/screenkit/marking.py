"""Rendering numbered badges onto screenshots.

Each selected element gets its box outlined and a filled badge with its mark
numeral anchored at the box's top-left corner. High-contrast marks are what
let a captioning model refer to small elements unambiguously, so badges use
white numerals on a saturated background cycling through a fixed palette.
"""

from __future__ import annotations

from dataclasses import dataclass

from PIL import Image, ImageDraw, ImageFont

from .sampling import MarkedSet

# Saturated, high-contrast backgrounds, cycled by mark id.
BADGE_PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 57, 70),    # red
    (29, 120, 216),   # blue
    (46, 160, 67),    # green
    (245, 130, 31),   # orange
    (142, 68, 173),   # purple
    (0, 150, 136),    # teal
    (199, 21, 133),   # magenta
    (96, 108, 56),    # olive
)

REFERENCE_HEIGHT = 1080  # badge height is specified at this image height


@dataclass(frozen=True)
class MarkStyle:
    badge_height: int = 24        # px at REFERENCE_HEIGHT, scaled by image height
    min_badge_height: int = 10
    outline_width: int = 2        # 0 disables box outlines
    text_color: tuple[int, int, int] = (255, 255, 255)
    palette: tuple[tuple[int, int, int], ...] = BADGE_PALETTE


def badge_color(mark_id: int, style: MarkStyle) -> tuple[int, int, int]:
    return style.palette[(mark_id - 1) % len(style.palette)]


def scaled_badge_height(image_height: int, style: MarkStyle) -> int:
    return max(style.min_badge_height, round(style.badge_height * image_height / REFERENCE_HEIGHT))


def _badge_font(badge_h: int) -> ImageFont.ImageFont | ImageFont.FreeTypeFont:
    try:
        return ImageFont.load_default(size=max(8, badge_h - 4))
    except TypeError:  # older Pillow without sized default font
        return ImageFont.load_default()


def badge_rect(
    bbox_x1: float, bbox_y1: float, label: str, image_size: tuple[int, int], style: MarkStyle
) -> tuple[int, int, int, int]:
    """Badge rectangle anchored at the element's top-left, clamped in-bounds."""
    w, h = image_size
    badge_h = scaled_badge_height(h, style)
    font = _badge_font(badge_h)
    tb = font.getbbox(label)
    badge_w = (tb[2] - tb[0]) + max(4, badge_h // 3)
    x1 = int(round(bbox_x1))
    y1 = int(round(bbox_y1))
    x1 = max(0, min(x1, w - badge_w))
    y1 = max(0, min(y1, h - badge_h))
    return (x1, y1, x1 + badge_w, y1 + badge_h)


def render_marks(
    image: Image.Image, marked_set: MarkedSet, style: MarkStyle = MarkStyle()
) -> Image.Image:
    """Draw outlines and badges on a copy; dimensions match the input exactly.

    Pixels outside the union of box outlines and badge rectangles are left
    untouched (badges are composed as tiles, so numerals cannot bleed out).
    An empty marked set returns a pixel-identical copy.
    """
    out = image.copy() if image.mode in ("RGB", "RGBA") else image.convert("RGB")
    if not marked_set.entries:
        return out
    draw = ImageDraw.Draw(out)
    badge_h = scaled_badge_height(out.height, style)
    font = _badge_font(badge_h)

    for mark_id, el in marked_set.entries:
        b = el.bbox
        if b.x2 > out.width or b.y2 > out.height:
            raise ValueError(f"element box out of image bounds: {b.as_list()}")
        color = badge_color(mark_id, style)
        if style.outline_width > 0:
            draw.rectangle(
                [round(b.x1), round(b.y1), round(b.x2) - 1, round(b.y2) - 1],
                outline=color,
                width=style.outline_width,
            )
        label = str(mark_id)
        bx1, by1, bx2, by2 = badge_rect(b.x1, b.y1, label, out.size, style)
        tile = Image.new(out.mode, (bx2 - bx1, by2 - by1), color)
        tile_draw = ImageDraw.Draw(tile)
        tb = font.getbbox(label)
        tx = (tile.width - (tb[2] - tb[0])) // 2 - tb[0]
        ty = (tile.height - (tb[3] - tb[1])) // 2 - tb[1]
        tile_draw.text((tx, ty), label, fill=style.text_color, font=font)
        out.paste(tile, (bx1, by1))
    return out
