/** Pure geometry for drawing element boxes and mark badges over a screenshot.
 *
 * All inputs are image-space coordinates straight from the record payload;
 * outputs are display-space rectangles. Rounding happens exactly once, at the
 * display boundary, so the error against the ideal scaled position is at most
 * half a display pixel per edge.
 */

import type { OverlayElement } from "./types.js";

export interface Viewport {
  /** Display pixels per image pixel, e.g. 0.5 for a 50% zoom. */
  scale: number;
  offsetX?: number;
  offsetY?: number;
}

export interface DisplayRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface OverlayToggles {
  showBoxes: boolean;
  showCaptions: boolean;
}

export interface BoxShape {
  markId: number;
  rect: DisplayRect;
  badge: DisplayRect;
  /** Caption raw text, present only when captions are on and one exists. */
  caption: string | null;
}

const BADGE_SIZE = 16;

function snap(v: number): number {
  return Math.round(v);
}

/** Scale one image-space bbox into a display-space rectangle. */
export function displayRect(
  bbox: readonly [number, number, number, number],
  viewport: Viewport,
): DisplayRect {
  const ox = viewport.offsetX ?? 0;
  const oy = viewport.offsetY ?? 0;
  const x1 = snap(bbox[0] * viewport.scale + ox);
  const y1 = snap(bbox[1] * viewport.scale + oy);
  const x2 = snap(bbox[2] * viewport.scale + ox);
  const y2 = snap(bbox[3] * viewport.scale + oy);
  return { x: x1, y: y1, width: x2 - x1, height: y2 - y1 };
}

/** Badge sits at the box's top-left corner, clamped into the display area. */
export function badgeRect(rect: DisplayRect): DisplayRect {
  return {
    x: Math.max(0, rect.x),
    y: Math.max(0, rect.y),
    width: BADGE_SIZE,
    height: BADGE_SIZE,
  };
}

/** Positioned shapes for one frame; empty when boxes are toggled off. */
export function buildOverlay(
  elements: readonly OverlayElement[],
  viewport: Viewport,
  toggles: OverlayToggles,
): BoxShape[] {
  if (!toggles.showBoxes) {
    return [];
  }
  const shapes: BoxShape[] = [];
  for (const el of elements) {
    if (el.mark_id <= 0) {
      continue; // unmarked elements are not part of the visual prompt
    }
    const rect = displayRect(el.bbox, viewport);
    shapes.push({
      markId: el.mark_id,
      rect,
      badge: badgeRect(rect),
      caption:
        toggles.showCaptions && el.caption !== null ? el.caption.raw : null,
    });
  }
  return shapes;
}

/** Worst-case corner deviation, in display pixels, against exact scaling.
 *
 * Exposed so the UI can assert its own contract (kept at or under one
 * display pixel at any zoom) and so tests measure the same quantity the
 * renderer actually produces.
 */
export function geometryError(
  bbox: readonly [number, number, number, number],
  viewport: Viewport,
): number {
  const ox = viewport.offsetX ?? 0;
  const oy = viewport.offsetY ?? 0;
  const rect = displayRect(bbox, viewport);
  const exact = [
    bbox[0] * viewport.scale + ox,
    bbox[1] * viewport.scale + oy,
    bbox[2] * viewport.scale + ox,
    bbox[3] * viewport.scale + oy,
  ];
  const got = [rect.x, rect.y, rect.x + rect.width, rect.y + rect.height];
  let worst = 0;
  for (let i = 0; i < 4; i += 1) {
    worst = Math.max(worst, Math.abs((got[i] as number) - (exact[i] as number)));
  }
  return worst;
}
