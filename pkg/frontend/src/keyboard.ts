/** Single-key bindings for the review loop.
 *
 * Relabel is a two-keystroke gesture: "l" arms the class picker, then a
 * digit picks the class. Everything else is one key. The mapping is a pure
 * function so the whole scheme is testable without a DOM.
 */

import { RELABEL_CLASSES } from "./types.js";

export type KeyAction =
  | { type: "accept" }
  | { type: "reject" }
  | { type: "relabel-arm" }
  | { type: "relabel"; relabelClass: string }
  | { type: "cancel" }
  | { type: "toggle-boxes" }
  | { type: "toggle-captions" }
  | { type: "retry-image" }
  | null;

export function actionForKey(key: string, relabelArmed: boolean): KeyAction {
  if (relabelArmed) {
    const index = Number.parseInt(key, 10) - 1;
    if (index >= 0 && index < RELABEL_CLASSES.length) {
      return { type: "relabel", relabelClass: RELABEL_CLASSES[index] as string };
    }
    return { type: "cancel" }; // any non-digit key disarms the picker
  }
  switch (key) {
    case "a":
      return { type: "accept" };
    case "r":
      return { type: "reject" };
    case "l":
      return { type: "relabel-arm" };
    case "b":
      return { type: "toggle-boxes" };
    case "c":
      return { type: "toggle-captions" };
    case "g":
      return { type: "retry-image" };
    case "Escape":
      return { type: "cancel" };
    default:
      return null;
  }
}
