/**
 * Keyboard bindings: s = same, d = different, u = undo the last verdict.
 * The handlers call the same session methods as the buttons, so both input
 * paths emit byte-identical decision bodies.
 */

import type { ReviewSession } from "./session.js";

export function bindKeys(session: ReviewSession, target: EventTarget): () => void {
  const onKeyDown = (event: Event): void => {
    const e = event as KeyboardEvent;
    if (e.defaultPrevented || e.altKey || e.ctrlKey || e.metaKey) return;
    const el = e.target as HTMLElement | null;
    if (el && (el.tagName === "INPUT" || el.tagName === "TEXTAREA" || el.isContentEditable)) return;
    switch (e.key.toLowerCase()) {
      case "s":
        void session.decide("same");
        break;
      case "d":
        void session.decide("different");
        break;
      case "u":
        void session.undo();
        break;
    }
  };
  target.addEventListener("keydown", onKeyDown);
  return () => target.removeEventListener("keydown", onKeyDown);
}
