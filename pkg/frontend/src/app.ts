/** Browser entry point: wires the session, keyboard and overlay to the DOM.
 *
 * The page is a single fixed layout (see static/index.html): image pane with
 * absolutely positioned overlay boxes, a side panel with the predicted class
 * and progress, a notice strip, and a login prompt that appears when the
 * token is rejected.
 */

import { ApiClient } from "./api.js";
import { actionForKey } from "./keyboard.js";
import { buildOverlay, type OverlayToggles, type Viewport } from "./overlay.js";
import { ReviewSession } from "./session.js";
import { RELABEL_CLASSES } from "./types.js";

interface Ui {
  image: HTMLImageElement;
  overlay: HTMLElement;
  placeholder: HTMLElement;
  predicted: HTMLElement;
  progress: HTMLElement;
  notices: HTMLElement;
  banner: HTMLElement;
  login: HTMLElement;
  tokenInput: HTMLInputElement;
  relabelHint: HTMLElement;
}

function grab(doc: Document, id: string): HTMLElement {
  const el = doc.getElementById(id);
  if (el === null) {
    throw new Error(`missing #${id} in the review page`);
  }
  return el;
}

export class ReviewApp {
  private session: ReviewSession;
  private readonly toggles: OverlayToggles = {
    showBoxes: true,
    showCaptions: true,
  };
  private relabelArmed = false;
  private imageMissing = false;

  constructor(
    private readonly doc: Document,
    private api: ApiClient,
    reviewerId: string,
    private readonly ui: Ui,
  ) {
    this.session = new ReviewSession(api, reviewerId);
  }

  static mount(doc: Document, baseUrl: string, reviewerId: string): ReviewApp {
    const token = window.sessionStorage.getItem("reviewer_token");
    const api = new ApiClient(baseUrl, token);
    const app = new ReviewApp(doc, api, reviewerId, {
      image: grab(doc, "shot") as HTMLImageElement,
      overlay: grab(doc, "overlay"),
      placeholder: grab(doc, "placeholder"),
      predicted: grab(doc, "predicted"),
      progress: grab(doc, "progress"),
      notices: grab(doc, "notices"),
      banner: grab(doc, "banner"),
      login: grab(doc, "login"),
      tokenInput: grab(doc, "token") as HTMLInputElement,
      relabelHint: grab(doc, "relabel-hint"),
    });
    app.listen();
    void app.start();
    return app;
  }

  private listen(): void {
    this.doc.addEventListener("keydown", (event) => {
      void this.onKey(event.key);
    });
    this.ui.image.addEventListener("load", () => {
      this.imageMissing = false;
      this.render();
    });
    this.ui.image.addEventListener("error", () => {
      this.imageMissing = true;
      this.render();
    });
    this.ui.tokenInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        window.sessionStorage.setItem("reviewer_token", this.ui.tokenInput.value);
        window.location.reload();
      }
    });
    window.setInterval(() => {
      if (this.session.pendingRetries() > 0) {
        void this.session.flushRetries().then(() => this.render());
      }
    }, 3000);
  }

  async start(): Promise<void> {
    await this.session.advance();
    this.render();
  }

  private async onKey(key: string): Promise<void> {
    const action = actionForKey(key, this.relabelArmed);
    if (action === null) {
      return;
    }
    switch (action.type) {
      case "accept":
        await this.session.submit("accept");
        break;
      case "reject":
        await this.session.submit("reject");
        break;
      case "relabel-arm":
        this.relabelArmed = true;
        break;
      case "relabel":
        this.relabelArmed = false;
        await this.session.submit("relabel", action.relabelClass);
        break;
      case "cancel":
        this.relabelArmed = false;
        break;
      case "toggle-boxes":
        this.toggles.showBoxes = !this.toggles.showBoxes;
        break;
      case "toggle-captions":
        this.toggles.showCaptions = !this.toggles.showCaptions;
        break;
      case "retry-image":
        this.reloadImage();
        break;
    }
    this.render();
  }

  private reloadImage(): void {
    const item = this.session.current;
    if (item !== null) {
      this.imageMissing = false;
      this.ui.image.src = `${this.api.imageUrl(item.image_id)}?retry=${Date.now()}`;
    }
  }

  private viewport(): Viewport {
    const record = this.session.overlayRecord;
    if (record === null || this.ui.image.naturalWidth === 0) {
      return { scale: 1 };
    }
    return { scale: this.ui.image.clientWidth / record.width };
  }

  private render(): void {
    const session = this.session;
    this.ui.login.hidden = session.phase !== "login";
    this.ui.banner.hidden = !session.offlineBanner;
    this.ui.relabelHint.hidden = !this.relabelArmed;
    this.ui.relabelHint.textContent = `relabel: ${RELABEL_CLASSES.map(
      (cls, i) => `${i + 1}=${cls}`,
    ).join("  ")}`;

    const item = session.current;
    if (session.phase === "done") {
      this.ui.predicted.textContent = "queue drained";
    } else if (item !== null) {
      this.ui.predicted.textContent =
        `${item.image_id}: ${item.predicted_class} ` +
        `(${item.confidence.toFixed(2)}, round ${item.round})`;
    } else {
      this.ui.predicted.textContent = "";
    }
    this.ui.progress.textContent =
      `${session.reviewed} reviewed, ${session.skipped.length} skipped`;
    this.ui.notices.textContent = session.notices
      .slice(-3)
      .map((n) => n.message)
      .join(" | ");

    this.ui.placeholder.hidden = !this.imageMissing;
    this.ui.image.hidden = this.imageMissing;
    if (item !== null && !this.ui.image.src.includes(item.image_id)) {
      this.ui.image.src = this.api.imageUrl(item.image_id);
    }
    this.renderOverlay();
  }

  private renderOverlay(): void {
    const host = this.ui.overlay;
    host.textContent = "";
    const record = this.session.overlayRecord;
    if (record === null || this.imageMissing) {
      return;
    }
    const shapes = buildOverlay(record.elements, this.viewport(), this.toggles);
    for (const shape of shapes) {
      const box = this.doc.createElement("div");
      box.className = "mark-box";
      box.style.left = `${shape.rect.x}px`;
      box.style.top = `${shape.rect.y}px`;
      box.style.width = `${shape.rect.width}px`;
      box.style.height = `${shape.rect.height}px`;
      const badge = this.doc.createElement("span");
      badge.className = "mark-badge";
      badge.textContent = String(shape.markId);
      box.appendChild(badge);
      if (shape.caption !== null) {
        box.title = shape.caption;
      }
      host.appendChild(box);
    }
  }
}

declare global {
  interface Window {
    reviewApp?: ReviewApp;
  }
}

if (typeof document !== "undefined" && document.getElementById("shot")) {
  const params = new URLSearchParams(window.location.search);
  window.reviewApp = ReviewApp.mount(
    document,
    params.get("server") ?? "",
    params.get("reviewer") ?? "anonymous",
  );
}
