/** Review loop state machine: fetch-next, display, verdict, auto-advance.
 *
 * The session owns no ground truth. Verdicts live on the server; the client
 * keeps only a guard set so that at most one verdict per (image_id, round)
 * is ever sent from this tab, plus a retry queue for verdicts that could not
 * reach the server at all. Refreshing the page loses nothing: the server
 * only hands out items that still lack a verdict.
 */

import { ApiClient, ApiError, NetworkError } from "./api.js";
import type {
  Decision,
  QueueItemView,
  RecordView,
  VerdictBody,
} from "./types.js";

export type SessionPhase =
  | "idle"
  | "loading"
  | "reviewing"
  | "done"
  | "login";

export interface Notice {
  kind: "conflict" | "lease" | "offline" | "error";
  imageId: string | null;
  message: string;
}

export interface SubmitResult {
  posted: boolean;
  reason:
    | "ok"
    | "duplicate-guard"
    | "conflict"
    | "leased"
    | "offline"
    | "login"
    | "error"
    | "no-item";
}

interface ParkedVerdict {
  imageId: string;
  body: VerdictBody;
}

export class ReviewSession {
  phase: SessionPhase = "idle";
  current: QueueItemView | null = null;
  /** Full record for overlay rendering; null when the server has none. */
  overlayRecord: RecordView | null = null;
  notices: Notice[] = [];
  offlineBanner = false;
  reviewed = 0;
  skipped: string[] = [];

  private readonly sent = new Set<string>();
  private readonly retryQueue: ParkedVerdict[] = [];

  constructor(
    private readonly api: ApiClient,
    readonly reviewerId: string,
  ) {}

  pendingRetries(): number {
    return this.retryQueue.length;
  }

  private guardKey(imageId: string, round: number): string {
    return `${imageId}#${round}`;
  }

  private notice(
    kind: Notice["kind"],
    imageId: string | null,
    message: string,
  ): void {
    this.notices.push({ kind, imageId, message });
  }

  /** Lease the next pending item and load its overlay record. */
  async advance(): Promise<void> {
    this.phase = "loading";
    this.current = null;
    this.overlayRecord = null;
    let item: QueueItemView | null;
    try {
      item = await this.api.queueNext(this.reviewerId);
    } catch (err) {
      this.absorbFetchFailure(err, null);
      return;
    }
    if (item === null) {
      this.phase = "done";
      return;
    }
    this.current = item;
    this.phase = "reviewing";
    try {
      this.overlayRecord = await this.api.record(item.image_id);
    } catch {
      // overlay data is optional: classification-only deployments have no
      // dataset store behind the service, and review must still work
      this.overlayRecord = null;
    }
  }

  /** Submit a verdict for the current item and advance on success. */
  async submit(
    decision: Decision,
    relabelClass?: string,
  ): Promise<SubmitResult> {
    const item = this.current;
    if (item === null) {
      return { posted: false, reason: "no-item" };
    }
    const key = this.guardKey(item.image_id, item.round);
    if (this.sent.has(key)) {
      return { posted: false, reason: "duplicate-guard" };
    }
    const body: VerdictBody = {
      decision,
      reviewer_id: this.reviewerId,
    };
    if (decision === "relabel") {
      body.relabel_class = relabelClass;
    }
    this.sent.add(key);
    try {
      await this.api.submitVerdict(item.image_id, body);
    } catch (err) {
      return this.absorbSubmitFailure(err, item, body, key);
    }
    this.reviewed += 1;
    await this.advance();
    return { posted: true, reason: "ok" };
  }

  /** Re-send verdicts parked while the server was unreachable. */
  async flushRetries(): Promise<void> {
    let currentSettled = false;
    while (this.retryQueue.length > 0) {
      const parked = this.retryQueue[0] as ParkedVerdict;
      try {
        await this.api.submitVerdict(parked.imageId, parked.body);
        this.reviewed += 1;
      } catch (err) {
        if (err instanceof NetworkError) {
          return; // still offline; banner stays up, nothing is dropped
        }
        if (err instanceof ApiError && err.status === 409) {
          // someone adjudicated it while we were offline; their verdict
          // stands and ours is discarded with a visible notice
          this.skipped.push(parked.imageId);
          this.notice(
            "conflict",
            parked.imageId,
            `verdict for ${parked.imageId} already recorded elsewhere`,
          );
        } else if (err instanceof ApiError && err.status === 401) {
          this.phase = "login";
          return;
        } else {
          this.notice(
            "error",
            parked.imageId,
            `retry for ${parked.imageId} failed: ${String(err)}`,
          );
        }
      }
      if (this.current?.image_id === parked.imageId) {
        currentSettled = true; // displayed item is adjudicated either way
      }
      this.retryQueue.shift();
    }
    this.offlineBanner = false;
    if (this.current === null || currentSettled) {
      await this.advance();
    }
  }

  private async absorbSubmitFailure(
    err: unknown,
    item: QueueItemView,
    body: VerdictBody,
    key: string,
  ): Promise<SubmitResult> {
    if (err instanceof NetworkError) {
      // the POST never reached the server: park it for retry, keep the
      // guard entry so a second keypress cannot double-send
      this.retryQueue.push({ imageId: item.image_id, body });
      this.offlineBanner = true;
      this.notice(
        "offline",
        item.image_id,
        "server unreachable; verdict queued for retry",
      );
      return { posted: false, reason: "offline" };
    }
    if (err instanceof ApiError) {
      if (err.status === 409) {
        // a verdict already exists server-side; it is untouched and we
        // move on, recording the skip
        this.skipped.push(item.image_id);
        this.notice(
          "conflict",
          item.image_id,
          `item ${item.image_id} already adjudicated; skipped`,
        );
        await this.advance();
        return { posted: false, reason: "conflict" };
      }
      if (err.status === 423) {
        // another reviewer holds the lease; our verdict was refused, so
        // the item may legitimately be adjudicated later
        this.sent.delete(key);
        this.notice(
          "lease",
          item.image_id,
          `item ${item.image_id} is leased to another reviewer`,
        );
        await this.advance();
        return { posted: false, reason: "leased" };
      }
      if (err.status === 401) {
        this.sent.delete(key);
        this.phase = "login";
        return { posted: false, reason: "login" };
      }
    }
    this.sent.delete(key);
    this.notice("error", item.image_id, String(err));
    return { posted: false, reason: "error" };
  }

  private absorbFetchFailure(err: unknown, imageId: string | null): void {
    if (err instanceof NetworkError) {
      this.offlineBanner = true;
      this.notice("offline", imageId, "server unreachable");
      this.phase = "idle";
      return;
    }
    if (err instanceof ApiError && err.status === 401) {
      this.phase = "login";
      return;
    }
    this.notice("error", imageId, String(err));
    this.phase = "idle";
  }
}
