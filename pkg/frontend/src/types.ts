/** Server payload shapes, mirrored field for field.
 *
 * The UI never reshapes or mutates source data; these interfaces exist so the
 * compiler enforces that we only read what the service actually sends.
 */

export type Decision = "accept" | "reject" | "relabel";

export interface VerdictRecord {
  decision: Decision;
  reviewer_id: string;
  timestamp: number;
  relabel_class: string | null;
}

export interface QueueItemView {
  image_id: string;
  predicted_class: string;
  confidence: number;
  round: number;
  lease_expires: number | null;
  verdict: VerdictRecord | null;
}

export interface QueueCounts {
  pending: number;
  done: number;
}

export interface StatusView {
  phase: string;
  round: number;
  model_version: string | null;
  frozen_version: string | null;
  queue: QueueCounts;
  pool_size: number;
  intake_size: number;
}

export interface CaptionView {
  ui_type: string;
  text: string | null;
  attributes: string[];
  raw: string;
}

export interface OverlayElement {
  mark_id: number;
  bbox: [number, number, number, number];
  kind: string;
  embedded_text: string | null;
  caption: CaptionView | null;
  source_confidence: number;
}

export interface RecordView {
  image_id: string;
  image_path: string;
  width: number;
  height: number;
  os: string;
  source: string;
  elements: OverlayElement[];
}

export interface VerdictBody {
  decision: Decision;
  reviewer_id: string;
  relabel_class?: string;
}

/** Classes a reviewer can relabel to; order fixes the 1/2/3 shortcuts. */
export const RELABEL_CLASSES = ["valid", "invalid", "unrelated"] as const;
