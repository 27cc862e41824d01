/** Shared shapes for the annotation UI. */

export interface RawBitmap {
  width: number;
  height: number;
  /** one byte per pixel, 0 or 255 */
  data: Uint8Array;
}

export interface RawImage {
  width: number;
  height: number;
  /** RGBA, four bytes per pixel */
  data: Uint8Array;
}

export interface ViewInfo {
  id: number;
  width: number;
  height: number;
  file: string;
}

export interface EventRecord {
  step: number;
  event: string;
  detail: Record<string, unknown>;
}

export interface JobStatus {
  id: string;
  phase: string;
  step: number;
  strength: number | null;
  error: string | null;
  events_tail: EventRecord[];
}

export interface HullPreviewEntry {
  view: number;
  mask: string; // base64 PNG
}

/** Engine settings accepted by POST /api/jobs (all optional overrides). */
export interface JobDraft {
  mask_ids?: string[];
  mesh?: string;
  transform?: number[];
  n_steps?: number;
  n_update?: number;
  lambda_c?: number;
  lambda_sigma?: number;
  dilation_diameter?: number;
  crop_interval?: number[];
  prompt?: string;
  backend?: string;
  seed?: number;
  l_out_enabled?: boolean;
  batch_size?: number;
}

export interface Toast {
  kind: "info" | "error";
  message: string;
}
