/** Typed client for the annotation service.

Every server mutation in the UI goes through this class, and every mutating
request carries a fresh X-Request-Id so the server can swallow client
retries without double-applying them.
*/

import type {
  HullPreviewEntry,
  JobDraft,
  JobStatus,
  ViewInfo,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

let requestCounter = 0;

function defaultRequestId(): string {
  requestCounter += 1;
  const rand = Math.random().toString(36).slice(2, 10);
  return `ui-${Date.now().toString(36)}-${rand}-${requestCounter}`;
}

async function describeError(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return resp.statusText || `HTTP ${resp.status}`;
  }
}

export interface HullSpec {
  mask_ids?: string[];
  mesh?: string;
  transform?: number[];
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private readonly newRequestId: () => string = defaultRequestId,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
    mutating = false,
  ): Promise<unknown> {
    const headers: Record<string, string> = {};
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    if (mutating) headers["X-Request-Id"] = this.newRequestId();
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await describeError(resp));
    return resp.json();
  }

  async getViews(): Promise<ViewInfo[]> {
    const body = (await this.request("GET", "/api/views")) as { views: ViewInfo[] };
    return body.views;
  }

  renderUrl(view: number, stage: "original" | "edited" = "original"): string {
    return `${this.baseUrl}/api/render?view=${view}&stage=${stage}`;
  }

  async uploadMask(view: number, maskB64: string): Promise<string> {
    const body = (await this.request(
      "POST", "/api/masks", { view, mask: maskB64 }, true,
    )) as { id: string };
    return body.id;
  }

  async deleteMask(id: string): Promise<void> {
    await this.request("DELETE", `/api/masks/${id}`, undefined, true);
  }

  async hullPreview(spec: HullSpec): Promise<HullPreviewEntry[]> {
    const body = (await this.request("POST", "/api/hull/preview", spec)) as {
      views: HullPreviewEntry[];
    };
    return body.views;
  }

  async createJob(draft: JobDraft): Promise<string> {
    const body = (await this.request("POST", "/api/jobs", draft, true)) as { id: string };
    return body.id;
  }

  async getJob(id: string): Promise<JobStatus> {
    return (await this.request("GET", `/api/jobs/${id}`)) as JobStatus;
  }

  async cancelJob(id: string): Promise<void> {
    await this.request("DELETE", `/api/jobs/${id}`, undefined, true);
  }

  jobPreviewUrl(id: string, view: number): string {
    return `${this.baseUrl}/api/jobs/${id}/preview?view=${view}`;
  }
}
