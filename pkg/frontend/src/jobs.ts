/** Submit one edit job and watch it: status snapshots, accumulated
 *  dataset-update markers for the strength plot, cancellation. */

import type { ApiClient } from "./api.js";
import { updateMarkers, type PlotPoint } from "./schedule.js";
import type { EventRecord, JobDraft, JobStatus } from "./types.js";

function mergeMarkers(have: PlotPoint[], incoming: PlotPoint[]): PlotPoint[] {
  const byStep = new Map<number, number>(have.map((p) => [p.step, p.s]));
  for (const p of incoming) byStep.set(p.step, p.s);
  return [...byStep.entries()]
    .map(([step, s]) => ({ step, s }))
    .sort((a, b) => a.step - b.step);
}

export class JobMonitor {
  jobId: string | null = null;
  draft: JobDraft | null = null;
  readonly snapshots: JobStatus[] = [];
  updates: PlotPoint[] = [];
  cancelRequested = false;

  constructor(private readonly api: ApiClient) {}

  async start(draft: JobDraft): Promise<string> {
    const id = await this.api.createJob(draft);
    this.jobId = id;
    this.draft = draft;
    this.snapshots.length = 0;
    this.updates = [];
    this.cancelRequested = false;
    return id;
  }

  attach(jobId: string): void {
    this.jobId = jobId;
  }

  get latest(): JobStatus | null {
    return this.snapshots[this.snapshots.length - 1] ?? null;
  }

  get finished(): boolean {
    const phase = this.latest?.phase;
    return phase !== undefined && phase !== "training";
  }

  /** One poll: fetch status, keep the snapshot, fold in update markers
   *  (events_tail is a sliding window, so markers accumulate here). */
  async tick(): Promise<JobStatus> {
    if (!this.jobId) throw new Error("no job attached");
    const status = await this.api.getJob(this.jobId);
    this.snapshots.push(status);
    this.updates = mergeMarkers(this.updates, updateMarkers(status.events_tail));
    return status;
  }

  /** Issue the cancel once; the control disables after the server accepts. */
  async cancel(): Promise<void> {
    if (!this.jobId || this.cancelRequested) return;
    await this.api.cancelJob(this.jobId);
    this.cancelRequested = true;
  }

  eventTail(): EventRecord[] {
    return this.latest?.events_tail ?? [];
  }
}
