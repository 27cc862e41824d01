/** Inpainting strength schedule and plot geometry for the job monitor. */

import type { EventRecord } from "./types.js";

export function strengthAt(step: number, nSteps: number): number {
  if (nSteps < 1) throw new RangeError(`nSteps must be >= 1, got ${nSteps}`);
  if (step < 0 || step > nSteps) {
    throw new RangeError(`step ${step} outside [0, ${nSteps}]`);
  }
  return (5 - 4 * Math.sqrt(step / nSteps)) / 5;
}

export interface PlotPoint {
  step: number;
  s: number;
}

/** Sample the annealing curve: exactly 1.0 at step 0 and 0.2 at the end. */
export function strengthCurve(nSteps: number, resolution = 100): PlotPoint[] {
  const points: PlotPoint[] = [];
  let last = -1;
  for (let k = 0; k <= resolution; k++) {
    const step = Math.round((k * nSteps) / resolution);
    if (step === last) continue;
    last = step;
    points.push({ step, s: strengthAt(step, nSteps) });
  }
  return points;
}

/** Observed dataset updates (step, strength) from a job's event records. */
export function updateMarkers(events: EventRecord[]): PlotPoint[] {
  const seen = new Map<number, number>();
  for (const e of events) {
    if (e.event === "dataset_update" && typeof e.detail.strength === "number") {
      seen.set(e.step, e.detail.strength);
    }
  }
  return [...seen.entries()]
    .map(([step, s]) => ({ step, s }))
    .sort((a, b) => a.step - b.step);
}

/** "x,y x,y ..." for an SVG polyline; the y axis runs top-down. */
export function polylinePoints(
  points: PlotPoint[],
  nSteps: number,
  width: number,
  height: number,
): string {
  return points
    .map((p) => {
      const x = (p.step / nSteps) * width;
      const y = (1 - p.s) * height;
      return `${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
}
