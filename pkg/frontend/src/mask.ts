/** Painted mask layers: disc-brush strokes with replay-based undo.

A pixel (x, y) is covered by a stroke when its distance to the stroke's
polyline is at most the brush radius, so a single-point path paints one
disc and a drag paints a capsule per segment. "add" sets pixels to 255,
"erase" back to 0. Undo pops the last stroke and replays the rest, which
keeps the bitmap equal to the replay of its history by construction.
*/

import type { RawBitmap } from "./types.js";

export type BrushMode = "add" | "erase";

export interface Stroke {
  path: ReadonlyArray<readonly [number, number]>;
  radius: number;
  mode: BrushMode;
}

function distSqToSegment(
  px: number, py: number,
  ax: number, ay: number,
  bx: number, by: number,
): number {
  const abx = bx - ax;
  const aby = by - ay;
  const lenSq = abx * abx + aby * aby;
  let t = 0;
  if (lenSq > 0) {
    t = Math.max(0, Math.min(1, ((px - ax) * abx + (py - ay) * aby) / lenSq));
  }
  const cx = ax + t * abx;
  const cy = ay + t * aby;
  return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

export class MaskLayer {
  readonly width: number;
  readonly height: number;
  private strokes: Stroke[] = [];
  private bitmap: Uint8Array;

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) {
      throw new RangeError(`mask dimensions must be positive, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.bitmap = new Uint8Array(width * height);
  }

  /** An empty path changes nothing and records nothing. */
  paintStroke(
    path: ReadonlyArray<readonly [number, number]>,
    radius: number,
    mode: BrushMode,
  ): void {
    if (path.length === 0) return;
    if (!(radius > 0)) throw new RangeError(`brush radius must be positive, got ${radius}`);
    const stroke: Stroke = { path: path.map((p) => [p[0], p[1]] as const), radius, mode };
    this.strokes.push(stroke);
    this.apply(this.bitmap, stroke);
  }

  private apply(target: Uint8Array, stroke: Stroke): void {
    const value = stroke.mode === "add" ? 255 : 0;
    const r = stroke.radius;
    const rSq = r * r;
    const path = stroke.path;
    const nSegs = Math.max(path.length - 1, 1);
    for (let i = 0; i < nSegs; i++) {
      const [ax, ay] = path[i];
      const [bx, by] = path[Math.min(i + 1, path.length - 1)];
      const x0 = Math.max(0, Math.floor(Math.min(ax, bx) - r));
      const x1 = Math.min(this.width - 1, Math.ceil(Math.max(ax, bx) + r));
      const y0 = Math.max(0, Math.floor(Math.min(ay, by) - r));
      const y1 = Math.min(this.height - 1, Math.ceil(Math.max(ay, by) + r));
      for (let y = y0; y <= y1; y++) {
        for (let x = x0; x <= x1; x++) {
          if (distSqToSegment(x, y, ax, ay, bx, by) <= rSq) {
            target[y * this.width + x] = value;
          }
        }
      }
    }
  }

  undo(): boolean {
    if (this.strokes.length === 0) return false;
    this.strokes.pop();
    this.bitmap = this.replayFromHistory();
    return true;
  }

  clear(): void {
    this.strokes = [];
    this.bitmap.fill(0);
  }

  /** Fresh rasterization of the stroke history; equals `pixels` always. */
  replayFromHistory(): Uint8Array {
    const fresh = new Uint8Array(this.width * this.height);
    for (const stroke of this.strokes) this.apply(fresh, stroke);
    return fresh;
  }

  isEmpty(): boolean {
    return !this.bitmap.some((v) => v !== 0);
  }

  get strokeCount(): number {
    return this.strokes.length;
  }

  /** Backing pixels for compositing; treat as read-only. */
  get pixels(): Uint8Array {
    return this.bitmap;
  }

  snapshot(): RawBitmap {
    return { width: this.width, height: this.height, data: this.bitmap.slice() };
  }
}
