import { describe, expect, it } from "vitest";

import { MaskLayer, type BrushMode, type Stroke } from "../src/mask.js";

/** Independent capsule-distance oracle: endpoint dot products plus a
 *  cross-product perpendicular distance, not the clamped-projection form
 *  the implementation uses. */
function refDistToSegment(
  px: number, py: number,
  a: readonly [number, number],
  b: readonly [number, number],
): number {
  const vx = b[0] - a[0];
  const vy = b[1] - a[1];
  const wx = px - a[0];
  const wy = py - a[1];
  const c1 = wx * vx + wy * vy;
  if (c1 <= 0) return Math.hypot(wx, wy);
  const c2 = vx * vx + vy * vy;
  if (c2 <= c1) return Math.hypot(px - b[0], py - b[1]);
  return Math.abs(vx * wy - vy * wx) / Math.sqrt(c2);
}

function refRasterize(width: number, height: number, strokes: Stroke[]): Uint8Array {
  const out = new Uint8Array(width * height);
  for (const s of strokes) {
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let d = Infinity;
        if (s.path.length === 1) {
          d = Math.hypot(x - s.path[0][0], y - s.path[0][1]);
        } else {
          for (let i = 0; i + 1 < s.path.length; i++) {
            d = Math.min(d, refDistToSegment(x, y, s.path[i], s.path[i + 1]));
          }
        }
        if (d <= s.radius) out[y * width + x] = s.mode === "add" ? 255 : 0;
      }
    }
  }
  return out;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("MaskLayer", () => {
  it("paints a single-point stroke as an exact integer disc", () => {
    const layer = new MaskLayer(16, 12);
    layer.paintStroke([[8, 6]], 3, "add");
    for (let y = 0; y < 12; y++) {
      for (let x = 0; x < 16; x++) {
        const inside = (x - 8) * (x - 8) + (y - 6) * (y - 6) <= 9;
        expect(layer.pixels[y * 16 + x]).toBe(inside ? 255 : 0);
      }
    }
  });

  it("paints a dragged stroke as a capsule around the polyline", () => {
    const layer = new MaskLayer(32, 24);
    const path: Array<[number, number]> = [[4, 4], [20, 6], [26, 18]];
    layer.paintStroke(path, 2.5, "add");
    const want = refRasterize(32, 24, [{ path, radius: 2.5, mode: "add" }]);
    expect(layer.pixels).toEqual(want);
  });

  it("clamps strokes that run outside the canvas", () => {
    const layer = new MaskLayer(8, 8);
    layer.paintStroke([[-5, -5], [3, 3]], 2, "add");
    expect(layer.pixels[0]).toBe(255);
    expect(layer.isEmpty()).toBe(false);
  });

  it("ignores an empty path and rejects a non-positive radius", () => {
    const layer = new MaskLayer(8, 8);
    layer.paintStroke([], 3, "add");
    expect(layer.strokeCount).toBe(0);
    expect(layer.isEmpty()).toBe(true);
    expect(() => layer.paintStroke([[1, 1]], 0, "add")).toThrow(RangeError);
    expect(() => layer.paintStroke([[1, 1]], -2, "add")).toThrow(RangeError);
  });

  it("rejects empty canvases", () => {
    expect(() => new MaskLayer(0, 5)).toThrow(RangeError);
    expect(() => new MaskLayer(5, 0)).toThrow(RangeError);
  });

  it("erasing over a painted area returns the layer to empty", () => {
    const layer = new MaskLayer(16, 16);
    layer.paintStroke([[8, 8]], 4, "add");
    expect(layer.isEmpty()).toBe(false);
    layer.paintStroke([[8, 8]], 5, "erase");
    expect(layer.isEmpty()).toBe(true);
    expect(layer.strokeCount).toBe(2);
  });

  it("undo restores the exact pre-stroke bitmap", () => {
    const layer = new MaskLayer(20, 20);
    layer.paintStroke([[5, 5], [10, 5]], 3, "add");
    const before = layer.snapshot();
    layer.paintStroke([[14, 14]], 4, "add");
    expect(layer.pixels).not.toEqual(before.data);
    expect(layer.undo()).toBe(true);
    expect(layer.pixels).toEqual(before.data);
    expect(layer.undo()).toBe(true);
    expect(layer.isEmpty()).toBe(true);
    expect(layer.undo()).toBe(false);
  });

  it("clear drops both pixels and history", () => {
    const layer = new MaskLayer(10, 10);
    layer.paintStroke([[5, 5]], 3, "add");
    layer.clear();
    expect(layer.isEmpty()).toBe(true);
    expect(layer.strokeCount).toBe(0);
    expect(layer.undo()).toBe(false);
  });

  it("matches an independent rasterizer across random paint/erase/undo runs", () => {
    const rand = mulberry32(1234);
    const width = 28;
    const height = 22;
    const layer = new MaskLayer(width, height);
    const applied: Stroke[] = [];
    for (let op = 0; op < 60; op++) {
      const roll = rand();
      if (roll < 0.2 && applied.length > 0) {
        layer.undo();
        applied.pop();
      } else {
        const nPts = 1 + Math.floor(rand() * 4);
        const path: Array<[number, number]> = [];
        for (let i = 0; i < nPts; i++) {
          path.push([rand() * (width + 8) - 4, rand() * (height + 8) - 4]);
        }
        const radius = 1 + rand() * 5;
        const mode: BrushMode = rand() < 0.7 ? "add" : "erase";
        layer.paintStroke(path, radius, mode);
        applied.push({ path, radius, mode });
      }
      expect(layer.pixels).toEqual(refRasterize(width, height, applied));
      expect(layer.pixels).toEqual(layer.replayFromHistory());
    }
  });

  it("snapshot copies the pixels instead of aliasing them", () => {
    const layer = new MaskLayer(6, 6);
    layer.paintStroke([[3, 3]], 2, "add");
    const snap = layer.snapshot();
    layer.paintStroke([[0, 0]], 6, "erase");
    expect(snap.data.some((v) => v === 255)).toBe(true);
    expect(layer.isEmpty()).toBe(true);
  });
});
