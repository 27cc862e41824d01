/** Mesh placement as position / Euler rotation / uniform scale.

The service wants one row-major 4x4; we compose M = T * Rz * Ry * Rx * S,
i.e. scale first, then rotate about x, y, z in that order, then translate.
Drag handles nudge the position inside a world-axis plane without any
camera math: screen-right is the plane's first axis, screen-down its
negated second axis.
*/

export interface MeshTransform {
  position: [number, number, number];
  rotationDeg: [number, number, number];
  scale: number;
}

export function identityTransform(): MeshTransform {
  return { position: [0, 0, 0], rotationDeg: [0, 0, 0], scale: 1 };
}

type Mat3 = number[]; // 9, row-major

function mul3(a: Mat3, b: Mat3): Mat3 {
  const out = new Array<number>(9).fill(0);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      for (let k = 0; k < 3; k++) out[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
    }
  }
  return out;
}

export function toMatrix(t: MeshTransform): number[] {
  if (!(t.scale > 0)) throw new RangeError(`scale must be positive, got ${t.scale}`);
  const [rx, ry, rz] = t.rotationDeg.map((d) => (d * Math.PI) / 180);
  const cx = Math.cos(rx), sx = Math.sin(rx);
  const cy = Math.cos(ry), sy = Math.sin(ry);
  const cz = Math.cos(rz), sz = Math.sin(rz);
  const Rx: Mat3 = [1, 0, 0, 0, cx, -sx, 0, sx, cx];
  const Ry: Mat3 = [cy, 0, sy, 0, 1, 0, -sy, 0, cy];
  const Rz: Mat3 = [cz, -sz, 0, sz, cz, 0, 0, 0, 1];
  const r = mul3(Rz, mul3(Ry, Rx));
  const s = t.scale;
  const [px, py, pz] = t.position;
  return [
    r[0] * s, r[1] * s, r[2] * s, px,
    r[3] * s, r[4] * s, r[5] * s, py,
    r[6] * s, r[7] * s, r[8] * s, pz,
    0, 0, 0, 1,
  ];
}

export function applyToPoint(m: number[], p: [number, number, number]): [number, number, number] {
  const [x, y, z] = p;
  return [
    m[0] * x + m[1] * y + m[2] * z + m[3],
    m[4] * x + m[5] * y + m[6] * z + m[7],
    m[8] * x + m[9] * y + m[10] * z + m[11],
  ];
}

export type DragPlane = "xy" | "xz" | "yz";

export function nudge(
  t: MeshTransform,
  dxPixels: number,
  dyPixels: number,
  plane: DragPlane,
  unitsPerPixel: number,
): MeshTransform {
  const du = dxPixels * unitsPerPixel;
  const dv = -dyPixels * unitsPerPixel;
  const [x, y, z] = t.position;
  const position: [number, number, number] =
    plane === "xy" ? [x + du, y + dv, z] :
    plane === "xz" ? [x + du, y, z + dv] :
    [x, y + du, z + dv];
  return { ...t, position };
}
