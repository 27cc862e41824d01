/** pngjs-backed codec; used by the tests and by node tooling, never loaded
 *  in the browser (the UI entry point wires up the canvas codec instead). */

import { PNG } from "pngjs";

import { b64ToBytes, bytesToB64 } from "./b64.js";
import type { PngCodec } from "./codec.js";
import type { RawBitmap, RawImage } from "./types.js";

export class NodePngCodec implements PngCodec {
  async encodeGray(bitmap: RawBitmap): Promise<string> {
    const { width, height, data } = bitmap;
    if (data.length !== width * height) {
      throw new RangeError(`bitmap holds ${data.length} bytes for ${width}x${height}`);
    }
    const png = new PNG({ width, height, colorType: 0 });
    for (let i = 0; i < width * height; i++) {
      const v = data[i];
      png.data[i * 4] = v;
      png.data[i * 4 + 1] = v;
      png.data[i * 4 + 2] = v;
      png.data[i * 4 + 3] = 255;
    }
    const buf = PNG.sync.write(png, { colorType: 0 });
    return bytesToB64(new Uint8Array(buf.buffer, buf.byteOffset, buf.byteLength));
  }

  async decodeGray(b64: string): Promise<RawBitmap> {
    const png = PNG.sync.read(Buffer.from(b64ToBytes(b64)));
    const out = new Uint8Array(png.width * png.height);
    for (let i = 0; i < out.length; i++) out[i] = png.data[i * 4];
    return { width: png.width, height: png.height, data: out };
  }

  async decodeRgba(b64: string): Promise<RawImage> {
    const png = PNG.sync.read(Buffer.from(b64ToBytes(b64)));
    return {
      width: png.width,
      height: png.height,
      data: new Uint8Array(png.data.buffer, png.data.byteOffset, png.data.byteLength).slice(),
    };
  }
}
