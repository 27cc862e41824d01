/** PNG codec boundary: pngjs under node (tests, tooling), canvas in the
 *  browser. Masks travel as 8-bit PNGs where >= 128 means inside. */

import type { RawBitmap, RawImage } from "./types.js";

export interface PngCodec {
  /** base64 PNG of a one-byte-per-pixel bitmap */
  encodeGray(bitmap: RawBitmap): Promise<string>;
  /** first channel of any base64 PNG */
  decodeGray(b64: string): Promise<RawBitmap>;
  decodeRgba(b64: string): Promise<RawImage>;
}
