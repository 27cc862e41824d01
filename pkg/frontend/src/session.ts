/** Client-side annotation state: painted layers, lifted-hull overlays,
 *  mesh placement, and preview request coalescing. */

import type { ApiClient, HullSpec } from "./api.js";
import type { PngCodec } from "./codec.js";
import { MaskLayer, type BrushMode } from "./mask.js";
import { toMatrix, type MeshTransform } from "./mesh.js";
import type { RawBitmap, Toast, ViewInfo } from "./types.js";

export class AnnotationSession {
  views: ViewInfo[] = [];
  selectedView = 0;
  readonly layers = new Map<number, MaskLayer>();
  readonly serverMaskIds = new Map<number, string>();
  readonly overlays = new Map<number, RawBitmap>();
  readonly toasts: Toast[] = [];
  meshObjB64: string | null = null;
  meshTransform: MeshTransform | null = null;

  private previewInFlight = false;
  private previewQueued = false;

  constructor(
    private readonly api: ApiClient,
    private readonly codec: PngCodec,
  ) {}

  async load(): Promise<void> {
    this.views = await this.api.getViews();
  }

  view(id: number): ViewInfo {
    const found = this.views.find((v) => v.id === id);
    if (!found) throw new RangeError(`unknown view ${id}`);
    return found;
  }

  /** The layer for a view, created empty at the view's dimensions. */
  layer(viewId: number): MaskLayer {
    let layer = this.layers.get(viewId);
    if (!layer) {
      const info = this.view(viewId);
      layer = new MaskLayer(info.width, info.height);
      this.layers.set(viewId, layer);
    }
    return layer;
  }

  paint(
    viewId: number,
    path: ReadonlyArray<readonly [number, number]>,
    radius: number,
    mode: BrushMode,
  ): void {
    this.layer(viewId).paintStroke(path, radius, mode);
  }

  undo(viewId: number): boolean {
    return this.layers.get(viewId)?.undo() ?? false;
  }

  async removeAnnotation(viewId: number): Promise<void> {
    this.layers.get(viewId)?.clear();
    const id = this.serverMaskIds.get(viewId);
    if (id) {
      this.serverMaskIds.delete(viewId);
      await this.api.deleteMask(id);
    }
  }

  annotatedViews(): number[] {
    return [...this.layers.entries()]
      .filter(([, layer]) => !layer.isEmpty())
      .map(([viewId]) => viewId)
      .sort((a, b) => a - b);
  }

  /** The lift action stays disabled until there is something to lift. */
  canPreview(): boolean {
    if (this.annotatedViews().length > 0) return true;
    return this.meshObjB64 !== null && this.meshTransform !== null;
  }

  /** Upload every non-empty painted layer, replacing stale server copies. */
  async syncMasks(): Promise<string[]> {
    const ids: string[] = [];
    for (const viewId of this.annotatedViews()) {
      const layer = this.layers.get(viewId)!;
      const b64 = await this.codec.encodeGray(layer.snapshot());
      const prior = this.serverMaskIds.get(viewId);
      const id = await this.api.uploadMask(viewId, b64);
      this.serverMaskIds.set(viewId, id);
      ids.push(id);
      if (prior) await this.api.deleteMask(prior);
    }
    return ids;
  }

  /** Reproject the current edit region into every view and refresh the
   *  overlay set. Calls while a request is in flight coalesce into one
   *  rerun, so at most one preview request is outstanding at a time. A
   *  failure surfaces as a toast and leaves the overlays unchanged. */
  async liftAndPreview(): Promise<void> {
    if (!this.canPreview()) return;
    if (this.previewInFlight) {
      this.previewQueued = true;
      return;
    }
    this.previewInFlight = true;
    try {
      do {
        this.previewQueued = false;
        try {
          const entries = await this.requestPreview();
          const next = new Map<number, RawBitmap>();
          for (const e of entries) next.set(e.view, await this.codec.decodeGray(e.mask));
          this.overlays.clear();
          for (const [viewId, bitmap] of next) this.overlays.set(viewId, bitmap);
        } catch (err) {
          this.toasts.push({
            kind: "error",
            message: `hull preview failed: ${(err as Error).message}`,
          });
        }
      } while (this.previewQueued);
    } finally {
      this.previewInFlight = false;
    }
  }

  private async requestPreview() {
    let spec: HullSpec;
    if (this.annotatedViews().length > 0) {
      spec = { mask_ids: await this.syncMasks() };
    } else {
      spec = { mesh: this.meshObjB64!, transform: toMatrix(this.meshTransform!) };
    }
    return this.api.hullPreview(spec);
  }
}
