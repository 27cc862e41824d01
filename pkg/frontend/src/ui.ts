/** Browser wiring: canvas painting, overlay compositing, the job panel.
 *  Everything testable lives in the other modules; this file only binds
 *  them to the DOM, so it is exercised by the build, not by unit tests. */

import { ApiClient } from "./api.js";
import { b64ToBytes, bytesToB64 } from "./b64.js";
import type { PngCodec } from "./codec.js";
import { JobMonitor } from "./jobs.js";
import { polylinePoints, strengthCurve } from "./schedule.js";
import { AnnotationSession } from "./session.js";
import type { BrushMode } from "./mask.js";
import type { RawBitmap, RawImage } from "./types.js";

export class CanvasPngCodec implements PngCodec {
  private canvas(width: number, height: number): [HTMLCanvasElement, CanvasRenderingContext2D] {
    const canvas = document.createElement("canvas");
    canvas.width = width;
    canvas.height = height;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas is unavailable");
    return [canvas, ctx];
  }

  async encodeGray(bitmap: RawBitmap): Promise<string> {
    const [canvas, ctx] = this.canvas(bitmap.width, bitmap.height);
    const img = ctx.createImageData(bitmap.width, bitmap.height);
    for (let i = 0; i < bitmap.data.length; i++) {
      const v = bitmap.data[i];
      img.data[i * 4] = v;
      img.data[i * 4 + 1] = v;
      img.data[i * 4 + 2] = v;
      img.data[i * 4 + 3] = 255;
    }
    ctx.putImageData(img, 0, 0);
    const blob = await new Promise<Blob>((resolve, reject) =>
      canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("png encode failed"))), "image/png"),
    );
    return bytesToB64(new Uint8Array(await blob.arrayBuffer()));
  }

  private async draw(b64: string): Promise<ImageData> {
    const blob = new Blob([b64ToBytes(b64)], { type: "image/png" });
    const bmp = await createImageBitmap(blob);
    const [, ctx] = this.canvas(bmp.width, bmp.height);
    ctx.drawImage(bmp, 0, 0);
    return ctx.getImageData(0, 0, bmp.width, bmp.height);
  }

  async decodeGray(b64: string): Promise<RawBitmap> {
    const img = await this.draw(b64);
    const out = new Uint8Array(img.width * img.height);
    for (let i = 0; i < out.length; i++) out[i] = img.data[i * 4];
    return { width: img.width, height: img.height, data: out };
  }

  async decodeRgba(b64: string): Promise<RawImage> {
    const img = await this.draw(b64);
    return { width: img.width, height: img.height, data: new Uint8Array(img.data) };
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

const MASK_TINT: [number, number, number] = [255, 64, 64];
const OVERLAY_TINT: [number, number, number] = [64, 128, 255];

function tintCanvas(
  canvas: HTMLCanvasElement,
  bitmap: RawBitmap | Uint8Array,
  width: number,
  height: number,
  tint: [number, number, number],
  alpha: number,
): void {
  const data = bitmap instanceof Uint8Array ? bitmap : bitmap.data;
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(width, height);
  for (let i = 0; i < data.length; i++) {
    if (data[i] >= 128) {
      img.data[i * 4] = tint[0];
      img.data[i * 4 + 1] = tint[1];
      img.data[i * 4 + 2] = tint[2];
      img.data[i * 4 + 3] = alpha;
    }
  }
  ctx.putImageData(img, 0, 0);
}

export function buildUi(
  root: HTMLElement,
  api: ApiClient,
  session: AnnotationSession,
  monitor: JobMonitor,
): void {
  const viewStrip = el("div", { class: "view-strip" });
  const stage = el("div", { class: "stage" });
  const renderImg = el("img", { class: "stage-layer", alt: "view render" });
  const overlayCanvas = el("canvas", { class: "stage-layer" });
  const paintCanvas = el("canvas", { class: "stage-layer" });
  stage.append(renderImg, overlayCanvas, paintCanvas);

  const radiusInput = el("input", { type: "range", min: "1", max: "40", value: "8" });
  const modeButton = el("button", {}, "brush: add");
  const undoButton = el("button", {}, "undo");
  const clearButton = el("button", {}, "clear view");
  const previewButton = el("button", {}, "preview hull");
  const toasts = el("div", { class: "toasts" });

  const promptInput = el("input", { type: "text", placeholder: "prompt" });
  const stepsInput = el("input", { type: "number", value: "3000" });
  const updateInput = el("input", { type: "number", value: "200" });
  const seedInput = el("input", { type: "number", value: "0" });
  const startButton = el("button", {}, "start edit job");
  const cancelButton = el("button", { disabled: "" }, "cancel");
  const jobPhase = el("div", { class: "job-phase" }, "no job");
  const plotSvg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  plotSvg.setAttribute("viewBox", "0 0 200 80");
  plotSvg.setAttribute("class", "strength-plot");
  const eventLog = el("pre", { class: "event-log" });
  const jobPreview = el("img", { class: "job-preview", alt: "job preview" });

  const tools = el("div", { class: "tools" });
  tools.append(radiusInput, modeButton, undoButton, clearButton, previewButton);
  const jobPanel = el("div", { class: "job-panel" });
  jobPanel.append(
    promptInput, stepsInput, updateInput, seedInput,
    startButton, cancelButton, jobPhase, plotSvg, eventLog, jobPreview,
  );
  root.append(viewStrip, stage, tools, jobPanel, toasts);

  let mode: BrushMode = "add";
  let strokePath: Array<[number, number]> = [];
  let painting = false;

  const radius = () => Number(radiusInput.value);

  function showToasts(): void {
    toasts.replaceChildren(
      ...session.toasts.slice(-3).map((t) => el("div", { class: `toast ${t.kind}` }, t.message)),
    );
  }

  function redraw(): void {
    const info = session.view(session.selectedView);
    renderImg.src = api.renderUrl(info.id);
    const layer = session.layer(info.id);
    tintCanvas(paintCanvas, layer.pixels, info.width, info.height, MASK_TINT, 160);
    const overlay = session.overlays.get(info.id);
    if (overlay) {
      tintCanvas(overlayCanvas, overlay, overlay.width, overlay.height, OVERLAY_TINT, 120);
    } else {
      overlayCanvas.width = info.width;
      overlayCanvas.height = info.height;
    }
    previewButton.toggleAttribute("disabled", !session.canPreview());
    showToasts();
  }

  function canvasPoint(ev: PointerEvent): [number, number] {
    const rect = paintCanvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * paintCanvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * paintCanvas.height;
    return [x, y];
  }

  paintCanvas.addEventListener("pointerdown", (ev) => {
    painting = true;
    strokePath = [canvasPoint(ev)];
    paintCanvas.setPointerCapture(ev.pointerId);
  });
  paintCanvas.addEventListener("pointermove", (ev) => {
    if (!painting) return;
    strokePath.push(canvasPoint(ev));
  });
  paintCanvas.addEventListener("pointerup", () => {
    if (!painting) return;
    painting = false;
    session.paint(session.selectedView, strokePath, radius(), mode);
    strokePath = [];
    redraw();
  });

  modeButton.addEventListener("click", () => {
    mode = mode === "add" ? "erase" : "add";
    modeButton.textContent = `brush: ${mode}`;
  });
  undoButton.addEventListener("click", () => {
    session.undo(session.selectedView);
    redraw();
  });
  clearButton.addEventListener("click", () => {
    void session.removeAnnotation(session.selectedView).then(redraw);
  });
  previewButton.addEventListener("click", () => {
    void session.liftAndPreview().then(redraw);
  });

  function drawPlot(): void {
    const nSteps = (monitor.draft?.n_steps ?? Number(stepsInput.value)) || 1;
    const curve = strengthCurve(nSteps);
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", polylinePoints(curve, nSteps, 200, 80));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "#ff8800");
    plotSvg.replaceChildren(line);
    for (const p of monitor.updates) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", ((p.step / nSteps) * 200).toFixed(2));
      dot.setAttribute("cy", ((1 - p.s) * 80).toFixed(2));
      dot.setAttribute("r", "2");
      dot.setAttribute("fill", "#3366ff");
      plotSvg.append(dot);
    }
  }

  let pollTimer: ReturnType<typeof setInterval> | null = null;

  function stopPolling(): void {
    if (pollTimer !== null) clearInterval(pollTimer);
    pollTimer = null;
  }

  async function poll(): Promise<void> {
    try {
      const status = await monitor.tick();
      jobPhase.textContent = `${status.phase} at step ${status.step}`;
      eventLog.textContent = monitor
        .eventTail()
        .slice(-8)
        .map((e) => `${e.step}: ${e.event}`)
        .join("\n");
      if (monitor.jobId) {
        jobPreview.src = `${api.jobPreviewUrl(monitor.jobId, session.selectedView)}&t=${Date.now()}`;
      }
      drawPlot();
      if (monitor.finished) {
        stopPolling();
        cancelButton.setAttribute("disabled", "");
        if (status.phase === "failed") {
          session.toasts.push({ kind: "error", message: status.error ?? "job failed" });
          showToasts();
        }
      }
    } catch (err) {
      session.toasts.push({ kind: "error", message: (err as Error).message });
      showToasts();
    }
  }

  startButton.addEventListener("click", () => {
    void (async () => {
      try {
        const ids = await session.syncMasks();
        await monitor.start({
          mask_ids: ids,
          prompt: promptInput.value || undefined,
          n_steps: Number(stepsInput.value),
          n_update: Number(updateInput.value),
          seed: Number(seedInput.value),
        });
        cancelButton.removeAttribute("disabled");
        stopPolling();
        pollTimer = setInterval(() => void poll(), 1000);
      } catch (err) {
        session.toasts.push({ kind: "error", message: (err as Error).message });
        showToasts();
      }
    })();
  });

  cancelButton.addEventListener("click", () => {
    void monitor.cancel().then(() => {
      if (monitor.cancelRequested) cancelButton.setAttribute("disabled", "");
    });
  });

  void session.load().then(() => {
    viewStrip.replaceChildren(
      ...session.views.map((v) => {
        const thumb = el("img", { src: api.renderUrl(v.id), class: "thumb", alt: v.file });
        thumb.addEventListener("click", () => {
          session.selectedView = v.id;
          redraw();
        });
        return thumb;
      }),
    );
    if (session.views.length > 0) {
      session.selectedView = session.views[0].id;
      redraw();
    }
    drawPlot();
  });
}
