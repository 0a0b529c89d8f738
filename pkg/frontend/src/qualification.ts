import {
  ApiClient,
  PolygonPayload,
  QualificationResult,
  TimedClick,
} from "./api.js";
import { CanvasPoint, ClickSurface } from "./clicks.js";
import { drawPolygon } from "./polygon.js";

export interface QualificationCallbacks {
  onQualified?: () => void;
  onResult?: (result: QualificationResult) => void;
}

/**
 * Sequential polygon-clicking test. Polygons are shown one at a time on a
 * single canvas; one click advances to the next. After the last click the
 * whole attempt is submitted and per-polygon feedback is rendered.
 */
export class QualificationFlow {
  readonly canvas: HTMLCanvasElement;
  private surface: ClickSurface;
  private polygons: PolygonPayload[] = [];
  private clicks: TimedClick[] = [];
  private index = 0;
  private statusEl: HTMLElement;
  private feedbackEl: HTMLElement;
  private submitting: Promise<void> | null = null;

  constructor(
    private api: ApiClient,
    root: HTMLElement,
    private callbacks: QualificationCallbacks = {},
  ) {
    this.canvas = document.createElement("canvas");
    this.statusEl = document.createElement("p");
    this.statusEl.className = "status";
    this.feedbackEl = document.createElement("div");
    this.feedbackEl.className = "feedback";
    root.appendChild(this.statusEl);
    root.appendChild(this.canvas);
    root.appendChild(this.feedbackEl);
    this.surface = new ClickSurface(this.canvas, (p, t) => this.handleClick(p, t));
  }

  async start(): Promise<void> {
    const payload = await this.api.getQualification();
    if (payload.status === "qualified") {
      this.statusEl.textContent = "Already qualified.";
      this.callbacks.onQualified?.();
      return;
    }
    this.polygons = payload.polygons;
    this.clicks = [];
    this.index = 0;
    this.feedbackEl.innerHTML = "";
    if (payload.canvas) {
      this.canvas.width = payload.canvas.width;
      this.canvas.height = payload.canvas.height;
    }
    this.showCurrent();
  }

  /** Vertices of the polygon currently awaiting a click. */
  current(): PolygonPayload | null {
    return this.polygons[this.index] ?? null;
  }

  /** Resolves once an in-flight submission has been rendered. */
  async settled(): Promise<void> {
    while (this.submitting) {
      await this.submitting;
    }
  }

  private showCurrent(): void {
    this.statusEl.textContent = `Polygon ${this.index + 1} of ${this.polygons.length}: click the center of its imaginary tight box.`;
    drawPolygon(this.canvas, this.polygons[this.index]);
    this.surface.markShown();
  }

  private handleClick(p: CanvasPoint, timeMs: number): void {
    if (this.index >= this.polygons.length || this.submitting) {
      return;
    }
    this.clicks.push({ x: p.x, y: p.y, time_ms: timeMs });
    this.index += 1;
    if (this.index < this.polygons.length) {
      this.showCurrent();
    } else {
      this.submitting = this.submit().finally(() => {
        this.submitting = null;
      });
    }
  }

  private async submit(): Promise<void> {
    const result = await this.api.submitQualification(this.clicks);
    this.renderResult(result);
    this.callbacks.onResult?.(result);
    if (result.passed) {
      this.callbacks.onQualified?.();
    }
  }

  private renderResult(result: QualificationResult): void {
    this.feedbackEl.innerHTML = "";
    if (result.passed) {
      this.statusEl.textContent = `Passed: mean error ${result.mean_error_px?.toFixed(1)} px.`;
    } else {
      this.statusEl.textContent =
        `Not passed yet: mean error ${result.mean_error_px?.toFixed(1)} px ` +
        `(needs to be under ${result.threshold_px} px). Review the feedback and try again.`;
      const retry = document.createElement("button");
      retry.className = "retry";
      retry.textContent = "Try again";
      retry.addEventListener("click", () => void this.start());
      this.feedbackEl.appendChild(retry);
    }

    const table = document.createElement("table");
    table.className = "feedback-table";
    const head = table.insertRow();
    for (const label of ["#", "true center", "your click", "distance"]) {
      const th = document.createElement("th");
      th.textContent = label;
      head.appendChild(th);
    }
    (result.feedback ?? []).forEach((row, i) => {
      const tr = table.insertRow();
      tr.className = "feedback-row";
      tr.insertCell().textContent = String(i + 1);
      tr.insertCell().textContent = `(${row.center[0].toFixed(1)}, ${row.center[1].toFixed(1)})`;
      tr.insertCell().textContent = `(${row.click[0].toFixed(1)}, ${row.click[1].toFixed(1)})`;
      tr.insertCell().textContent = `${row.distance_px.toFixed(1)} px`;
    });
    this.feedbackEl.appendChild(table);
  }
}
