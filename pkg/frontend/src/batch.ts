import { ApiClient, BatchClick, BatchItem, BatchPayload, BatchResult } from "./api.js";
import { CanvasPoint, ClickSurface } from "./clicks.js";
import { drawImagePlaceholder } from "./polygon.js";

export interface BatchCallbacks {
  onResult?: (result: BatchResult) => void;
  onExhausted?: () => void;
}

/**
 * One 20-image annotation batch. All images in a batch share a class, so
 * the class name is rendered once in the heading rather than per image.
 * The response timer restarts every time a new image becomes visible.
 */
export class BatchFlow {
  readonly canvas: HTMLCanvasElement;
  private surface: ClickSurface;
  private batch: BatchPayload | null = null;
  private clicks: BatchClick[] = [];
  private index = 0;
  private headingEl: HTMLElement;
  private statusEl: HTMLElement;
  private submitting: Promise<void> | null = null;

  constructor(
    private api: ApiClient,
    root: HTMLElement,
    private callbacks: BatchCallbacks = {},
  ) {
    this.headingEl = document.createElement("h2");
    this.headingEl.className = "batch-class";
    this.statusEl = document.createElement("p");
    this.statusEl.className = "status";
    this.canvas = document.createElement("canvas");
    root.appendChild(this.headingEl);
    root.appendChild(this.statusEl);
    root.appendChild(this.canvas);
    this.surface = new ClickSurface(this.canvas, (p, t) => this.handleClick(p, t));
  }

  async start(): Promise<void> {
    const batch = await this.api.getBatch();
    if (batch.batch_id === null) {
      this.headingEl.textContent = "";
      this.statusEl.textContent = "No more images to annotate. Thank you!";
      this.callbacks.onExhausted?.();
      return;
    }
    this.batch = batch;
    this.clicks = [];
    this.index = 0;
    this.headingEl.textContent = `Click the center of each ${batch.class}`;
    this.showCurrent();
  }

  currentItem(): BatchItem | null {
    return this.batch?.items[this.index] ?? null;
  }

  async settled(): Promise<void> {
    while (this.submitting) {
      await this.submitting;
    }
  }

  /** Identical markup for every item; nothing distinguishes golden ones. */
  private showCurrent(): void {
    const item = this.batch!.items[this.index];
    this.canvas.width = item.width;
    this.canvas.height = item.height;
    this.statusEl.textContent = `Image ${this.index + 1} of ${this.batch!.items.length}`;
    drawImagePlaceholder(this.canvas);
    this.surface.markShown();
  }

  private handleClick(p: CanvasPoint, timeMs: number): void {
    if (!this.batch || this.submitting) {
      return;
    }
    const item = this.batch.items[this.index];
    this.clicks.push({ image_id: item.image_id, x: p.x, y: p.y, time_ms: timeMs });
    this.index += 1;
    if (this.index < this.batch.items.length) {
      this.showCurrent();
    } else {
      this.submitting = this.submit().finally(() => {
        this.submitting = null;
      });
    }
  }

  private async submit(): Promise<void> {
    const result = await this.api.submitBatch(this.batch!.batch_id!, this.clicks);
    this.batch = null;
    if (result.accepted) {
      this.statusEl.textContent = "Batch accepted, thank you. Fetching the next one is a click away.";
    } else {
      // rejection wording stays neutral: clicking centers is genuinely hard
      this.statusEl.textContent =
        "This batch did not meet the accuracy bar, so it was not saved. " +
        "No worries: take another look at the instructions and try a fresh batch.";
    }
    const next = document.createElement("button");
    next.className = "next-batch";
    next.textContent = result.accepted ? "Next batch" : "Try another batch";
    next.addEventListener("click", () => void this.start());
    this.statusEl.appendChild(next);
    this.callbacks.onResult?.(result);
  }
}
