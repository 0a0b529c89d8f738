// Canvas click capture: maps browser events to canvas-space pixels and
// times each click from the moment its target became visible.

export interface CanvasPoint {
  x: number;
  y: number;
}

export type ClickHandler = (p: CanvasPoint, timeMs: number) => void;

export class ClickSurface {
  private lockedUntil = 0;
  private shownAt = 0;

  constructor(
    readonly canvas: HTMLCanvasElement,
    private onClick: ClickHandler,
    private lockMs = 150,
  ) {
    canvas.style.cursor = "crosshair";
    canvas.addEventListener("click", (e) => this.handle(e));
  }

  /** Restart the response timer; call whenever a new target is displayed. */
  markShown(): void {
    this.shownAt = performance.now();
  }

  /**
   * Map a mouse event to the canvas's logical pixel grid. The bounding
   * rect is in CSS pixels, so dividing by it cancels any CSS scaling and
   * device pixel ratio; coordinates sent to the service are always
   * canvas-space. Headless test environments report a zero-size rect, in
   * which case client coordinates already are canvas coordinates.
   */
  toCanvasSpace(e: MouseEvent): CanvasPoint {
    const rect = this.canvas.getBoundingClientRect();
    if (rect.width === 0 || rect.height === 0) {
      return { x: e.clientX, y: e.clientY };
    }
    return {
      x: ((e.clientX - rect.left) * this.canvas.width) / rect.width,
      y: ((e.clientY - rect.top) * this.canvas.height) / rect.height,
    };
  }

  private handle(e: MouseEvent): void {
    const now = performance.now();
    if (now < this.lockedUntil) {
      return; // brief lock after each click swallows double-submissions
    }
    this.lockedUntil = now + this.lockMs;
    const timeMs = Math.max(1, now - this.shownAt);
    this.onClick(this.toCanvasSpace(e), timeMs);
  }
}
