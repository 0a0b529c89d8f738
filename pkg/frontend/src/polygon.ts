import { PolygonPayload } from "./api.js";

// Headless test environments have no 2D context (jsdom throws); click
// handling works regardless, only the painting is skipped.
function context2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext("2d");
  } catch {
    return null;
  }
}

// Polygons are drawn client-side from their vertex list so nothing about
// the true bounding-box center leaks into the page until feedback time.
export function drawPolygon(canvas: HTMLCanvasElement, poly: PolygonPayload): void {
  const ctx = context2d(canvas);
  if (!ctx) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#f4f4f4";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.beginPath();
  const [x0, y0] = poly.vertices[0];
  ctx.moveTo(x0, y0);
  for (const [x, y] of poly.vertices.slice(1)) {
    ctx.lineTo(x, y);
  }
  ctx.closePath();
  ctx.fillStyle = "#5b8db8";
  ctx.fill();
  ctx.strokeStyle = "#2c4a63";
  ctx.stroke();
}

export function drawImagePlaceholder(canvas: HTMLCanvasElement): void {
  const ctx = context2d(canvas);
  if (!ctx) {
    return;
  }
  ctx.fillStyle = "#d9d9d9";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
}
