import { ChildProcess, spawn } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient, PolygonPayload } from "../src/api.js";

const here = path.dirname(fileURLToPath(import.meta.url));

export interface ServiceFixture {
  baseUrl: string;
  workDir: string;
  proc: ChildProcess;
  stop: () => void;
}

/** Spawn the real annotation service on a free-ish port and wait for it. */
export async function startService(): Promise<ServiceFixture> {
  const port = 18000 + Math.floor(Math.random() * 2000);
  const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "clickmil-ui-"));
  const proc = spawn("python3", [path.join(here, "serve_fixture.py"), String(port), workDir], {
    stdio: ["ignore", "inherit", "inherit"],
  });
  const baseUrl = `http://127.0.0.1:${port}`;

  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      const resp = await fetch(baseUrl + "/instructions");
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill();
      throw new Error("annotation service did not start within 30s");
    }
    await sleep(150);
  }

  return { baseUrl, workDir, proc, stop: () => proc.kill() };
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function bboxCenter(poly: PolygonPayload): { x: number; y: number } {
  const xs = poly.vertices.map((v) => v[0]);
  const ys = poly.vertices.map((v) => v[1]);
  return {
    x: (Math.min(...xs) + Math.max(...xs)) / 2,
    y: (Math.min(...ys) + Math.max(...ys)) / 2,
  };
}

/** Dispatch a scripted browser click at canvas-space coordinates. */
export function clickAt(canvas: HTMLCanvasElement, x: number, y: number): void {
  canvas.dispatchEvent(new MouseEvent("click", { clientX: x, clientY: y, bubbles: true }));
}

/** Qualify a session through the HTTP API (for tests beyond the quiz). */
export async function qualifyViaApi(api: ApiClient): Promise<void> {
  const payload = await api.getQualification();
  const clicks = payload.polygons.map((poly) => {
    const c = bboxCenter(poly);
    return { x: c.x, y: c.y, time_ms: 1200 };
  });
  const result = await api.submitQualification(clicks);
  if (!result.passed) {
    throw new Error("center clicks unexpectedly failed qualification");
  }
}

export function readGtCenters(workDir: string): Record<string, [number, number]> {
  return JSON.parse(fs.readFileSync(path.join(workDir, "gt_centers.json"), "utf8"));
}

/** Parse the service's append-only click log (header line + records). */
export function readClickLog(workDir: string): Record<string, unknown>[] {
  const file = path.join(workDir, "clicks.jsonl");
  if (!fs.existsSync(file)) {
    return [];
  }
  const lines = fs.readFileSync(file, "utf8").trim().split("\n");
  return lines.slice(1).map((l) => JSON.parse(l));
}
