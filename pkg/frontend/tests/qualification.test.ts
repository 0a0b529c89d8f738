import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, QualificationResult } from "../src/api.js";
import { QualificationFlow } from "../src/qualification.js";
import { ServiceFixture, bboxCenter, clickAt, sleep, startService } from "./helpers.js";

let service: ServiceFixture;

beforeAll(async () => {
  service = await startService();
});

afterAll(() => {
  service.stop();
});

async function runAttempt(
  flow: QualificationFlow,
  results: QualificationResult[],
  offset: { x: number; y: number },
): Promise<QualificationResult> {
  const seen = results.length;
  for (let i = 0; i < 20; i++) {
    const poly = flow.current();
    expect(poly).not.toBeNull();
    const c = bboxCenter(poly!);
    clickAt(flow.canvas, c.x + offset.x, c.y + offset.y);
    await sleep(155); // wait out the double-click lock between polygons
  }
  await flow.settled();
  expect(results.length).toBe(seen + 1);
  return results[results.length - 1];
}

describe("qualification flow end-to-end", () => {
  it("clicks at true centers pass and qualify the session", async () => {
    const api = new ApiClient(service.baseUrl);
    await api.createSession();
    const root = document.createElement("div");
    const results: QualificationResult[] = [];
    const flow = new QualificationFlow(api, root, { onResult: (r) => results.push(r) });
    await flow.start();

    const result = await runAttempt(flow, results, { x: 0, y: 0 });
    expect(result.passed).toBe(true);
    expect(root.querySelector(".status")!.textContent).toContain("Passed");

    // the service now serves batches to this session instead of a 403
    const batch = await api.getBatch();
    expect(batch.batch_id).not.toBeNull();
  });

  it("clicks offset by 30 px fail with 20 feedback rows of center, click, distance", async () => {
    const api = new ApiClient(service.baseUrl);
    await api.createSession();
    const root = document.createElement("div");
    const results: QualificationResult[] = [];
    const flow = new QualificationFlow(api, root, { onResult: (r) => results.push(r) });
    await flow.start();

    const result = await runAttempt(flow, results, { x: 30, y: 0 });
    expect(result.passed).toBe(false);
    expect(result.feedback).toHaveLength(20);
    for (const row of result.feedback!) {
      expect(row.distance_px).toBeCloseTo(30, 5);
      expect(row.center).toHaveLength(2);
      expect(row.click).toHaveLength(2);
    }

    // the rendered feedback table shows one row per polygon plus a retry
    const rows = root.querySelectorAll(".feedback-row");
    expect(rows).toHaveLength(20);
    expect(rows[0].textContent).toContain("px");
    expect(root.querySelector("button.retry")).not.toBeNull();
    expect(root.querySelector(".status")!.textContent).toContain("try again");

    // the retry affordance fetches a fresh attempt that can still pass
    (root.querySelector("button.retry") as HTMLButtonElement).click();
    await sleep(400);
    const second = await runAttempt(flow, results, { x: 0, y: 0 });
    expect(second.passed).toBe(true);
  });
});
