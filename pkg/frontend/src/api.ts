// Typed client for the annotation service. The UI talks to the service
// exclusively through this module; no other code issues requests.

export interface Instructions {
  center_definition: string;
  truncation_rule: string;
  multi_instance_rule: string;
  pacing_seconds_per_click: number;
}

export interface PolygonPayload {
  vertices: [number, number][];
}

export interface QualificationPayload {
  status: string;
  canvas?: { width: number; height: number };
  polygons: PolygonPayload[];
}

export interface FeedbackRow {
  center: [number, number];
  click: [number, number];
  distance_px: number;
}

export interface QualificationResult {
  passed: boolean;
  mean_error_px?: number;
  threshold_px?: number;
  feedback?: FeedbackRow[];
}

export interface TimedClick {
  x: number;
  y: number;
  time_ms: number;
}

export interface BatchClick extends TimedClick {
  image_id: string;
}

export interface BatchItem {
  image_id: string;
  width: number;
  height: number;
}

export interface BatchPayload {
  batch_id: string | null;
  class?: string;
  items: BatchItem[];
}

export interface BatchResult {
  accepted: boolean;
  mean_golden_error_px: number;
  mean_response_time_ms: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
  }
}

export class ApiClient {
  private token: string | null = null;

  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const doc = await resp.json();
        if (doc.detail) detail = String(doc.detail);
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async createSession(): Promise<string> {
    const doc = await this.request<{ token: string }>("POST", "/session");
    this.token = doc.token;
    return doc.token;
  }

  get sessionToken(): string | null {
    return this.token;
  }

  async getInstructions(): Promise<Instructions> {
    const doc = await this.request<{ instructions: Instructions }>("GET", "/instructions");
    return doc.instructions;
  }

  async getQualification(): Promise<QualificationPayload> {
    return this.request("GET", `/qualification?token=${this.token}`);
  }

  async submitQualification(clicks: TimedClick[]): Promise<QualificationResult> {
    return this.request("POST", "/qualification", { token: this.token, clicks });
  }

  async getBatch(): Promise<BatchPayload> {
    return this.request("GET", `/batch?token=${this.token}`);
  }

  async submitBatch(batchId: string, clicks: BatchClick[]): Promise<BatchResult> {
    return this.request("POST", "/batch", { token: this.token, batch_id: batchId, clicks });
  }
}
