/**
 * HTTP client for the twin service.
 *
 * At most one simulate request is ever in flight: a new run press aborts
 * the previous request and replaces it. Payloads are checked against the
 * published schemas in both directions.
 */

import {
  errorBody,
  schemaPayload,
  simulateRequest,
  simulateResponse,
  type SchemaPayload,
  type SimulateRequest,
  type SimulateResponse,
} from "./schemas";

export class ApiValidationError extends Error {
  problems: string[];

  constructor(problems: string[]) {
    super(problems.join("; "));
    this.name = "ApiValidationError";
    this.problems = problems;
  }
}

export function isAbortError(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}

export class TwinApi {
  private base: string;
  private fetchFn: typeof fetch;
  private inFlight: AbortController | null = null;

  constructor(base = "", fetchFn: typeof fetch = fetch) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async schema(): Promise<SchemaPayload> {
    const res = await this.fetchFn(`${this.base}/api/schema`);
    if (!res.ok) throw new Error(`schema request failed: ${res.status}`);
    return schemaPayload.parse(await res.json());
  }

  /** Cancel-and-replace: aborts any request still in flight. */
  async simulate(request: SimulateRequest): Promise<SimulateResponse> {
    simulateRequest.parse(request);
    if (this.inFlight !== null) this.inFlight.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    try {
      const res = await this.fetchFn(`${this.base}/api/simulate`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
      if (res.status === 422) {
        const body = errorBody.parse(await res.json());
        throw new ApiValidationError(body.detail.problems);
      }
      if (res.status === 503) {
        throw new ApiValidationError(["service has no model bundle loaded"]);
      }
      if (!res.ok) throw new Error(`simulate request failed: ${res.status}`);
      return simulateResponse.parse(await res.json());
    } finally {
      if (this.inFlight === controller) this.inFlight = null;
    }
  }
}
