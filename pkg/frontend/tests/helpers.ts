/**
 * Shared test scaffolding: parsed fixtures recorded from a live service,
 * a recording Actions stub, and fetch doubles for the API client.
 */

import type { Actions } from "../src/app";
import {
  schemaPayload,
  simulateResponse,
  type SchemaPayload,
  type SimulateResponse,
} from "../src/schemas";
import {
  beginSubmit,
  buildRequest,
  completeSubmit,
  initialState,
  type UiState,
} from "../src/state";
import errorJson from "./fixtures/error422.json";
import schemaJson from "./fixtures/schema.json";
import simulateAltJson from "./fixtures/simulate_alt.json";
import simulateJson from "./fixtures/simulate.json";

export const schemaFixture: SchemaPayload = schemaPayload.parse(schemaJson);
export const responseFixture: SimulateResponse = simulateResponse.parse(simulateJson);
export const altResponseFixture: SimulateResponse = simulateResponse.parse(simulateAltJson);
export const errorFixture = errorJson as { detail: { problems: string[] } };

export function rawSimulateJson(): unknown {
  return structuredClone(simulateJson);
}

/** State as it looks right after a successful run of `response`. */
export function submittedState(response: SimulateResponse, debug = false): UiState {
  const state = initialState(schemaFixture, debug);
  const request = buildRequest(state);
  return completeSubmit(beginSubmit(state), request, response);
}

export interface Recorded {
  actions: Actions;
  log: string[];
}

/** Actions stub that records every call; nothing touches the network. */
export function recordingActions(): Recorded {
  const log: string[] = [];
  const actions: Actions = {
    editFeature: (name, value) => log.push(`edit:${name}:${JSON.stringify(value)}`),
    toggleRegion: (index) => log.push(`region:${index}`),
    setDecision: (decision) => log.push(`decision:${decision}`),
    setStrategy: (strategy) => log.push(`strategy:${strategy}`),
    setFixed: (stage, value) => log.push(`fixed:${stage}:${value}`),
    setSeed: (seed) => log.push(`seed:${seed}`),
    toggleSeries: (model, treatment) => log.push(`series:${model}:${treatment}`),
    setTab: (tab) => log.push(`tab:${tab}`),
    selectSymptom: (index) => log.push(`symptom:${index}`),
    dragDivider: (divider, delta) => log.push(`divider:${divider}:${delta}`),
    run: async () => {
      log.push("run");
    },
  };
  return { actions, log };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface FetchCall {
  url: string;
  init: RequestInit;
}

export interface FetchDouble {
  fetchFn: typeof fetch;
  calls: FetchCall[];
  /** Resolve the i-th pending request; aborted ones already rejected. */
  resolve(index: number, response: Response): void;
}

/**
 * A fetch stub whose requests stay pending until resolved by the test
 * and reject with an AbortError when their signal fires, matching the
 * real fetch contract closely enough for cancel-and-replace tests.
 */
export function deferredFetch(): FetchDouble {
  const calls: FetchCall[] = [];
  const settlers: ((response: Response) => void)[] = [];
  const fetchFn = ((input: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(input), init: init ?? {} });
    return new Promise<Response>((resolvePromise, rejectPromise) => {
      const signal = init?.signal ?? null;
      if (signal !== null) {
        signal.addEventListener("abort", () => {
          rejectPromise(new DOMException("the request was aborted", "AbortError"));
        });
      }
      settlers.push(resolvePromise);
    });
  }) as typeof fetch;
  return {
    fetchFn,
    calls,
    resolve: (index, response) => settlers[index]!(response),
  };
}

/** A fetch stub that answers every request immediately with `make()`. */
export function immediateFetch(make: (call: FetchCall) => Response): FetchDouble {
  const calls: FetchCall[] = [];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const call = { url: String(input), init: init ?? {} };
    calls.push(call);
    return make(call);
  }) as typeof fetch;
  return { fetchFn, calls, resolve: () => undefined };
}
