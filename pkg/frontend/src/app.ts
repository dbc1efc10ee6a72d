/**
 * Store wiring between the pure state module and the API client.
 *
 * Feature edits, legend toggles, tab switches and divider drags are pure
 * state transitions and never reach the network. The only action that
 * talks to the service is `run`, which issues exactly one simulate call
 * per press; a press while a request is pending replaces it.
 */

import { ApiValidationError, isAbortError, type TwinApi } from "./api";
import type { Decision, SchemaPayload, Strategy } from "./schemas";
import type { ModelGroup, TreatmentGroup } from "./series";
import {
  beginSubmit,
  buildRequest,
  completeSubmit,
  dragDivider,
  editFeature,
  failSubmit,
  initialState,
  selectSymptom,
  setDecision,
  setFixed,
  setSeed,
  setStrategy,
  setTab,
  toggleRegion,
  toggleSeries,
  type AuxTab,
  type FeatureValue,
  type UiState,
} from "./state";

export interface Actions {
  editFeature(name: string, value: FeatureValue): void;
  toggleRegion(index: number): void;
  setDecision(decision: Decision): void;
  setStrategy(strategy: Strategy): void;
  setFixed(stage: Decision, value: number | null): void;
  setSeed(seed: number | null): void;
  toggleSeries(model: ModelGroup, treatment: TreatmentGroup): void;
  setTab(tab: AuxTab): void;
  selectSymptom(index: number): void;
  dragDivider(divider: 0 | 1, delta: number): void;
  run(): Promise<void>;
}

export interface App {
  getState(): UiState;
  subscribe(listener: (state: UiState) => void): () => void;
  actions: Actions;
}

export function createApp(schema: SchemaPayload, api: TwinApi, debug = false): App {
  let state = initialState(schema, debug);
  const listeners = new Set<(s: UiState) => void>();

  function set(next: UiState): void {
    state = next;
    for (const listener of listeners) listener(state);
  }

  async function run(): Promise<void> {
    const request = buildRequest(state);
    set(beginSubmit(state));
    try {
      const response = await api.simulate(request);
      set(completeSubmit(state, request, response));
    } catch (err) {
      if (isAbortError(err)) return; // replaced by a newer press
      if (err instanceof ApiValidationError) {
        set(failSubmit(state, err.problems));
        return;
      }
      set(failSubmit(state, [String(err)]));
    }
  }

  return {
    getState: () => state,
    subscribe(listener) {
      listeners.add(listener);
      return () => listeners.delete(listener);
    },
    actions: {
      editFeature: (name, value) => set(editFeature(state, name, value)),
      toggleRegion: (index) => set(toggleRegion(state, index)),
      setDecision: (decision) => set(setDecision(state, decision)),
      setStrategy: (strategy) => set(setStrategy(state, strategy)),
      setFixed: (stage, value) => set(setFixed(state, stage, value)),
      setSeed: (seed) => set(setSeed(state, seed)),
      toggleSeries: (model, treatment) => set(toggleSeries(state, model, treatment)),
      setTab: (tab) => set(setTab(state, tab)),
      selectSymptom: (index) => set(selectSymptom(state, index)),
      dragDivider: (divider, delta) => set(dragDivider(state, divider, delta)),
      run,
    },
  };
}
