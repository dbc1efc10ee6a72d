/**
 * Interface state and its pure transitions.
 *
 * Two rules hold everywhere: draft edits never touch the displayed
 * response (views read the submit-time snapshot), and nothing in this
 * module performs network activity. Requests happen only in the app
 * wiring when the run button fires.
 */

import type {
  Decision,
  SchemaPayload,
  SimulateRequest,
  SimulateResponse,
  Strategy,
} from "./schemas";
import { allVisible, seriesKey, type ModelGroup, type TreatmentGroup, type Visibility } from "./series";

export type FeatureValue = number | number[];
export type PatientDraft = Record<string, FeatureValue>;

export type AuxTab = "attributions" | "neighbors" | "outcomes" | "symptoms";
export const AUX_TABS: AuxTab[] = ["attributions", "neighbors", "outcomes", "symptoms"];

export interface Submitted {
  features: PatientDraft;
  request: SimulateRequest;
  response: SimulateResponse;
}

export interface UiState {
  schema: SchemaPayload;
  draft: PatientDraft;
  decision: Decision;
  strategy: Strategy;
  fixed: Partial<Record<Decision, number>>;
  seed: number | null;
  submitted: Submitted | null;
  visibility: Visibility;
  activeTab: AuxTab;
  selectedSymptom: number;
  panelWidths: [number, number, number];
  inFlight: boolean;
  problems: string[];
  debug: boolean;
}

export function defaultDraft(schema: SchemaPayload): PatientDraft {
  const draft: PatientDraft = {};
  for (const entry of schema.features) {
    draft[entry.name] = Array.isArray(entry.default)
      ? [...entry.default]
      : entry.default;
  }
  return draft;
}

export function initialState(schema: SchemaPayload, debug = false): UiState {
  return {
    schema,
    draft: defaultDraft(schema),
    decision: "cc",
    strategy: "imitation",
    fixed: {},
    seed: null,
    submitted: null,
    visibility: allVisible(),
    activeTab: "attributions",
    selectedSymptom: 0,
    panelWidths: [0.28, 0.44, 0.28],
    inFlight: false,
    problems: [],
    debug,
  };
}

// ---------------------------------------------------------------------------
// Draft edits (no network, no response mutation)

export function editFeature(state: UiState, name: string, value: FeatureValue): UiState {
  return { ...state, draft: { ...state.draft, [name]: value } };
}

/** Flip one lymph node region flag on the draft. */
export function toggleRegion(state: UiState, index: number): UiState {
  const flags = state.draft["lymph_node_regions"];
  if (!Array.isArray(flags) || index < 0 || index >= flags.length) return state;
  const next = [...flags];
  next[index] = next[index] ? 0 : 1;
  return editFeature(state, "lymph_node_regions", next);
}

export function setDecision(state: UiState, decision: Decision): UiState {
  return { ...state, decision };
}

export function setStrategy(state: UiState, strategy: Strategy): UiState {
  return { ...state, strategy };
}

/** value null clears the pin and hands the stage back to the policy. */
export function setFixed(state: UiState, stage: Decision, value: number | null): UiState {
  const fixed = { ...state.fixed };
  if (value === null) delete fixed[stage];
  else fixed[stage] = value;
  return { ...state, fixed };
}

export function setSeed(state: UiState, seed: number | null): UiState {
  return { ...state, seed };
}

// ---------------------------------------------------------------------------
// Legend, tabs, layout

export function toggleSeries(state: UiState, model: ModelGroup, treatment: TreatmentGroup): UiState {
  const key = seriesKey(model, treatment);
  return {
    ...state,
    visibility: { ...state.visibility, [key]: !state.visibility[key] },
  };
}

export function setTab(state: UiState, tab: AuxTab): UiState {
  return { ...state, activeTab: tab };
}

export function selectSymptom(state: UiState, index: number): UiState {
  return { ...state, selectedSymptom: index };
}

const MIN_PANEL = 0.12;

/** Move the divider between panel i and i+1 by a workspace fraction. */
export function dragDivider(state: UiState, divider: 0 | 1, delta: number): UiState {
  const widths: [number, number, number] = [...state.panelWidths];
  const left = divider;
  const right = divider + 1;
  const moved = Math.max(
    -(widths[left]! - MIN_PANEL),
    Math.min(widths[right]! - MIN_PANEL, delta),
  );
  widths[left] = widths[left]! + moved;
  widths[right] = widths[right]! - moved;
  return { ...state, panelWidths: widths };
}

// ---------------------------------------------------------------------------
// Submit lifecycle

export function buildRequest(state: UiState): SimulateRequest {
  return {
    features: structuredClone(state.draft),
    decision: state.decision,
    strategy: state.strategy,
    fixed: { ...state.fixed },
    ci_level: 0.95,
    mc_samples: 20,
    seed: state.seed,
    ...(state.debug ? { debug: true } : {}),
  };
}

export function beginSubmit(state: UiState): UiState {
  return { ...state, inFlight: true };
}

export function completeSubmit(
  state: UiState,
  request: SimulateRequest,
  response: SimulateResponse,
): UiState {
  return {
    ...state,
    inFlight: false,
    problems: [],
    submitted: {
      features: structuredClone(request.features) as PatientDraft,
      request,
      response,
    },
  };
}

export function failSubmit(state: UiState, problems: string[]): UiState {
  return { ...state, inFlight: false, problems };
}

/** True when the draft or controls differ from what produced the response. */
export function pendingChanges(state: UiState): boolean {
  if (state.submitted === null) return false;
  return JSON.stringify(buildRequest(state)) !== JSON.stringify(state.submitted.request);
}

// ---------------------------------------------------------------------------
// Server validation problems, keyed to the offending field

const FEATURE_PROBLEM = /^features: ([a-z_]+)/;

// the validator reports some ranges under short names
const PROBLEM_ALIASES: Record<string, string> = {
  smoking: "smoking_status",
  ajcc: "ajcc_stage",
  grade: "pathological_grade",
};

export function problemsByField(state: UiState): Map<string, string[]> {
  const names = new Set(state.schema.features.map((f) => f.name));
  const out = new Map<string, string[]>();
  for (const problem of state.problems) {
    const match = FEATURE_PROBLEM.exec(problem);
    let field = "__request__";
    if (match) {
      const raw = match[1]!;
      const aliased = PROBLEM_ALIASES[raw] ?? raw;
      if (names.has(aliased)) field = aliased;
    }
    const bucket = out.get(field) ?? [];
    bucket.push(problem);
    out.set(field, bucket);
  }
  return out;
}
