import { describe, expect, it } from "vitest";

import {
  buildRequest,
  defaultDraft,
  dragDivider,
  editFeature,
  failSubmit,
  initialState,
  pendingChanges,
  problemsByField,
  setDecision,
  setFixed,
  setSeed,
  toggleRegion,
  toggleSeries,
} from "../src/state";
import { responseFixture, schemaFixture, submittedState } from "./helpers";

describe("draft editing", () => {
  it("clones array defaults so drafts cannot reach into the schema", () => {
    const draft = defaultDraft(schemaFixture);
    const flags = draft["lymph_node_regions"] as number[];
    flags[0] = 1 - flags[0]!;
    const entry = schemaFixture.features.find((f) => f.name === "lymph_node_regions")!;
    expect((entry.default as number[])[0]).not.toBe(flags[0]);
  });

  it("toggleRegion flips exactly one flag", () => {
    const state = initialState(schemaFixture);
    const before = state.draft["lymph_node_regions"] as number[];
    const after = toggleRegion(state, 3).draft["lymph_node_regions"] as number[];
    expect(after[3]).toBe(before[3] === 1 ? 0 : 1);
    after.forEach((v, i) => {
      if (i !== 3) expect(v).toBe(before[i]);
    });
  });

  it("toggleRegion ignores out-of-range indexes", () => {
    const state = initialState(schemaFixture);
    expect(toggleRegion(state, 99)).toBe(state);
  });

  it("never mutates the submitted snapshot", () => {
    let state = submittedState(responseFixture);
    const snapshot = structuredClone(state.submitted!.features);
    const response = state.submitted!.response;

    state = editFeature(state, "age", 99);
    state = toggleRegion(state, 2);
    state = editFeature(state, "subsite", 4);

    expect(state.submitted!.features).toEqual(snapshot);
    expect(state.submitted!.response).toBe(response);
    expect(state.draft["age"]).toBe(99);
  });
});

describe("legend toggling", () => {
  it("is an involution", () => {
    const state = initialState(schemaFixture);
    const once = toggleSeries(state, "twin", "treated");
    expect(once.visibility.twin_treated).toBe(false);
    const twice = toggleSeries(once, "twin", "treated");
    expect(twice.visibility).toEqual(state.visibility);
  });

  it("touches only the named series", () => {
    const state = toggleSeries(initialState(schemaFixture), "neighbor", "untreated");
    expect(state.visibility).toEqual({
      twin_treated: true,
      twin_untreated: true,
      neighbor_treated: true,
      neighbor_untreated: false,
    });
  });
});

describe("panel dividers", () => {
  it("moves width between the two adjacent panels", () => {
    const state = dragDivider(initialState(schemaFixture), 0, 0.1);
    expect(state.panelWidths[0]).toBeCloseTo(0.38, 12);
    expect(state.panelWidths[1]).toBeCloseTo(0.34, 12);
    expect(state.panelWidths[2]).toBeCloseTo(0.28, 12);
  });

  it("clamps so no panel collapses below its minimum", () => {
    const left = dragDivider(initialState(schemaFixture), 0, -5);
    expect(left.panelWidths[0]).toBeCloseTo(0.12, 12);
    expect(left.panelWidths[0]! + left.panelWidths[1]!).toBeCloseTo(0.72, 12);

    const right = dragDivider(initialState(schemaFixture), 1, 5);
    expect(right.panelWidths[2]).toBeCloseTo(0.12, 12);
  });

  it("preserves total width", () => {
    let state = initialState(schemaFixture);
    for (const delta of [0.2, -0.4, 0.05, -1, 3]) {
      state = dragDivider(state, (Math.random() < 0.5 ? 0 : 1) as 0 | 1, delta);
      const total = state.panelWidths[0]! + state.panelWidths[1]! + state.panelWidths[2]!;
      expect(total).toBeCloseTo(1, 12);
    }
  });
});

describe("request building and pending changes", () => {
  it("emits the debug flag only when the state asks for it", () => {
    expect(buildRequest(initialState(schemaFixture)).debug).toBeUndefined();
    expect(buildRequest(initialState(schemaFixture, true)).debug).toBe(true);
  });

  it("carries controls through", () => {
    let state = initialState(schemaFixture);
    state = setDecision(state, "ic");
    state = setFixed(state, "cc", 1);
    state = setSeed(state, 7);
    const request = buildRequest(state);
    expect(request.decision).toBe("ic");
    expect(request.fixed).toEqual({ cc: 1 });
    expect(request.seed).toBe(7);
    expect(request.ci_level).toBe(0.95);
    expect(request.mc_samples).toBe(20);
  });

  it("detaches the request from the draft", () => {
    const state = initialState(schemaFixture);
    const request = buildRequest(state);
    (request.features["lymph_node_regions"] as number[])[0] = 99;
    expect((state.draft["lymph_node_regions"] as number[])[0]).not.toBe(99);
  });

  it("reports pending changes only when the draft diverges", () => {
    let state = submittedState(responseFixture);
    expect(pendingChanges(state)).toBe(false);

    const originalAge = state.draft["age"];
    state = editFeature(state, "age", 77);
    expect(pendingChanges(state)).toBe(true);

    state = editFeature(state, "age", originalAge!);
    expect(pendingChanges(state)).toBe(false);

    expect(pendingChanges(setDecision(state, "nd"))).toBe(true);
  });

  it("never reports pending changes before the first submit", () => {
    const state = editFeature(initialState(schemaFixture), "age", 70);
    expect(pendingChanges(state)).toBe(false);
  });
});

describe("problemsByField", () => {
  it("routes messages to the named feature, resolving short aliases", () => {
    const state = failSubmit(initialState(schemaFixture), [
      "features: age=-4.0 not positive",
      "features: ajcc=7 out of range 1-4",
      "features: smoking=9 out of range 0-2",
      "features: grade=0 out of range 1-4",
      "mc_samples=5 out of range 20-200",
    ]);
    const byField = problemsByField(state);
    expect(byField.get("age")).toEqual(["features: age=-4.0 not positive"]);
    expect(byField.get("ajcc_stage")).toEqual(["features: ajcc=7 out of range 1-4"]);
    expect(byField.get("smoking_status")).toEqual(["features: smoking=9 out of range 0-2"]);
    expect(byField.get("pathological_grade")).toEqual(["features: grade=0 out of range 1-4"]);
    expect(byField.get("__request__")).toEqual(["mc_samples=5 out of range 20-200"]);
  });

  it("keeps unknown field names on the request bucket", () => {
    const state = failSubmit(initialState(schemaFixture), ["features: mystery=1 bad"]);
    expect(problemsByField(state).get("__request__")).toEqual(["features: mystery=1 bad"]);
  });
});
