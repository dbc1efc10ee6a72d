import { describe, expect, it } from "vitest";

import { byClass, findAll, findById, textOf, type VNode } from "../src/dom";
import type { SimulateResponse } from "../src/schemas";
import {
  editFeature,
  failSubmit,
  initialState,
  setTab,
  toggleSeries,
  type UiState,
} from "../src/state";
import { renderApp } from "../src/views";
import {
  altResponseFixture,
  recordingActions,
  responseFixture,
  schemaFixture,
  submittedState,
} from "./helpers";

function render(state: UiState) {
  const { actions, log } = recordingActions();
  return { tree: renderApp(state, actions), log };
}

function withNovelty(response: SimulateResponse, percentile: number, trusted: boolean): SimulateResponse {
  return {
    ...response,
    policy: {
      ...response.policy,
      novelty: { ...response.policy.novelty, percentile, trusted },
    },
  };
}

function seriesNodes(tree: VNode): string[] {
  return byClass(tree, "series").map((n) => n.attrs["class"] ?? "");
}

describe("before the first submit", () => {
  it("renders no projection views, only the legend and a placeholder", () => {
    const { tree } = render(initialState(schemaFixture));
    expect(findById(tree, "plot-os")).toBeNull();
    expect(findById(tree, "plot-lrc")).toBeNull();
    expect(findById(tree, "plot-fdm")).toBeNull();
    expect(findById(tree, "recommendation")).toBeNull();
    expect(findById(tree, "placeholder")).not.toBeNull();
    expect(byClass(tree, "legend-entry")).toHaveLength(4);
    expect(findById(tree, "pending-indicator")).toBeNull();
  });
});

describe("survival plots", () => {
  it("draws every visible series on every endpoint", () => {
    const { tree } = render(submittedState(responseFixture));
    for (const endpoint of ["os", "lrc", "fdm"]) {
      const plot = findById(tree, `plot-${endpoint}`)!;
      expect(plot).not.toBeNull();
      const classes = seriesNodes(plot);
      expect(classes).toHaveLength(4);
      for (const key of ["twin_treated", "twin_untreated", "neighbor_treated", "neighbor_untreated"]) {
        expect(classes.some((c) => c.includes(`series-${key}`))).toBe(true);
      }
      // twin curves carry CI envelopes, neighbor curves do not
      expect(byClass(plot, "ci-band")).toHaveLength(2);
      expect(byClass(plot, "horizon-marker")).toHaveLength(2);
    }
  });

  it("the visibility map drives exactly the drawn series set", () => {
    let state = submittedState(responseFixture);
    state = toggleSeries(state, "twin", "untreated");
    state = toggleSeries(state, "neighbor", "treated");
    const { tree } = render(state);
    const plot = findById(tree, "plot-os")!;
    const classes = seriesNodes(plot);
    expect(classes.some((c) => c.includes("series-twin_treated"))).toBe(true);
    expect(classes.some((c) => c.includes("series-neighbor_untreated"))).toBe(true);
    expect(classes.some((c) => c.includes("series-twin_untreated"))).toBe(false);
    expect(classes.some((c) => c.includes("series-neighbor_treated"))).toBe(false);
    expect(byClass(plot, "ci-band")).toHaveLength(1);
  });

  it("with everything toggled off the plots are empty but the legend stays", () => {
    let state = submittedState(responseFixture);
    state = toggleSeries(state, "twin", "treated");
    state = toggleSeries(state, "twin", "untreated");
    state = toggleSeries(state, "neighbor", "treated");
    state = toggleSeries(state, "neighbor", "untreated");
    const { tree } = render(state);
    expect(byClass(tree, "series")).toHaveLength(0);
    expect(byClass(tree, "ci-band")).toHaveLength(0);
    const legend = findById(tree, "legend")!;
    expect(byClass(legend, "legend-entry")).toHaveLength(4);
    expect(byClass(legend, "off")).toHaveLength(4);
    expect(findById(tree, "plot-os")).not.toBeNull();
  });

  it("legend entries toggle their own series", () => {
    const { tree, log } = render(submittedState(responseFixture));
    const entries = byClass(tree, "legend-entry");
    entries[1]!.on["click"]!(new Event("click"));
    entries[2]!.on["click"]!(new Event("click"));
    expect(log).toEqual(["series:twin:untreated", "series:neighbor:treated"]);
  });
});

describe("recommendation header", () => {
  it("shows the policy probability as a percentage", () => {
    const { tree } = render(submittedState(responseFixture));
    expect(textOf(findById(tree, "rec-probability")!)).toBe("49.2%");
    expect(textOf(findById(tree, "recommendation")!)).toContain("concurrent chemotherapy");
  });

  it("novelty percentile 80 renders a thumbs-down", () => {
    const state = submittedState(withNovelty(responseFixture, 80, false));
    const { tree } = render(state);
    expect(findById(tree, "thumbs-icon")!.attrs["class"]).toBe("thumbs-down");
  });

  it("a trusted query renders a thumbs-up", () => {
    const { tree } = render(submittedState(responseFixture));
    expect(findById(tree, "thumbs-icon")!.attrs["class"]).toBe("thumbs-up");
  });

  it("the far-from-cohort fixture arrives untrusted and shows thumbs-down", () => {
    expect(altResponseFixture.policy.novelty.percentile).toBeGreaterThanOrEqual(75);
    const { tree } = render(submittedState(altResponseFixture));
    expect(findById(tree, "thumbs-icon")!.attrs["class"]).toBe("thumbs-down");
  });
});

describe("stale-response contract", () => {
  it("draft edits leave the plots alone and raise the pending indicator", () => {
    let state = submittedState(responseFixture);
    const before = render(state).tree;
    const beforePoints = byClass(findById(before, "plot-os")!, "series")[0]!.attrs["points"];

    state = editFeature(state, "age", 31);
    const after = render(state).tree;
    const afterPoints = byClass(findById(after, "plot-os")!, "series")[0]!.attrs["points"];

    expect(afterPoints).toBe(beforePoints);
    expect(findById(after, "pending-indicator")).not.toBeNull();
    expect(findById(before, "pending-indicator")).toBeNull();
  });
});

describe("input panel", () => {
  it("draws all fourteen lymph node regions and six subsites, clickable", () => {
    const { tree, log } = render(initialState(schemaFixture));
    const regions = byClass(tree, "ln-region");
    expect(regions).toHaveLength(14);
    for (const region of regions) expect(region.on["click"]).toBeTypeOf("function");

    findById(tree, "ln-L-II")!.on["click"]!(new Event("click"));
    findById(tree, "ln-IA")!.on["click"]!(new Event("click"));
    findById(tree, "ln-R-RPN")!.on["click"]!(new Event("click"));
    expect(log).toEqual(["region:3", "region:0", "region:13"]);

    const subsites = byClass(tree, "subsite-region");
    expect(subsites).toHaveLength(6);
    findById(tree, "sub-tonsil")!.on["click"]!(new Event("click"));
    expect(log[log.length - 1]).toBe("edit:subsite:1");
  });

  it("stylized radios cover every categorical level and mark the selection", () => {
    const { tree, log } = render(initialState(schemaFixture));
    const tStage = findById(tree, "feat-t_stage")!;
    const chips = byClass(tStage, "choice");
    expect(chips).toHaveLength(4);
    expect(byClass(tStage, "selected")).toHaveLength(1);
    chips[3]!.on["click"]!(new Event("click"));
    expect(log).toEqual(["edit:t_stage:4"]);
  });

  it("marks active lymph node regions on the schematic", () => {
    let state = initialState(schemaFixture);
    state = editFeature(state, "lymph_node_regions", [1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    const { tree } = render(state);
    const active = byClass(tree, "ln-region").filter((n) =>
      (n.attrs["class"] ?? "").includes("active"),
    );
    expect(active.map((n) => n.attrs["id"])).toEqual(["ln-IA", "ln-L-II"]);
  });

  it("surfaces validation problems at the offending field", () => {
    const state = failSubmit(initialState(schemaFixture), [
      "features: age=-4.0 not positive",
      "features: ajcc=7 out of range 1-4",
      "ci_level out of range",
    ]);
    const { tree } = render(state);
    const ageRow = findAll(tree, (n) => n.attrs["data-feature"] === "age")[0]!;
    expect(byClass(ageRow, "field-error")).toHaveLength(1);
    expect(textOf(ageRow)).toContain("age=-4.0 not positive");

    const ajccRow = findAll(tree, (n) => n.attrs["data-feature"] === "ajcc_stage")[0]!;
    expect(byClass(ajccRow, "field-error")).toHaveLength(1);

    expect(byClass(tree, "request-error")).toHaveLength(1);
  });

  it("wires the run button to the run action", () => {
    const { tree, log } = render(initialState(schemaFixture));
    findById(tree, "run-button")!.on["click"]!(new Event("click"));
    expect(log).toEqual(["run"]);
  });
});

describe("panel layout", () => {
  it("renders two draggable dividers between three sized panels", () => {
    const { tree } = render(initialState(schemaFixture));
    const dividers = byClass(tree, "divider");
    expect(dividers).toHaveLength(2);
    expect(dividers.map((d) => d.attrs["data-divider"])).toEqual(["0", "1"]);
    for (const divider of dividers) {
      expect(divider.on["mousedown"]).toBeTypeOf("function");
    }
    const panels = byClass(tree, "panel");
    expect(panels).toHaveLength(3);
    expect(panels[0]!.attrs["style"]).toContain("width:28.00%");
  });
});

describe("waterfall tab", () => {
  it("draws one bar per row including the closing residual row", () => {
    const { tree } = render(submittedState(altResponseFixture));
    const chart = findById(tree, "waterfall")!;
    const bars = byClass(chart, "wf-bar");
    const serverRows = altResponseFixture.policy.attribution.waterfall.length;
    expect(bars).toHaveLength(serverRows + 2);
    expect(bars[0]!.attrs["class"]).toContain("wf-baseline");
    expect(bars[bars.length - 1]!.attrs["data-name"]).toBe("unattributed");
    expect(textOf(chart)).toContain("final treatment probability 26.8%");
  });
});

describe("risk table tab", () => {
  it("encodes each risk as cell opacity, with 0% fully transparent", () => {
    const state = setTab(submittedState(responseFixture), "outcomes");
    const { tree } = render(state);
    const table = findById(tree, "risk-table")!;
    const cells = byClass(table, "risk-cell");
    expect(cells).toHaveLength(8);

    // feeding tube, neighbors untreated is exactly 0 in this fixture
    const zero = cells.find((c) => textOf(c) === "0.0%")!;
    expect(zero.attrs["data-alpha"]).toBe("0.000");
    expect(zero.attrs["style"]).toContain(",0.000)");

    const treated = cells[0]!;
    const risk = responseFixture.risk_table.feeding_tube.twin_treated;
    expect(treated.attrs["data-alpha"]).toBe(risk.toFixed(3));
    expect(treated.attrs["style"]).toContain(`rgba(94,43,143,${risk.toFixed(3)})`);
  });
});

describe("similar patients tab", () => {
  it("shows kiviat triplets with the current patient overlaid in blue", () => {
    const state = setTab(submittedState(responseFixture), "neighbors");
    const { tree } = render(state);
    const view = findById(tree, "neighbors-view")!;

    const averages = byClass(view, "group-average");
    expect(averages).toHaveLength(2);
    for (const row of averages) {
      expect(byClass(row, "kiviat-staging")).toHaveLength(1);
      expect(byClass(row, "kiviat-clinical")).toHaveLength(1);
      expect(byClass(row, "kiviat-outcomes")).toHaveLength(1);
      expect(byClass(row, "heat-lymph")).toHaveLength(1);
      expect(byClass(row, "heat-subsite")).toHaveLength(1);
      expect(byClass(row, "heat-dlt")).toHaveLength(1);
      const overlays = byClass(row, "current-overlay");
      expect(overlays).toHaveLength(2); // staging and clinical, not outcomes
      for (const overlay of overlays) {
        expect(overlay.attrs["style"]).toContain("#2b6cb0");
      }
    }

    const members = byClass(view, "member-row");
    const served =
      responseFixture.neighbors.profiles.treated!.members.length +
      responseFixture.neighbors.profiles.untreated!.members.length;
    expect(members).toHaveLength(served);
  });

  it("heatmaps shade every region of each diagram", () => {
    const state = setTab(submittedState(responseFixture), "neighbors");
    const { tree } = render(state);
    const lymphHeat = byClass(tree, "heat-lymph")[0]!;
    expect(byClass(lymphHeat, "heat-region")).toHaveLength(14);
    const subsiteHeat = byClass(tree, "heat-subsite")[0]!;
    expect(byClass(subsiteHeat, "heat-region")).toHaveLength(6);
    const dltHeat = byClass(tree, "heat-dlt")[0]!;
    expect(byClass(dltHeat, "heat-region")).toHaveLength(5);
  });
});

describe("symptoms tab", () => {
  it("draws faint member trajectories and bold medians per group", () => {
    const state = setTab(submittedState(responseFixture), "symptoms");
    const { tree } = render(state);
    expect(findById(tree, "symptom-plot")).not.toBeNull();
    expect(byClass(tree, "median-line")).toHaveLength(2);
    expect(byClass(tree, "trajectory-treated").length).toBeGreaterThan(0);
    expect(byClass(tree, "trajectory-untreated").length).toBeGreaterThan(0);
    expect(byClass(tree, "symptom-chips")[0]!.children).toHaveLength(10);
  });

  it("respects the legend toggles for the observed groups", () => {
    let state = setTab(submittedState(responseFixture), "symptoms");
    state = toggleSeries(state, "neighbor", "untreated");
    const { tree } = render(state);
    expect(byClass(tree, "median-untreated")).toHaveLength(0);
    expect(byClass(tree, "trajectory-untreated")).toHaveLength(0);
    expect(byClass(tree, "median-treated")).toHaveLength(1);
  });

  it("switches the plotted symptom through the selector", () => {
    const state = setTab(submittedState(responseFixture), "symptoms");
    const { tree, log } = render(state);
    findById(tree, "symptom-chip-4")!.on["click"]!(new Event("click"));
    expect(log).toEqual(["symptom:4"]);
    // the plot titles itself from the response's own symptom list
    expect(textOf(findById(tree, "symptom-plot")!)).toContain(
      responseFixture.symptoms.symptoms[0]!,
    );
  });
});

describe("debug embedding scatter", () => {
  it("stays hidden unless the debug flag is on", () => {
    const { tree } = render(submittedState(altResponseFixture, false));
    expect(findById(tree, "debug-scatter")).toBeNull();
  });

  it("appears behind the flag with one point per cohort member", () => {
    const { tree } = render(submittedState(altResponseFixture, true));
    const scatter = findById(tree, "debug-scatter")!;
    expect(scatter).not.toBeNull();
    expect(byClass(scatter, "embed-point")).toHaveLength(altResponseFixture.debug!.cohort.length);
    expect(findById(scatter, "query-point")).not.toBeNull();
  });

  it("never renders when the response carries no embedding data", () => {
    const { tree } = render(submittedState(responseFixture, true));
    expect(findById(tree, "debug-scatter")).toBeNull();
  });
});
