/**
 * Pure rendering: UI state in, DOM description out.
 *
 * Nothing here mutates state or touches the network. Every control calls
 * back through the actions interface, and the projection views read only
 * the submit-time snapshot, so edits to the draft never change a plot
 * until the run button fires again.
 */

import type { Actions } from "./app";
import { byClass, findAll, h, type Child, type VNode } from "./dom";
import { bandPoints, clamp01, kiviatAxisEnd, kiviatPoints, linearScale, polylinePoints } from "./geometry";
import type {
  Arm,
  Decision,
  Endpoint,
  FeatureEntry,
  GroupProfile,
  SimulateResponse,
} from "./schemas";
import { DECISIONS, ENDPOINTS, OUTCOME_NAMES, STRATEGIES } from "./schemas";
import {
  attributionFill,
  lymphGroupName,
  rateFill,
  DLT_REGIONS,
  DLT_VIEWBOX,
  LN_REGIONS,
  LN_VIEWBOX,
  SUBSITE_REGIONS,
  SUBSITE_VIEWBOX,
  type Region,
} from "./schematic";
import { SERIES_KEYS, SERIES_STYLES, visibleSeries, type SeriesKey } from "./series";
import { AUX_TABS, pendingChanges, problemsByField, type AuxTab, type UiState } from "./state";
import { transformWaterfall } from "./waterfall";

export { byClass, findAll, textOf } from "./dom";

// ---------------------------------------------------------------------------
// Small helpers

function pct(value: number): string {
  return `${(100 * value).toFixed(1)}%`;
}

function signed(value: number): string {
  const s = (100 * value).toFixed(1);
  return value >= 0 ? `+${s}` : s;
}

function withAlpha(hex: string, alpha: number): string {
  const r = parseInt(hex.slice(1, 3), 16);
  const g = parseInt(hex.slice(3, 5), 16);
  const b = parseInt(hex.slice(5, 7), 16);
  return `rgba(${r},${g},${b},${alpha.toFixed(3)})`;
}

const OVERLAY_COLOR = "#2b6cb0"; // current patient, always blue

const ENDPOINT_TITLES: Record<Endpoint, string> = {
  os: "overall survival",
  lrc: "locoregional control",
  fdm: "freedom from distant metastasis",
};

const OUTCOME_TITLES = { feeding_tube: "feeding tube", aspiration: "aspiration" } as const;

// ---------------------------------------------------------------------------
// Top-level layout

export function renderApp(state: UiState, actions: Actions): VNode {
  const [w0, w1, w2] = state.panelWidths;
  return h(
    "div",
    { class: "app", id: "app-root" },
    renderHeader(state),
    h(
      "div",
      { class: "workspace" },
      h("div", { class: "panel panel-inputs", style: `width:${(w0 * 100).toFixed(2)}%` }, renderInputPanel(state, actions)),
      dividerNode(0, actions),
      h("div", { class: "panel panel-projections", style: `width:${(w1 * 100).toFixed(2)}%` }, renderCenterPanel(state, actions)),
      dividerNode(1, actions),
      h("div", { class: "panel panel-aux", style: `width:${(w2 * 100).toFixed(2)}%` }, renderAuxPanel(state, actions)),
    ),
  );
}

function renderHeader(state: UiState): VNode {
  const children: Child[] = [h("span", { class: "app-title" }, "treatment twin")];
  if (state.inFlight) {
    children.push(h("span", { class: "busy" }, "running..."));
  }
  if (state.submitted !== null && pendingChanges(state)) {
    children.push(
      h("span", { id: "pending-indicator", class: "pending" }, "unsubmitted changes"),
    );
  }
  return h("header", { class: "topbar" }, children);
}

function dividerNode(index: 0 | 1, actions: Actions): VNode {
  return h("div", {
    class: "divider",
    "data-divider": String(index),
    onmousedown: (ev) => startDividerDrag(ev as MouseEvent, index, actions),
  });
}

function startDividerDrag(ev: MouseEvent, index: 0 | 1, actions: Actions): void {
  ev.preventDefault();
  const target = ev.target as Element | null;
  const doc = target?.ownerDocument;
  if (!doc) return;
  const workspace = target?.closest(".workspace");
  const width = workspace instanceof HTMLElement && workspace.offsetWidth > 0
    ? workspace.offsetWidth
    : doc.documentElement.clientWidth || 1;
  let lastX = ev.clientX;
  const move = (e: Event) => {
    const me = e as MouseEvent;
    actions.dragDivider(index, (me.clientX - lastX) / width);
    lastX = me.clientX;
  };
  const up = () => {
    doc.removeEventListener("mousemove", move);
    doc.removeEventListener("mouseup", up);
  };
  doc.addEventListener("mousemove", move);
  doc.addEventListener("mouseup", up);
}

// ---------------------------------------------------------------------------
// Input panel

function renderInputPanel(state: UiState, actions: Actions): VNode {
  const problems = problemsByField(state);
  const requestProblems = problems.get("__request__") ?? [];
  const rows: Child[] = [];
  if (requestProblems.length > 0) {
    rows.push(
      h("div", { class: "request-error" }, requestProblems.map((p) => h("div", {}, p))),
    );
  }
  for (const entry of state.schema.features) {
    rows.push(featureRow(state, actions, entry, problems.get(entry.name) ?? []));
  }
  rows.push(renderRunControls(state, actions));
  return h("div", { class: "inputs" }, rows);
}

function featureRow(state: UiState, actions: Actions, entry: FeatureEntry, problems: string[]): VNode {
  const errors = problems.map((p) => h("div", { class: "field-error" }, p));
  let control: Child;
  if (entry.name === "lymph_node_regions") {
    control = lymphNodeMap(state, actions);
  } else if (entry.name === "subsite") {
    control = subsiteMap(state, actions);
  } else if (entry.kind === "continuous") {
    control = continuousInput(state, actions, entry);
  } else {
    control = choiceChips(state, actions, entry);
  }
  return h(
    "div",
    { class: "feature-row", "data-feature": entry.name },
    h("label", { class: "feature-label", for: `feat-${entry.name}` }, entry.name.replace(/_/g, " ")),
    control,
    errors,
  );
}

function continuousInput(state: UiState, actions: Actions, entry: FeatureEntry): VNode {
  const value = state.draft[entry.name];
  return h("input", {
    id: `feat-${entry.name}`,
    class: "free-text",
    type: "text",
    value: typeof value === "number" ? String(value) : "",
    oninput: (ev) => {
      const raw = (ev.target as HTMLInputElement).value;
      const parsed = Number(raw);
      if (raw.trim() !== "" && Number.isFinite(parsed)) {
        actions.editFeature(entry.name, parsed);
      }
    },
  });
}

/** Stylized radio group: one chip per level, exactly one selected. */
function choiceChips(state: UiState, actions: Actions, entry: FeatureEntry): VNode {
  const current = state.draft[entry.name];
  const lo = entry.kind === "binary" ? 0 : entry.min ?? 0;
  const hi = entry.kind === "binary" ? 1 : entry.max ?? lo;
  const values: number[] = [];
  for (let v = lo; v <= hi; v++) values.push(v);
  const chips = values.map((v) => {
    const label = entry.labels?.[v] ?? String(v);
    const selected = current === v;
    return h(
      "button",
      {
        id: `feat-${entry.name}-${v}`,
        class: `choice${selected ? " selected" : ""}`,
        type: "button",
        "aria-pressed": selected ? "true" : "false",
        onclick: () => actions.editFeature(entry.name, v),
      },
      label,
    );
  });
  return h("div", { class: "chips", id: `feat-${entry.name}` }, chips);
}

function lymphNodeMap(state: UiState, actions: Actions): VNode {
  const flags = state.draft["lymph_node_regions"];
  const active = Array.isArray(flags) ? flags : [];
  const contributions = state.submitted?.response.policy.attribution.contributions;
  const shapes: Child[] = LN_REGIONS.map((region) => {
    const on = (active[region.index] ?? 0) === 1;
    const fill = contributions !== undefined
      ? attributionFill(contributions[lymphGroupName(region.index)])
      : "rgba(0,0,0,0)";
    return h(
      "g",
      { class: "region-group" },
      h("polygon", {
        id: region.id,
        class: `ln-region${on ? " active" : ""}`,
        points: region.points,
        style: `fill:${on && contributions === undefined ? "rgba(94,43,143,0.35)" : fill}`,
        onclick: () => actions.toggleRegion(region.index),
      }),
      regionLabel(region),
    );
  });
  return h("svg", { class: "schematic ln-map", viewBox: LN_VIEWBOX, width: "220", height: "260" }, shapes);
}

function subsiteMap(state: UiState, actions: Actions): VNode {
  const current = state.draft["subsite"];
  const shapes: Child[] = SUBSITE_REGIONS.map((region) => {
    const selected = current === region.index;
    return h(
      "g",
      { class: "region-group" },
      h("polygon", {
        id: region.id,
        class: `subsite-region${selected ? " selected" : ""}`,
        points: region.points,
        onclick: () => actions.editFeature("subsite", region.index),
      }),
      regionLabel(region),
    );
  });
  return h("svg", { class: "schematic subsite-map", viewBox: SUBSITE_VIEWBOX, width: "200", height: "170" }, shapes);
}

function regionLabel(region: Region): VNode {
  const pts = region.points.split(" ").map((pair) => pair.split(",").map(Number));
  const cx = pts.reduce((s, p) => s + p[0]!, 0) / pts.length;
  const cy = pts.reduce((s, p) => s + p[1]!, 0) / pts.length;
  return h(
    "text",
    { class: "region-label", x: String(Math.round(cx)), y: String(Math.round(cy + 3)), "text-anchor": "middle" },
    region.label,
  );
}

function renderRunControls(state: UiState, actions: Actions): VNode {
  const decisionChips = DECISIONS.map((d) =>
    h(
      "button",
      {
        id: `decision-${d}`,
        class: `choice${state.decision === d ? " selected" : ""}`,
        type: "button",
        onclick: () => actions.setDecision(d),
      },
      state.schema.decision_labels[d] ?? d,
    ),
  );
  const strategyChips = STRATEGIES.map((s) =>
    h(
      "button",
      {
        id: `strategy-${s}`,
        class: `choice${state.strategy === s ? " selected" : ""}`,
        type: "button",
        onclick: () => actions.setStrategy(s),
      },
      s,
    ),
  );
  return h(
    "div",
    { class: "run-controls" },
    h("div", { class: "feature-row" }, h("label", { class: "feature-label" }, "decision"), h("div", { class: "chips" }, decisionChips)),
    h("div", { class: "feature-row" }, h("label", { class: "feature-label" }, "strategy"), h("div", { class: "chips" }, strategyChips)),
    h(
      "button",
      { id: "run-button", class: "run", type: "button", onclick: () => void actions.run() },
      state.inFlight ? "running..." : "run simulation",
    ),
  );
}

// ---------------------------------------------------------------------------
// Center panel: recommendation, legend, survival plots

function renderCenterPanel(state: UiState, actions: Actions): VNode {
  const children: Child[] = [];
  if (state.submitted !== null) {
    children.push(renderRecommendation(state.submitted.response));
  }
  children.push(renderLegend(state, actions));
  if (state.submitted === null) {
    children.push(
      h("div", { class: "placeholder", id: "placeholder" }, "run a simulation to see projections"),
    );
  } else {
    const response = state.submitted.response;
    for (const endpoint of ENDPOINTS) {
      children.push(renderSurvivalPlot(state, response, endpoint));
    }
  }
  return h("div", { class: "projections" }, children);
}

function renderRecommendation(response: SimulateResponse): VNode {
  const trusted = response.policy.novelty.trusted;
  const thumb = trusted ? "\u{1F44D}" : "\u{1F44E}";
  return h(
    "div",
    { id: "recommendation", class: "recommendation" },
    h("span", { class: "rec-label" }, `${response.decision_label}:`),
    h("span", { id: "rec-probability", class: "rec-probability" }, pct(response.policy.probability)),
    h(
      "span",
      {
        id: "thumbs-icon",
        class: trusted ? "thumbs-up" : "thumbs-down",
        title: trusted
          ? "patient inside the model's trusted region"
          : "patient outside the model's trusted region",
      },
      thumb,
    ),
    h(
      "span",
      { class: "novelty-note" },
      `novelty ${response.policy.novelty.percentile.toFixed(0)}th percentile`,
    ),
  );
}

function renderLegend(state: UiState, actions: Actions): VNode {
  const entries = SERIES_KEYS.map((key) => {
    const style = SERIES_STYLES[key];
    const on = state.visibility[key];
    return h(
      "div",
      {
        class: `legend-entry${on ? "" : " off"}`,
        "data-series": key,
        onclick: () => actions.toggleSeries(style.model, style.treatment),
      },
      h("span", { class: "legend-swatch", style: `background:${style.color}` }),
      h("span", { class: "legend-label" }, style.label),
    );
  });
  return h("div", { id: "legend", class: "legend" }, entries);
}

const PLOT_W = 380;
const PLOT_H = 210;
const PLOT_M = { left: 40, right: 12, top: 24, bottom: 28 };

function renderSurvivalPlot(state: UiState, response: SimulateResponse, endpoint: Endpoint): VNode {
  const months = response.months;
  const x = linearScale([0, months[months.length - 1] ?? 60], [PLOT_M.left, PLOT_W - PLOT_M.right]);
  const y = linearScale([0, 1], [PLOT_H - PLOT_M.bottom, PLOT_M.top]);
  const children: Child[] = [
    h("text", { class: "plot-title", x: String(PLOT_M.left), y: "14" }, ENDPOINT_TITLES[endpoint]),
    h("line", { class: "axis", x1: String(PLOT_M.left), y1: String(y(0)), x2: String(PLOT_W - PLOT_M.right), y2: String(y(0)) }),
    h("line", { class: "axis", x1: String(PLOT_M.left), y1: String(y(0)), x2: String(PLOT_M.left), y2: String(y(1)) }),
    h("text", { class: "tick", x: String(PLOT_M.left - 6), y: String(y(1) + 4), "text-anchor": "end" }, "1"),
    h("text", { class: "tick", x: String(PLOT_M.left - 6), y: String(y(0) + 4), "text-anchor": "end" }, "0"),
  ];

  // follow-up markers at two and five years
  for (const [month, label] of [[24, "2y"], [60, "5y"]] as [number, string][]) {
    children.push(
      h("line", {
        class: "horizon-marker",
        x1: String(x(month)),
        y1: String(y(0)),
        x2: String(x(month)),
        y2: String(y(1)),
        "stroke-dasharray": "3,3",
      }),
      h("text", { class: "tick", x: String(x(month)), y: String(y(0) + 16), "text-anchor": "middle" }, label),
    );
  }

  const xs = months.map((m) => x(m));
  for (const key of visibleSeries(state.visibility)) {
    const style = SERIES_STYLES[key];
    if (style.model === "twin") {
      const arm: Arm = response.arms[style.treatment];
      const curve = arm.curves[endpoint];
      children.push(
        h("polygon", {
          class: `ci-band ci-${key}`,
          points: bandPoints(xs, curve.upper.map((v) => y(v)), curve.lower.map((v) => y(v))),
          style: `fill:${withAlpha(style.color, 0.18)};stroke:none`,
        }),
        h("polyline", {
          class: `series series-${key}`,
          points: polylinePoints(xs, curve.survival.map((v) => y(v))),
          style: `stroke:${style.color};fill:none;stroke-width:2`,
        }),
      );
    } else {
      const km = response.neighbors.km[endpoint][style.treatment];
      if (km === null) continue;
      children.push(
        h("polyline", {
          class: `series series-${key}`,
          points: polylinePoints(xs, km.map((v) => y(v))),
          style: `stroke:${style.color};fill:none;stroke-width:1.5`,
        }),
      );
    }
  }

  return h(
    "svg",
    { id: `plot-${endpoint}`, class: "plot survival-plot", viewBox: `0 0 ${PLOT_W} ${PLOT_H}`, width: String(PLOT_W), height: String(PLOT_H) },
    children,
  );
}

// ---------------------------------------------------------------------------
// Aux panel: tabs

function renderAuxPanel(state: UiState, actions: Actions): VNode {
  const labels: Record<AuxTab, string> = {
    attributions: "attributions",
    neighbors: "similar patients",
    outcomes: "risk table",
    symptoms: "symptoms",
  };
  const bar = h(
    "div",
    { class: "tab-bar" },
    AUX_TABS.map((tab) =>
      h(
        "button",
        {
          id: `tab-${tab}`,
          class: `tab${state.activeTab === tab ? " active" : ""}`,
          type: "button",
          onclick: () => actions.setTab(tab),
        },
        labels[tab],
      ),
    ),
  );
  const body =
    state.submitted === null
      ? h("div", { class: "placeholder" }, "no results yet")
      : renderAuxBody(state, actions, state.submitted.response);
  return h("div", { class: "aux" }, bar, body);
}

function renderAuxBody(state: UiState, actions: Actions, response: SimulateResponse): VNode {
  switch (state.activeTab) {
    case "attributions":
      return renderAttributions(state, response);
    case "neighbors":
      return renderNeighbors(state, response);
    case "outcomes":
      return renderRiskTable(response);
    case "symptoms":
      return renderSymptoms(state, actions, response);
  }
}

// ---------------------------------------------------------------------------
// Attribution waterfall (plus the development-only embedding scatter)

const WF_W = 380;
const WF_LABEL = 104;
const WF_ROW = 20;

function renderAttributions(state: UiState, response: SimulateResponse): VNode {
  const rows = transformWaterfall(response.policy.attribution);
  const x = linearScale([0, 1], [WF_LABEL, WF_W - 12]);
  const height = rows.length * WF_ROW + 40;
  const children: Child[] = [];
  rows.forEach((row, i) => {
    const top = 8 + i * WF_ROW;
    const x0 = x(Math.min(row.start, row.end));
    const x1 = x(Math.max(row.start, row.end));
    children.push(
      h("text", { class: "wf-label", x: "4", y: String(top + 13), "text-anchor": "start" }, row.name.replace(/_/g, " ")),
      h("rect", {
        class: `wf-bar ${row.colorClass}`,
        x: String(Math.round(x0 * 100) / 100),
        y: String(top),
        width: String(Math.max(1, Math.round((x1 - x0) * 100) / 100)),
        height: String(WF_ROW - 4),
        "data-name": row.name,
      }),
      h(
        "text",
        { class: "wf-value", x: String(Math.round(x1 * 100) / 100 + 4), y: String(top + 13), "text-anchor": "start" },
        row.name === "baseline" ? pct(row.end) : signed(row.delta),
      ),
    );
  });
  const final = rows[rows.length - 1]?.end ?? 0;
  children.push(
    h(
      "text",
      { class: "wf-final", x: "4", y: String(height - 10), "text-anchor": "start" },
      `final treatment probability ${pct(final)}`,
    ),
  );
  const parts: Child[] = [
    h("svg", { id: "waterfall", class: "waterfall", viewBox: `0 0 ${WF_W} ${height}`, width: String(WF_W), height: String(height) }, children),
  ];
  if (state.debug && response.debug !== null) {
    parts.push(renderDebugScatter(response));
  }
  return h("div", { class: "attributions" }, parts);
}

/** Stage cohort embeddings in two components; development aid only. */
function renderDebugScatter(response: SimulateResponse): VNode {
  const dbg = response.debug!;
  const xsRaw = dbg.cohort.map((p) => p[0]).concat([dbg.query[0]]);
  const ysRaw = dbg.cohort.map((p) => p[1]).concat([dbg.query[1]]);
  const x = linearScale([Math.min(...xsRaw), Math.max(...xsRaw)], [16, 344]);
  const y = linearScale([Math.min(...ysRaw), Math.max(...ysRaw)], [184, 16]);
  const dots: Child[] = dbg.cohort.map((p, i) => {
    const prop = dbg.propensities[i] ?? 0.5;
    const actual = (dbg.decisions[i] ?? 0) === 1;
    // outer ring shows the model's propensity, inner dot the observed choice
    return h(
      "g",
      { class: "embed-point" },
      h("circle", {
        cx: String(Math.round(x(p[0]) * 10) / 10),
        cy: String(Math.round(y(p[1]) * 10) / 10),
        r: "4",
        style: `fill:${withAlpha(SERIES_STYLES.twin_treated.color, clamp01(prop))};stroke:#999;stroke-width:0.5`,
      }),
      h("circle", {
        cx: String(Math.round(x(p[0]) * 10) / 10),
        cy: String(Math.round(y(p[1]) * 10) / 10),
        r: "1.6",
        style: `fill:${actual ? "#1a1a1a" : "#ffffff"}`,
      }),
    );
  });
  dots.push(
    h("circle", {
      id: "query-point",
      class: "query-point",
      cx: String(Math.round(x(dbg.query[0]) * 10) / 10),
      cy: String(Math.round(y(dbg.query[1]) * 10) / 10),
      r: "6",
      style: `fill:none;stroke:${OVERLAY_COLOR};stroke-width:2.5`,
    }),
  );
  return h(
    "svg",
    { id: "debug-scatter", class: "debug-scatter", viewBox: "0 0 360 200", width: "360", height: "200" },
    h("text", { class: "plot-title", x: "8", y: "12" }, "stage cohort embedding (dev)"),
    dots,
  );
}

// ---------------------------------------------------------------------------
// Risk table: cell shade encodes the risk itself

function renderRiskTable(response: SimulateResponse): VNode {
  const header = h(
    "tr",
    {},
    h("th", {}, "outcome"),
    SERIES_KEYS.map((key) => h("th", {}, SERIES_STYLES[key].label)),
  );
  const rows = OUTCOME_NAMES.map((outcome) => {
    const cell = response.risk_table[outcome];
    const cells = SERIES_KEYS.map((key) => riskCell(key, cell[key]));
    return h("tr", {}, h("td", { class: "risk-outcome" }, OUTCOME_TITLES[outcome]), cells);
  });
  return h(
    "table",
    { id: "risk-table", class: "risk-table" },
    h("thead", {}, header),
    h("tbody", {}, rows),
  );
}

function riskCell(key: SeriesKey, value: number | null): VNode {
  if (value === null) {
    return h("td", { class: "risk-cell missing", "data-alpha": "0" }, "n/a");
  }
  const alpha = clamp01(value);
  return h(
    "td",
    {
      class: "risk-cell",
      "data-alpha": alpha.toFixed(3),
      style: `background:${withAlpha(SERIES_STYLES[key].color, alpha)}`,
    },
    pct(value),
  );
}

// ---------------------------------------------------------------------------
// Similar patients: kiviat triplets and region heatmaps per matched group

interface Axis {
  label: string;
  get(p: Record<string, number>): number;
}

const STAGING_AXES: Axis[] = [
  { label: "T", get: (p) => (p["t_stage"] ?? 0) / 4 },
  { label: "N", get: (p) => (p["n_stage"] ?? 0) / 3 },
  { label: "AJCC", get: (p) => (p["ajcc_stage"] ?? 0) / 4 },
  { label: "grade", get: (p) => (p["pathological_grade"] ?? 0) / 4 },
];

const CLINICAL_AXES: Axis[] = [
  { label: "age", get: (p) => (p["age"] ?? 0) / 100 },
  { label: "male", get: (p) => p["is_male"] ?? 0 },
  { label: "HPV", get: (p) => (p["hpv"] ?? 0) / 2 },
  { label: "smoking", get: (p) => (p["smoking_status"] ?? 0) / 2 },
  { label: "pack yrs", get: (p) => (p["pack_years"] ?? 0) / 80 },
  { label: "asp pre", get: (p) => p["aspiration_pre"] ?? 0 },
];

const OUTCOME_AXES = ["FT", "asp", "OS 4y", "LRC 4y", "FDM 4y"];
const FOUR_YEARS = 48; // month index on the response grid

function outcomeValues(response: SimulateResponse, group: "treated" | "untreated"): number[] {
  const ate = response.neighbors.ate;
  const km = response.neighbors.km;
  const at48 = (arr: number[] | null) => arr?.[FOUR_YEARS] ?? 0;
  return [
    ate.feeding_tube[`${group}_rate`] ?? 0,
    ate.aspiration[`${group}_rate`] ?? 0,
    at48(km.os[group]),
    at48(km.lrc[group]),
    at48(km.fdm[group]),
  ];
}

const KIVIAT_R = 26;
const KIVIAT_SIZE = KIVIAT_R * 2 + 12;

function kiviatGlyph(
  cls: string,
  labels: string[],
  values: number[],
  overlay: number[] | null,
  title: string,
): VNode {
  const c = KIVIAT_SIZE / 2;
  const children: Child[] = [h("title", {}, title)];
  for (let i = 0; i < labels.length; i++) {
    const [ex, ey] = kiviatAxisEnd(i, labels.length, c, c, KIVIAT_R);
    children.push(
      h("line", {
        class: "kiviat-axis",
        x1: String(c),
        y1: String(c),
        x2: String(Math.round(ex * 10) / 10),
        y2: String(Math.round(ey * 10) / 10),
      }),
    );
  }
  children.push(
    h("polygon", {
      class: "kiviat-shape",
      points: kiviatPoints(values, c, c, KIVIAT_R),
      style: "fill:rgba(90,90,90,0.35);stroke:#555",
    }),
  );
  if (overlay !== null) {
    children.push(
      h("polygon", {
        class: "current-overlay",
        points: kiviatPoints(overlay, c, c, KIVIAT_R),
        style: `fill:none;stroke:${OVERLAY_COLOR};stroke-width:1.5`,
      }),
    );
  }
  return h(
    "svg",
    { class: `kiviat ${cls}`, viewBox: `0 0 ${KIVIAT_SIZE} ${KIVIAT_SIZE}`, width: String(KIVIAT_SIZE), height: String(KIVIAT_SIZE) },
    children,
  );
}

function regionHeat(cls: string, regions: Region[], viewBox: string, rates: number[], title: string): VNode {
  const shapes = regions.map((region) =>
    h("polygon", {
      class: "heat-region",
      "data-region": region.id,
      points: region.points,
      style: `fill:${rateFill(rates[region.index] ?? 0)};stroke:#bbb;stroke-width:0.6`,
    }),
  );
  return h(
    "svg",
    { class: `region-heat ${cls}`, viewBox, width: "66", height: "78", preserveAspectRatio: "xMidYMid meet" },
    h("title", {}, title),
    shapes,
  );
}

function profileGlyphRow(
  cls: string,
  label: string,
  p: Record<string, number>,
  rates: { lymph: number[]; subsite: number[]; dlt: number[] },
  overlay: Record<string, number> | null,
  outcomes: number[] | null,
): VNode {
  const staging = kiviatGlyph(
    "kiviat-staging",
    STAGING_AXES.map((a) => a.label),
    STAGING_AXES.map((a) => a.get(p)),
    overlay === null ? null : STAGING_AXES.map((a) => a.get(overlay)),
    `staging: ${STAGING_AXES.map((a) => a.label).join(", ")}`,
  );
  const clinical = kiviatGlyph(
    "kiviat-clinical",
    CLINICAL_AXES.map((a) => a.label),
    CLINICAL_AXES.map((a) => a.get(p)),
    overlay === null ? null : CLINICAL_AXES.map((a) => a.get(overlay)),
    `clinical: ${CLINICAL_AXES.map((a) => a.label).join(", ")}`,
  );
  const cells: Child[] = [
    h("span", { class: "profile-label" }, label),
    staging,
    clinical,
  ];
  if (outcomes !== null) {
    cells.push(
      kiviatGlyph("kiviat-outcomes", OUTCOME_AXES, outcomes, null, `outcomes at 4 years: ${OUTCOME_AXES.join(", ")}`),
    );
  }
  cells.push(
    regionHeat("heat-lymph", LN_REGIONS, LN_VIEWBOX, rates.lymph, "lymph node involvement"),
    regionHeat("heat-subsite", SUBSITE_REGIONS, SUBSITE_VIEWBOX, rates.subsite, "subsite"),
    regionHeat("heat-dlt", DLT_REGIONS, DLT_VIEWBOX, rates.dlt, "dose-limiting toxicities"),
  );
  return h("div", { class: `profile-row ${cls}` }, cells);
}

function numericFeatures(features: Record<string, number | number[]>): Record<string, number> {
  const out: Record<string, number> = {};
  for (const [name, value] of Object.entries(features)) {
    if (typeof value === "number") out[name] = value;
  }
  return out;
}

function renderNeighborGroup(
  state: UiState,
  response: SimulateResponse,
  group: "treated" | "untreated",
): VNode {
  const profile: GroupProfile | null = response.neighbors.profiles[group];
  const size = response.neighbors.group_sizes[group];
  const style = SERIES_STYLES[`neighbor_${group}`];
  const head = h(
    "div",
    { class: "group-head", style: `border-left: 4px solid ${style.color}` },
    `${style.label} (n=${size})`,
  );
  if (profile === null) {
    return h("div", { class: `neighbor-group group-${group}` }, head, h("div", { class: "placeholder" }, "no matched patients"));
  }
  const overlay = numericFeatures(state.submitted!.features);
  const rows: Child[] = [
    head,
    profileGlyphRow(
      "group-average",
      "group average",
      profile as unknown as Record<string, number>,
      { lymph: profile.lymph_node_rates, subsite: profile.subsite_rates, dlt: profile.dlt_rates },
      overlay,
      outcomeValues(response, group),
    ),
  ];
  for (const member of profile.members) {
    rows.push(
      profileGlyphRow(
        "member-row",
        `#${member.id}`,
        member as unknown as Record<string, number>,
        { lymph: member.lymph_node_rates, subsite: member.subsite_rates, dlt: member.dlt_rates },
        overlay,
        null,
      ),
    );
  }
  return h("div", { class: `neighbor-group group-${group}` }, rows);
}

function renderNeighbors(state: UiState, response: SimulateResponse): VNode {
  const children: Child[] = [];
  if (response.neighbors.low_support) {
    children.push(
      h("div", { class: "low-support", id: "low-support" }, "few matched patients; interpret with care"),
    );
  }
  children.push(
    renderNeighborGroup(state, response, "treated"),
    renderNeighborGroup(state, response, "untreated"),
  );
  return h("div", { id: "neighbors-view", class: "neighbors" }, children);
}

// ---------------------------------------------------------------------------
// Symptom trajectories: faint members, bold medians

const SYM_W = 380;
const SYM_H = 200;

function renderSymptoms(state: UiState, actions: Actions, response: SimulateResponse): VNode {
  const section = response.symptoms;
  const chips = section.symptoms.map((name, i) =>
    h(
      "button",
      {
        id: `symptom-chip-${i}`,
        class: `choice${state.selectedSymptom === i ? " selected" : ""}`,
        type: "button",
        onclick: () => actions.selectSymptom(i),
      },
      name,
    ),
  );
  const weeks = section.timepoint_weeks;
  const x = linearScale([weeks[0] ?? 0, weeks[weeks.length - 1] ?? 1], [40, SYM_W - 16]);
  const y = linearScale([0, 10], [SYM_H - 28, 16]);
  const idx = state.selectedSymptom;
  const plotChildren: Child[] = [
    h("line", { class: "axis", x1: "40", y1: String(y(0)), x2: String(SYM_W - 16), y2: String(y(0)) }),
    h("line", { class: "axis", x1: "40", y1: String(y(0)), x2: "40", y2: String(y(10)) }),
    h("text", { class: "tick", x: "34", y: String(y(10) + 4), "text-anchor": "end" }, "10"),
    h("text", { class: "tick", x: "34", y: String(y(0) + 4), "text-anchor": "end" }, "0"),
  ];
  for (const week of weeks) {
    plotChildren.push(
      h("text", { class: "tick", x: String(x(week)), y: String(y(0) + 14), "text-anchor": "middle" }, `${week}w`),
    );
  }

  for (const group of ["treated", "untreated"] as const) {
    if (!state.visibility[`neighbor_${group}`]) continue;
    const style = SERIES_STYLES[`neighbor_${group}`];
    const data = section[group];
    for (const trajectory of data.trajectories) {
      const ratings = trajectory[idx] ?? [];
      const pts = linePoints(weeks, ratings, x, y);
      if (pts === null) continue;
      plotChildren.push(
        h("polyline", {
          class: `trajectory trajectory-${group}`,
          points: pts,
          style: `stroke:${withAlpha(style.color, 0.25)};fill:none;stroke-width:1`,
        }),
      );
    }
    const medians = data.medians[idx] ?? [];
    const pts = linePoints(weeks, medians, x, y);
    if (pts !== null) {
      plotChildren.push(
        h("polyline", {
          class: `median-line median-${group}`,
          points: pts,
          style: `stroke:${style.color};fill:none;stroke-width:3`,
        }),
      );
    }
  }

  const symptomName = section.symptoms[idx] ?? "";
  return h(
    "div",
    { class: "symptoms" },
    h("div", { class: "chips symptom-chips", id: "symptom-select" }, chips),
    h(
      "svg",
      { id: "symptom-plot", class: "plot symptom-plot", viewBox: `0 0 ${SYM_W} ${SYM_H}`, width: String(SYM_W), height: String(SYM_H) },
      h("text", { class: "plot-title", x: "40", y: "12" }, `${symptomName} severity (0-10)`),
      plotChildren,
    ),
  );
}

/** Polyline through the non-missing points; null when nothing to draw. */
function linePoints(
  weeks: number[],
  ratings: (number | null)[],
  x: (v: number) => number,
  y: (v: number) => number,
): string | null {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < weeks.length; i++) {
    const r = ratings[i];
    if (r === null || r === undefined) continue;
    xs.push(x(weeks[i]!));
    ys.push(y(r));
  }
  if (xs.length < 2) return null;
  return polylinePoints(xs, ys);
}
