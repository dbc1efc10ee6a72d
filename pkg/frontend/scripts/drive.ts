/**
 * End-to-end drive of the client stack against a live service.
 *
 * Walks a realistic clinician session through the real store, API client,
 * zod boundary, and view renderer, printing one OK/FAIL line per probe.
 * Run with: npm run drive -- http://127.0.0.1:8123
 */

import { TwinApi } from "../src/api";
import { createApp } from "../src/app";
import { byClass, findById, mount, textOf, type VNode } from "../src/dom";
import { pendingChanges } from "../src/state";
import { renderApp } from "../src/views";
import { transformWaterfall } from "../src/waterfall";

const base = process.argv[2] ?? "http://127.0.0.1:8123";

let failures = 0;

function check(label: string, ok: boolean, detail = ""): void {
  if (!ok) failures += 1;
  const suffix = detail === "" ? "" : ` (${detail})`;
  console.log(`${ok ? "OK  " : "FAIL"} ${label}${suffix}`);
}

/** Minimal Document so mount() runs outside a browser. */
interface FakeElement {
  tag: string;
  ns: string | null;
  attrs: Record<string, string>;
  listeners: string[];
  children: (FakeElement | string)[];
  setAttribute(k: string, v: string): void;
  addEventListener(e: string, h: unknown): void;
  appendChild(c: FakeElement | string): void;
}

function fakeElement(tag: string, ns: string | null): FakeElement {
  return {
    tag,
    ns,
    attrs: {},
    listeners: [],
    children: [],
    setAttribute(k, v) {
      this.attrs[k] = v;
    },
    addEventListener(e) {
      this.listeners.push(e);
    },
    appendChild(c) {
      this.children.push(c);
    },
  };
}

const fakeDocument = {
  createElement: (tag: string) => fakeElement(tag, null),
  createElementNS: (ns: string, tag: string) => fakeElement(tag, ns),
  createTextNode: (text: string) => text,
} as unknown as Document;

function countElements(el: FakeElement): number {
  let n = 1;
  for (const child of el.children) {
    if (typeof child !== "string") n += countElements(child);
  }
  return n;
}

async function main(): Promise<void> {
  let fetchCount = 0;
  const countingFetch: typeof fetch = (input, init) => {
    fetchCount += 1;
    return fetch(input, init);
  };

  const api = new TwinApi(base, countingFetch);
  const schema = await api.schema();
  check("GET /api/schema parses through zod", schema.months.length === 61);

  const app = createApp(schema, api);
  let tree: VNode = renderApp(app.getState(), app.actions);
  check("pre-submit: placeholder, no plots", findById(tree, "placeholder") !== null && findById(tree, "plot-os") === null);
  check("pre-submit: legend already rendered", byClass(tree, "legend-entry").length === 4);

  const callsBeforeEdits = fetchCount;
  app.actions.editFeature("age", 66);
  app.actions.toggleRegion(3);
  app.actions.toggleRegion(9);
  app.actions.editFeature("subsite", 1);
  app.actions.setDecision("cc");
  app.actions.setSeed(17);
  check("feature edits cause no network traffic", fetchCount === callsBeforeEdits);

  await app.actions.run();
  check("run issues exactly one simulate call", fetchCount === callsBeforeEdits + 1);
  const submitted = app.getState().submitted;
  check("response accepted at the zod boundary", submitted !== null);
  if (submitted === null) throw new Error("no response; aborting drive");

  tree = renderApp(app.getState(), app.actions);
  check(
    "three survival plots with four series each",
    ["os", "lrc", "fdm"].every((e) => {
      const plot = findById(tree, `plot-${e}`);
      return plot !== null && byClass(plot, "series").length === 4 && byClass(plot, "ci-band").length === 2;
    }),
  );
  const rec = findById(tree, "recommendation");
  check("recommendation header shows label and percentage", rec !== null && /%/.test(textOf(rec!)));
  const thumbs = findById(tree, "thumbs-icon");
  const trusted = submitted.response.policy.novelty.trusted;
  check(
    "thumbs icon follows the novelty trust flag",
    thumbs !== null && thumbs.attrs["class"] === (trusted ? "thumbs-up" : "thumbs-down"),
    `percentile ${submitted.response.policy.novelty.percentile.toFixed(1)}`,
  );

  const rows = transformWaterfall(submitted.response.policy.attribution);
  const gap = Math.abs(rows[rows.length - 1]!.end - submitted.response.policy.attribution.final_probability);
  check("waterfall ends at the final probability", gap < 1e-9, `gap ${gap.toExponential(2)}`);

  const mounted = countElements(mount(tree, fakeDocument) as unknown as FakeElement);
  check("tree mounts through the DOM adapter", mounted > 200, `${mounted} elements`);

  app.actions.editFeature("age", 67);
  tree = renderApp(app.getState(), app.actions);
  check("draft edit raises the pending badge, plots unchanged", findById(tree, "pending-indicator") !== null && pendingChanges(app.getState()));
  check("displayed response still the submitted one", app.getState().submitted!.features["age"] === 66);

  // cancel-and-replace: two rapid presses, the second response wins
  const before = fetchCount;
  const p1 = app.actions.run();
  const p2 = app.actions.run();
  await Promise.all([p1, p2]);
  check("second press aborts and replaces the first", fetchCount === before + 2 && app.getState().submitted!.features["age"] === 67);
  check("no stale in-flight flag", app.getState().inFlight === false);

  app.actions.editFeature("age", -5);
  await app.actions.run();
  const problems = app.getState().problems;
  tree = renderApp(app.getState(), app.actions);
  const ageErrors = byClass(tree, "field-error").filter((n) => textOf(n).includes("age"));
  check("422 problems land inline at the age field", problems.length > 0 && ageErrors.length === 1, problems[0] ?? "");
  check("previous response survives the failed run", app.getState().submitted!.features["age"] === 67);

  // debug mode: opt-in embedding scatter
  const debugApp = createApp(schema, new TwinApi(base, countingFetch), true);
  await debugApp.actions.run();
  const debugTree = renderApp(debugApp.getState(), debugApp.actions);
  const scatter = findById(debugTree, "debug-scatter");
  const cohortSize = debugApp.getState().submitted?.response.debug?.cohort.length ?? 0;
  check("debug flag yields the embedding scatter", scatter !== null && cohortSize > 0, `${cohortSize} cohort points`);

  console.log(failures === 0 ? "\nall probes passed" : `\n${failures} probe(s) failed`);
  process.exit(failures === 0 ? 0 : 1);
}

main().catch((err) => {
  console.error("drive aborted:", err);
  process.exit(1);
});
