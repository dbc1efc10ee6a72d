/**
 * Waterfall rows for the attribution chart.
 *
 * The service sends ordered contribution rows whose running sum starts at
 * the baseline probability. Integrated-gradients attributions carry a small
 * unexplained remainder, so a closing row absorbs it: the last row's
 * cumulative end always equals the reported final probability.
 */

import type { Attribution } from "./schemas";

export interface WaterfallRow {
  name: string;
  delta: number;
  start: number;
  end: number;
  colorClass: string;
}

const STRONG = 0.05;
const RESIDUAL_FLOOR = 1e-12;

/** Diverging class by sign and magnitude; anchors get their own classes. */
export function colorClass(delta: number, kind: "baseline" | "delta" | "residual" = "delta"): string {
  if (kind === "baseline") return "wf-baseline";
  if (kind === "residual") return "wf-residual";
  const side = delta >= 0 ? "pos" : "neg";
  const weight = Math.abs(delta) >= STRONG ? "strong" : "weak";
  return `wf-${side}-${weight}`;
}

export function transformWaterfall(attrs: Attribution): WaterfallRow[] {
  const rows: WaterfallRow[] = [
    {
      name: "baseline",
      delta: attrs.baseline_probability,
      start: 0,
      end: attrs.baseline_probability,
      colorClass: colorClass(0, "baseline"),
    },
  ];

  let running = attrs.baseline_probability;
  for (const entry of attrs.waterfall) {
    const start = running;
    running = start + entry.contribution;
    rows.push({
      name: entry.name,
      delta: entry.contribution,
      start,
      end: running,
      colorClass: colorClass(entry.contribution),
    });
  }

  const gap = attrs.final_probability - running;
  if (Math.abs(gap) > RESIDUAL_FLOOR) {
    rows.push({
      name: "unattributed",
      delta: gap,
      start: running,
      end: attrs.final_probability,
      colorClass: colorClass(gap, "residual"),
    });
  } else {
    const last = rows[rows.length - 1]!;
    last.end = attrs.final_probability;
  }
  return rows;
}
