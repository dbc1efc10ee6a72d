/**
 * Scales and path builders shared by the SVG views.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const fn = ((value: number) =>
    span === 0 ? r0 : r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function polylinePoints(xs: number[], ys: number[]): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    parts.push(`${round2(xs[i]!)},${round2(ys[i]!)}`);
  }
  return parts.join(" ");
}

/** Closed band between an upper and a lower curve, for CI envelopes. */
export function bandPoints(xs: number[], upper: number[], lower: number[]): string {
  const forward = polylinePoints(xs, upper);
  const back = polylinePoints([...xs].reverse(), [...lower].reverse());
  return `${forward} ${back}`;
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

// ---------------------------------------------------------------------------
// Kiviat (radar) glyphs

export interface KiviatAxis {
  label: string;
  value: number; // already normalized to [0, 1]
}

/** Vertex positions for values around a circle, first axis pointing up. */
export function kiviatPoints(values: number[], cx: number, cy: number, radius: number): string {
  const n = values.length;
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < n; i++) {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / n;
    const r = radius * clamp01(values[i]!);
    xs.push(cx + r * Math.cos(angle));
    ys.push(cy + r * Math.sin(angle));
  }
  return polylinePoints(xs, ys);
}

export function kiviatAxisEnd(index: number, count: number, cx: number, cy: number, radius: number): [number, number] {
  const angle = -Math.PI / 2 + (2 * Math.PI * index) / count;
  return [cx + radius * Math.cos(angle), cy + radius * Math.sin(angle)];
}

export function clamp01(v: number): number {
  return Math.max(0, Math.min(1, v));
}
