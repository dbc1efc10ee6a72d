/**
 * The plot series contract: one series per model group x treatment group.
 *
 * Hue encodes the model group (twin = purple family, neighbors = green
 * family) and luminance encodes treatment (treated darker). Every curve
 * drawn anywhere in the interface takes its color from this map, and the
 * legend toggles drive exactly this set.
 */

export type ModelGroup = "twin" | "neighbor";
export type TreatmentGroup = "treated" | "untreated";
export type SeriesKey = `${ModelGroup}_${TreatmentGroup}`;

export const SERIES_KEYS: SeriesKey[] = [
  "twin_treated",
  "twin_untreated",
  "neighbor_treated",
  "neighbor_untreated",
];

export interface SeriesStyle {
  model: ModelGroup;
  treatment: TreatmentGroup;
  label: string;
  color: string;
  envelope: boolean; // twin curves carry CI envelopes, KM curves do not
}

export const SERIES_STYLES: Record<SeriesKey, SeriesStyle> = {
  twin_treated: {
    model: "twin",
    treatment: "treated",
    label: "twin, treated",
    color: "#5e2b8f",
    envelope: true,
  },
  twin_untreated: {
    model: "twin",
    treatment: "untreated",
    label: "twin, untreated",
    color: "#b794d6",
    envelope: true,
  },
  neighbor_treated: {
    model: "neighbor",
    treatment: "treated",
    label: "neighbors, treated",
    color: "#1e6b34",
    envelope: false,
  },
  neighbor_untreated: {
    model: "neighbor",
    treatment: "untreated",
    label: "neighbors, untreated",
    color: "#8fce9f",
    envelope: false,
  },
};

export type Visibility = Record<SeriesKey, boolean>;

export function allVisible(): Visibility {
  return {
    twin_treated: true,
    twin_untreated: true,
    neighbor_treated: true,
    neighbor_untreated: true,
  };
}

/** The exact series set a plot must draw, in legend order. */
export function visibleSeries(visibility: Visibility): SeriesKey[] {
  return SERIES_KEYS.filter((key) => visibility[key]);
}

export function seriesKey(model: ModelGroup, treatment: TreatmentGroup): SeriesKey {
  return `${model}_${treatment}`;
}
