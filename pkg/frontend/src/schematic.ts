/**
 * Spatial input diagrams as simple labeled polygons.
 *
 * The lymph node map draws eight regions per side of the neck: six
 * lateral levels plus the two midline compartments (IA submental, VI
 * central) that both sides share, giving exactly one region per model
 * flag. Region ids are stable and match the feature indexes, so clicks
 * and fills are testable without real anatomy artwork.
 */

export interface Region {
  id: string;
  label: string;
  index: number; // position in the feature vector this region toggles
  points: string;
}

function box(x0: number, y0: number, x1: number, y1: number): string {
  return `${x0},${y0} ${x1},${y0} ${x1},${y1} ${x0},${y1}`;
}

export const LN_VIEWBOX = "0 0 220 260";

// flag order: two midline compartments, then left and right level chains
export const LN_REGIONS: Region[] = [
  { id: "ln-IA", label: "IA", index: 0, points: "110,18 132,40 110,62 88,40" },
  { id: "ln-VI", label: "VI", index: 1, points: box(90, 182, 130, 242) },
  { id: "ln-L-IB", label: "L IB", index: 2, points: box(30, 20, 86, 60) },
  { id: "ln-L-II", label: "L II", index: 3, points: box(30, 66, 86, 106) },
  { id: "ln-L-III", label: "L III", index: 4, points: box(30, 112, 86, 152) },
  { id: "ln-L-IV", label: "L IV", index: 5, points: box(30, 158, 86, 198) },
  { id: "ln-L-V", label: "L V", index: 6, points: box(4, 66, 26, 198) },
  { id: "ln-L-RPN", label: "L RPN", index: 7, points: box(90, 66, 106, 122) },
  { id: "ln-R-IB", label: "R IB", index: 8, points: box(134, 20, 190, 60) },
  { id: "ln-R-II", label: "R II", index: 9, points: box(134, 66, 190, 106) },
  { id: "ln-R-III", label: "R III", index: 10, points: box(134, 112, 190, 152) },
  { id: "ln-R-IV", label: "R IV", index: 11, points: box(134, 158, 190, 198) },
  { id: "ln-R-V", label: "R V", index: 12, points: box(194, 66, 216, 198) },
  { id: "ln-R-RPN", label: "R RPN", index: 13, points: box(114, 66, 130, 122) },
];

export const SUBSITE_VIEWBOX = "0 0 200 170";

// index matches the categorical subsite value
export const SUBSITE_REGIONS: Region[] = [
  { id: "sub-BOT", label: "BOT", index: 0, points: box(40, 64, 92, 112) },
  { id: "sub-tonsil", label: "tonsil", index: 1, points: box(122, 64, 158, 104) },
  { id: "sub-GPS", label: "GPS", index: 2, points: box(96, 64, 118, 104) },
  { id: "sub-soft_palate", label: "soft palate", index: 3, points: box(40, 28, 158, 58) },
  { id: "sub-pharyngeal_wall", label: "pharyngeal wall", index: 4, points: box(164, 28, 188, 148) },
  { id: "sub-NOS", label: "NOS", index: 5, points: box(40, 118, 158, 148) },
];

export const DLT_VIEWBOX = "0 0 120 220";

// index matches the DLT kind order served by the schema
export const DLT_REGIONS: Region[] = [
  { id: "dlt-hematological", label: "hematological", index: 0, points: box(40, 64, 80, 104) },
  { id: "dlt-neurological", label: "neurological", index: 1, points: "60,8 82,30 60,52 38,30" },
  { id: "dlt-dermatological", label: "dermatological", index: 2, points: box(10, 64, 32, 140) },
  { id: "dlt-gastrointestinal", label: "gastrointestinal", index: 3, points: box(40, 110, 80, 150) },
  { id: "dlt-other", label: "other", index: 4, points: box(40, 156, 80, 212) },
];

/** 1-based model group name for a lymph node flag ("ln_01".."ln_14"). */
export function lymphGroupName(index: number): string {
  return `ln_${String(index + 1).padStart(2, "0")}`;
}

/**
 * Diverging attribution fill: red pushes the treatment probability up,
 * blue pushes it down; opacity scales with magnitude.
 */
export function attributionFill(contribution: number | undefined, saturate = 0.15): string {
  if (contribution === undefined || contribution === 0) return "rgba(0,0,0,0)";
  const alpha = Math.min(1, Math.abs(contribution) / saturate);
  return contribution > 0
    ? `rgba(178,24,43,${alpha.toFixed(3)})`
    : `rgba(33,102,172,${alpha.toFixed(3)})`;
}

/** Greyscale heat for neighbor involvement rates; 0 stays transparent. */
export function rateFill(rate: number): string {
  const alpha = Math.max(0, Math.min(1, rate));
  return `rgba(60,60,60,${alpha.toFixed(3)})`;
}
