/**
 * Zod schemas for every payload exchanged with the service.
 *
 * Requests are validated before they leave the client and responses are
 * validated before they reach any view, so a drifting server shows up as
 * a schema error at the boundary instead of NaNs in a plot.
 */

import { z } from "zod";

export const DECISIONS = ["ic", "cc", "nd"] as const;
export const STRATEGIES = ["imitation", "optimal"] as const;
export const ENDPOINTS = ["os", "lrc", "fdm"] as const;
export const OUTCOME_NAMES = ["feeding_tube", "aspiration"] as const;

export type Decision = (typeof DECISIONS)[number];
export type Strategy = (typeof STRATEGIES)[number];
export type Endpoint = (typeof ENDPOINTS)[number];
export type OutcomeName = (typeof OUTCOME_NAMES)[number];

const probability = z.number().min(0).max(1);
const rateOrMissing = probability.nullable();

// ---------------------------------------------------------------------------
// GET /api/schema

const featureEntry = z.object({
  name: z.string(),
  kind: z.enum(["continuous", "binary", "ordinal", "category", "flags"]),
  default: z.union([z.number(), z.array(z.number())]),
  min: z.number().optional(),
  max: z.number().optional(),
  group: z.string().optional(),
  count: z.number().int().optional(),
  labels: z.array(z.string()).optional(),
});

export const schemaPayload = z.object({
  version: z.literal(1),
  features: z.array(featureEntry),
  decisions: z.array(z.enum(DECISIONS)),
  decision_labels: z.record(z.string()),
  strategies: z.array(z.enum(STRATEGIES)),
  response_levels: z.array(z.string()).length(4),
  dlt_kinds: z.array(z.string()).length(5),
  subsites: z.array(z.string()).length(6),
  symptoms: z.array(z.string()),
  symptom_timepoint_weeks: z.array(z.number()),
  months: z.array(z.number()),
  horizons: z.array(z.number()),
  novelty_threshold_percentile: z.number(),
});

export type FeatureEntry = z.infer<typeof featureEntry>;
export type SchemaPayload = z.infer<typeof schemaPayload>;

// ---------------------------------------------------------------------------
// POST /api/simulate request

const featureValue = z.union([z.number(), z.array(z.number())]);

const transitionStateIn = z.object({
  primary_response: z.number().int().min(0).max(3),
  nodal_response: z.number().int().min(0).max(3),
  dlt: z.array(z.number().int().min(0).max(1)).length(5),
});

export const simulateRequest = z.object({
  features: z.record(featureValue),
  decision: z.enum(DECISIONS),
  strategy: z.enum(STRATEGIES),
  fixed: z.record(z.enum(DECISIONS), z.number().int().min(0).max(1)),
  post_ic_state: transitionStateIn.nullable().optional(),
  ci_level: z.number().gt(0).lt(1),
  mc_samples: z.number().int().min(20).max(200),
  seed: z.number().int().nullable(),
  debug: z.boolean().optional(),
});

export type SimulateRequest = z.infer<typeof simulateRequest>;

// ---------------------------------------------------------------------------
// POST /api/simulate response

const curve = z.object({
  survival: z.array(probability),
  lower: z.array(probability),
  upper: z.array(probability),
});

const toxicity = z.object({
  probability,
  lower: probability,
  upper: probability,
});

const transitionDist = z.object({
  primary: z.array(probability).length(4),
  nodal: z.array(probability).length(4),
  dlt: z.array(probability).length(5),
});

const arm = z.object({
  sequence: z.object({ ic: z.number(), cc: z.number(), nd: z.number() }),
  transitions: z.object({ post_ic: transitionDist, post_cc: transitionDist }),
  toxicity: z.object({ feeding_tube: toxicity, aspiration: toxicity }),
  curves: z.object({ os: curve, lrc: curve, fdm: curve }),
});

const waterfallEntry = z.object({
  name: z.string(),
  contribution: z.number(),
  cumulative: z.number(),
});

const attribution = z.object({
  baseline_probability: probability,
  final_probability: probability,
  contributions: z.record(z.number()),
  residual: z.number(),
  waterfall: z.array(waterfallEntry),
});

const novelty = z.object({
  distance: z.number(),
  percentile: z.number().min(0).max(100),
  trusted: z.boolean(),
});

const policySection = z.object({
  stage: z.enum(DECISIONS),
  strategy: z.enum(STRATEGIES),
  probability,
  novelty,
  neighbor_rate: z.object({ rate: probability, members: z.array(z.number()) }),
  attribution,
});

const memberProfile = z.object({
  id: z.number().int(),
  age: z.number(),
  is_male: z.number(),
  race_black: z.number(),
  race_hispanic: z.number(),
  race_other: z.number(),
  hpv: z.number(),
  smoking_status: z.number(),
  pack_years: z.number(),
  t_stage: z.number(),
  n_stage: z.number(),
  ajcc_stage: z.number(),
  pathological_grade: z.number(),
  bilateral: z.number(),
  total_dose: z.number(),
  dose_fraction: z.number(),
  aspiration_pre: z.number(),
  lymph_node_rates: z.array(probability).length(14),
  subsite_rates: z.array(probability).length(6),
  dlt_rates: z.array(probability).length(5),
});

const groupProfile = memberProfile.omit({ id: true }).extend({
  n: z.number().int().positive(),
  members: z.array(memberProfile),
});

const ateEntry = z.object({
  treated_rate: rateOrMissing,
  untreated_rate: rateOrMissing,
  difference: z.number().nullable(),
});

const kmPair = z.object({
  treated: z.array(probability).nullable(),
  untreated: z.array(probability).nullable(),
});

const neighborSection = z.object({
  alpha: z.number(),
  caliper: z.number(),
  low_support: z.boolean(),
  group_sizes: z.object({ treated: z.number(), untreated: z.number() }),
  treated_ids: z.array(z.number()),
  untreated_ids: z.array(z.number()),
  profiles: z.object({
    treated: groupProfile.nullable(),
    untreated: groupProfile.nullable(),
  }),
  ate: z.object({ feeding_tube: ateEntry, aspiration: ateEntry }),
  km: z.object({ os: kmPair, lrc: kmPair, fdm: kmPair }),
});

const ratingOrMissing = z.number().min(0).max(10).nullable();

const symptomGroup = z.object({
  members: z.array(z.number()),
  low_support: z.boolean(),
  medians: z.array(z.array(ratingOrMissing)),
  trajectories: z.array(z.array(z.array(ratingOrMissing))),
});

const symptomSection = z.object({
  treatment: z.enum(["ic", "cc"]),
  symptoms: z.array(z.string()),
  timepoint_weeks: z.array(z.number()),
  treated: symptomGroup,
  untreated: symptomGroup,
});

const riskCell = z.object({
  twin_treated: probability,
  twin_untreated: probability,
  neighbor_treated: rateOrMissing,
  neighbor_untreated: rateOrMissing,
});

const debugSection = z.object({
  cohort: z.array(z.tuple([z.number(), z.number()])),
  query: z.tuple([z.number(), z.number()]),
  decisions: z.array(z.number()),
  propensities: z.array(probability),
});

export const simulateResponse = z
  .object({
    decision: z.enum(DECISIONS),
    decision_label: z.string(),
    strategy: z.enum(STRATEGIES),
    months: z.array(z.number()),
    decision_sources: z.record(z.enum(DECISIONS), z.string()),
    arms: z.object({ treated: arm, untreated: arm }),
    policy: policySection,
    neighbors: neighborSection,
    risk_table: z.object({ feeding_tube: riskCell, aspiration: riskCell }),
    symptoms: symptomSection,
    ci_level: z.number(),
    mc_samples: z.number(),
    seed: z.number().nullable(),
    debug: debugSection.nullable(),
    timing: z.record(z.number()),
  })
  .superRefine((resp, ctx) => {
    // every curve shares the response's month grid
    const n = resp.months.length;
    for (const [armName, a] of Object.entries(resp.arms)) {
      for (const [e, c] of Object.entries(a.curves)) {
        for (const key of ["survival", "lower", "upper"] as const) {
          if (c[key].length !== n) {
            ctx.addIssue({
              code: z.ZodIssueCode.custom,
              message: `arms.${armName}.curves.${e}.${key} has ${c[key].length} points, grid has ${n}`,
            });
          }
        }
      }
    }
    for (const [e, pair] of Object.entries(resp.neighbors.km)) {
      for (const label of ["treated", "untreated"] as const) {
        const km = pair[label];
        if (km !== null && km.length !== n) {
          ctx.addIssue({
            code: z.ZodIssueCode.custom,
            message: `neighbors.km.${e}.${label} has ${km.length} points, grid has ${n}`,
          });
        }
      }
    }
  });

export type SimulateResponse = z.infer<typeof simulateResponse>;
export type Attribution = z.infer<typeof attribution>;
export type GroupProfile = z.infer<typeof groupProfile>;
export type MemberProfile = z.infer<typeof memberProfile>;
export type Arm = z.infer<typeof arm>;
export type SymptomSection = z.infer<typeof symptomSection>;
export type DebugSection = z.infer<typeof debugSection>;

// ---------------------------------------------------------------------------
// 422 body

export const errorBody = z.object({
  detail: z.object({ problems: z.array(z.string()) }),
});

export type ErrorBody = z.infer<typeof errorBody>;
