"""Patient data model, cohort I/O, synthetic generation, split, and encoding.

The treatment path is three binary decisions: induction chemotherapy (IC),
concurrent chemotherapy with radiation (CC), and neck dissection (ND).
Radiation is delivered to every patient, so post-RT transition states exist
even when cc=0; only the IC stage carries the no-treatment-implies-stable
constraint.

CSV schema (one header row, comma-delimited, "." decimal, UTF-8), columns in
this fixed order:

    age, male, race_black, race_hispanic, race_other, hpv, smoking,
    pack_years, ln_01..ln_14, t_stage, n_stage, ajcc, grade, subsite,
    bilateral, total_dose, dose_fraction, asp_pre, ic, cc, nd, pr_ic, nr_ic,
    dlt1_1..dlt1_5, pr_cc, nr_cc, dlt2_1..dlt2_5, os_event, os_months,
    lrc_event, lrc_months, fdm_event, fdm_months, ft, asp_post

Encodings: hpv 0=negative 1=positive 2=unknown; smoking 0=never 1=former
2=current; subsite index into SUBSITES; responses (pr_*, nr_*) index into
RESPONSE_LEVELS; months are floats; all flags are 0/1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .nn.autodiff import ConfigError, UsageError

__all__ = [
    "PatientFeatures",
    "TreatmentSequence",
    "TransitionState",
    "OutcomeRecord",
    "CohortRecord",
    "CohortError",
    "FeatureEncoder",
    "load_cohort_csv",
    "save_cohort_csv",
    "generate_synthetic_cohort",
    "stratified_split",
    "transition_block",
    "SUBSITES",
    "RESPONSE_LEVELS",
    "DLT_KINDS",
    "SEQUENCE_NAMES",
    "BASELINE_WIDTH",
    "STATE_WIDTH",
    "TRANSITION_WIDTH",
    "BASELINE_GROUPS",
    "STATE_GROUPS",
    "COLUMNS",
]

SUBSITES = ("BOT", "tonsil", "GPS", "soft_palate", "pharyngeal_wall", "NOS")
RESPONSE_LEVELS = ("progressive", "stable", "partial", "complete")
DLT_KINDS = ("hematological", "neurological", "dermatological", "gastrointestinal", "other")
STABLE = RESPONSE_LEVELS.index("stable")

N_LYMPH_REGIONS = 14
TRANSITION_WIDTH = 4 + 4 + 5
BASELINE_WIDTH = 38
STATE_WIDTH = BASELINE_WIDTH + 2 + 2 * TRANSITION_WIDTH

COLUMNS = (
    ["age", "male", "race_black", "race_hispanic", "race_other", "hpv", "smoking", "pack_years"]
    + [f"ln_{i:02d}" for i in range(1, 15)]
    + ["t_stage", "n_stage", "ajcc", "grade", "subsite", "bilateral",
       "total_dose", "dose_fraction", "asp_pre", "ic", "cc", "nd", "pr_ic", "nr_ic"]
    + [f"dlt1_{i}" for i in range(1, 6)]
    + ["pr_cc", "nr_cc"]
    + [f"dlt2_{i}" for i in range(1, 6)]
    + ["os_event", "os_months", "lrc_event", "lrc_months",
       "fdm_event", "fdm_months", "ft", "asp_post"]
)


class CohortError(ValueError):
    """Validation failure; message carries row/field diagnostics."""


@dataclass
class PatientFeatures:
    age: float
    is_male: int
    race_black: int = 0
    race_hispanic: int = 0
    race_other: int = 0
    hpv: int = 0
    smoking_status: int = 0
    pack_years: float = 0.0
    lymph_node_regions: tuple = (0,) * N_LYMPH_REGIONS
    t_stage: int = 1
    n_stage: int = 0
    ajcc_stage: int = 1
    pathological_grade: int = 2
    subsite: int = 0
    bilateral: int = 0
    total_dose: float = 69.0
    dose_fraction: float = 2.1
    aspiration_pre: int = 0

    def validate(self) -> list[str]:
        problems = []
        flags = {"is_male": self.is_male, "race_black": self.race_black,
                 "race_hispanic": self.race_hispanic, "race_other": self.race_other,
                 "bilateral": self.bilateral, "aspiration_pre": self.aspiration_pre}
        for name, v in flags.items():
            if v not in (0, 1):
                problems.append(f"{name}={v} not binary")
        if self.race_black + self.race_hispanic + self.race_other > 1:
            problems.append("more than one race flag set")
        ranges = {"hpv": (self.hpv, 0, 2), "smoking": (self.smoking_status, 0, 2),
                  "t_stage": (self.t_stage, 1, 4), "n_stage": (self.n_stage, 0, 3),
                  "ajcc": (self.ajcc_stage, 1, 4), "grade": (self.pathological_grade, 1, 4),
                  "subsite": (self.subsite, 0, 5)}
        for name, (v, lo, hi) in ranges.items():
            if not lo <= v <= hi:
                problems.append(f"{name}={v} outside [{lo}, {hi}]")
        if len(self.lymph_node_regions) != N_LYMPH_REGIONS:
            problems.append(f"lymph_node_regions has {len(self.lymph_node_regions)} flags, need {N_LYMPH_REGIONS}")
        elif any(v not in (0, 1) for v in self.lymph_node_regions):
            problems.append("lymph_node_regions contains non-binary value")
        if self.pack_years < 0:
            problems.append(f"pack_years={self.pack_years} negative")
        if self.total_dose <= 0:
            problems.append(f"total_dose={self.total_dose} not positive")
        if self.dose_fraction <= 0:
            problems.append(f"dose_fraction={self.dose_fraction} not positive")
        if not self.age > 0:
            problems.append(f"age={self.age} not positive")
        return problems


@dataclass
class TreatmentSequence:
    ic: int
    cc: int
    nd: int
    provenance: tuple = ("ground-truth", "ground-truth", "ground-truth")

    def validate(self) -> list[str]:
        return [f"{k}={v} not binary" for k, v in
                (("ic", self.ic), ("cc", self.cc), ("nd", self.nd)) if v not in (0, 1)]

    def as_tuple(self):
        return (self.ic, self.cc, self.nd)


@dataclass
class TransitionState:
    primary_response: int
    nodal_response: int
    dlt: tuple = (0, 0, 0, 0, 0)

    def validate(self, prefix: str = "") -> list[str]:
        problems = []
        for name, v in (("pr", self.primary_response), ("nr", self.nodal_response)):
            if not 0 <= v <= 3:
                problems.append(f"{prefix}{name}={v} outside [0, 3]")
        if len(self.dlt) != 5 or any(v not in (0, 1) for v in self.dlt):
            problems.append(f"{prefix}dlt flags invalid: {self.dlt}")
        return problems


@dataclass
class OutcomeRecord:
    os_event: int
    os_months: float
    lrc_event: int
    lrc_months: float
    fdm_event: int
    fdm_months: float
    ft: int
    aspiration_post: int

    def validate(self) -> list[str]:
        problems = []
        for name in ("os", "lrc", "fdm"):
            ev = getattr(self, f"{name}_event")
            months = getattr(self, f"{name}_months")
            if ev not in (0, 1):
                problems.append(f"{name}_event={ev} not binary")
            if not months > 0:
                problems.append(f"{name}_months={months} not positive")
        for name, v in (("ft", self.ft), ("asp_post", self.aspiration_post)):
            if v not in (0, 1):
                problems.append(f"{name}={v} not binary")
        return problems


@dataclass
class CohortRecord:
    features: PatientFeatures
    sequence: TreatmentSequence
    post_ic: TransitionState
    post_cc: TransitionState
    outcomes: OutcomeRecord

    def validate(self) -> list[str]:
        problems = self.features.validate()
        problems += self.sequence.validate()
        problems += self.post_ic.validate("post_ic.")
        problems += self.post_cc.validate("post_cc.")
        problems += self.outcomes.validate()
        # no induction treatment -> disease cannot have responded yet
        if self.sequence.ic == 0 and not problems:
            if self.post_ic.primary_response != STABLE or self.post_ic.nodal_response != STABLE:
                problems.append("ic=0 but post-IC response is not stable")
        return problems


# ---------------------------------------------------------------------------
# CSV serialization


def _record_to_row(rec: CohortRecord) -> list[str]:
    f, s, o = rec.features, rec.sequence, rec.outcomes

    def num(x):
        return repr(float(x)) if isinstance(x, float) else str(int(x))

    row = [repr(float(f.age)), str(f.is_male), str(f.race_black), str(f.race_hispanic),
           str(f.race_other), str(f.hpv), str(f.smoking_status), repr(float(f.pack_years))]
    row += [str(v) for v in f.lymph_node_regions]
    row += [str(f.t_stage), str(f.n_stage), str(f.ajcc_stage), str(f.pathological_grade),
            str(f.subsite), str(f.bilateral), repr(float(f.total_dose)),
            repr(float(f.dose_fraction)), str(f.aspiration_pre)]
    row += [str(s.ic), str(s.cc), str(s.nd)]
    row += [str(rec.post_ic.primary_response), str(rec.post_ic.nodal_response)]
    row += [str(v) for v in rec.post_ic.dlt]
    row += [str(rec.post_cc.primary_response), str(rec.post_cc.nodal_response)]
    row += [str(v) for v in rec.post_cc.dlt]
    row += [str(o.os_event), repr(float(o.os_months)), str(o.lrc_event),
            repr(float(o.lrc_months)), str(o.fdm_event), repr(float(o.fdm_months)),
            str(o.ft), str(o.aspiration_post)]
    return row


def _row_to_record(values: dict[str, str]) -> CohortRecord:
    def f(col):
        return float(values[col])

    def i(col):
        raw = values[col]
        v = float(raw)
        if v != int(v):
            raise CohortError(f"column {col}: {raw} is not an integer")
        return int(v)

    features = PatientFeatures(
        age=f("age"), is_male=i("male"), race_black=i("race_black"),
        race_hispanic=i("race_hispanic"), race_other=i("race_other"), hpv=i("hpv"),
        smoking_status=i("smoking"), pack_years=f("pack_years"),
        lymph_node_regions=tuple(i(f"ln_{k:02d}") for k in range(1, 15)),
        t_stage=i("t_stage"), n_stage=i("n_stage"), ajcc_stage=i("ajcc"),
        pathological_grade=i("grade"), subsite=i("subsite"), bilateral=i("bilateral"),
        total_dose=f("total_dose"), dose_fraction=f("dose_fraction"),
        aspiration_pre=i("asp_pre"),
    )
    sequence = TreatmentSequence(ic=i("ic"), cc=i("cc"), nd=i("nd"))
    post_ic = TransitionState(i("pr_ic"), i("nr_ic"),
                              tuple(i(f"dlt1_{k}") for k in range(1, 6)))
    post_cc = TransitionState(i("pr_cc"), i("nr_cc"),
                              tuple(i(f"dlt2_{k}") for k in range(1, 6)))
    outcomes = OutcomeRecord(
        os_event=i("os_event"), os_months=f("os_months"), lrc_event=i("lrc_event"),
        lrc_months=f("lrc_months"), fdm_event=i("fdm_event"), fdm_months=f("fdm_months"),
        ft=i("ft"), aspiration_post=i("asp_post"),
    )
    return CohortRecord(features, sequence, post_ic, post_cc, outcomes)


def save_cohort_csv(records: list[CohortRecord], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow(_record_to_row(rec))


def load_cohort_csv(path) -> list[CohortRecord]:
    """Load and validate a cohort file; any invalid row fails the whole load."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: empty file")
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise CohortError(f"{path}: missing columns {missing}")
        index = {c: header.index(c) for c in COLUMNS}
        records = []
        problems = []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                values = {c: row[index[c]] for c in COLUMNS}
                rec = _row_to_record(values)
            except (ValueError, IndexError) as exc:
                problems.append(f"row {rownum}: {exc}")
                continue
            for p in rec.validate():
                problems.append(f"row {rownum}: column {p.split('=')[0].strip()}: {p}")
            records.append(rec)
        if problems:
            raise CohortError(f"{path}: {len(problems)} invalid entries:\n  "
                              + "\n  ".join(problems))
    return records


# ---------------------------------------------------------------------------
# Synthetic cohort generation
#
# Per-sequence marginal rates for features follow the published cohort
# breakdown; transitions and outcomes come from a documented latent-risk
# model so tests have known ground truth. Sequence order below is fixed.

SEQUENCE_NAMES = ("CC", "None", "CC+ND", "IC+CC", "IC+CC+ND", "IC", "ND", "IC+ND")
SEQUENCE_DECISIONS = {
    "CC": (0, 1, 0), "None": (0, 0, 0), "CC+ND": (0, 1, 1), "IC+CC": (1, 1, 0),
    "IC+CC+ND": (1, 1, 1), "IC": (1, 0, 0), "ND": (0, 0, 1), "IC+ND": (1, 0, 1),
}
SEQUENCE_COUNTS = (223, 57, 51, 100, 36, 45, 11, 13)

# rows: one value per sequence, in SEQUENCE_NAMES order (percent unless noted)
_MARGINALS = {
    "hpv_pos": (56.50, 80.70, 54.90, 50.00, 61.11, 42.22, 54.55, 61.54),
    "hpv_unknown": (6.28, 1.75, 7.84, 16.00, 11.11, 2.22, 18.18, 7.69),
    "age_mean": (59.3, 61.3, 57.7, 58.5, 58.3, 57.6, 59.6, 57.0),
    "pack_years_mean": (17.6, 10.5, 18.9, 17.6, 21.8, 15.4, 16.7, 4.8),
    "male": (88.34, 80.70, 92.16, 87.00, 91.67, 88.89, 81.82, 92.31),
    "smoker": (19.28, 19.30, 35.29, 22.00, 22.22, 24.44, 18.18, 0.00),
    "former": (42.15, 40.35, 29.41, 34.00, 33.33, 33.33, 54.55, 30.77),
    "bilateral": (4.48, 3.51, 5.88, 4.00, 2.78, 2.22, 0.00, 0.00),
    "t1": (18.83, 63.16, 5.88, 6.00, 13.89, 28.89, 54.55, 30.77),
    "t2": (42.15, 33.33, 54.90, 33.00, 27.78, 48.89, 45.45, 61.54),
    "t3": (24.66, 3.51, 21.57, 29.00, 27.78, 17.78, 0.00, 7.69),
    "t4": (14.35, 0.00, 17.65, 32.00, 30.56, 4.44, 0.00, 0.00),
    "n1": (52.91, 80.70, 52.94, 27.00, 16.67, 22.22, 63.64, 61.54),
    "n2": (39.46, 12.28, 43.14, 65.00, 75.00, 73.33, 27.27, 38.46),
    "n3": (1.79, 0.00, 0.00, 8.00, 8.33, 4.44, 0.00, 0.00),
    "ajcc2": (15.25, 5.26, 15.69, 16.00, 22.22, 22.22, 9.09, 7.69),
    "ajcc3": (9.42, 5.26, 13.73, 22.00, 25.00, 0.00, 18.18, 0.00),
    "ajcc4": (36.77, 12.28, 39.22, 49.00, 38.89, 57.78, 18.18, 38.46),
    "sub_bot": (50.22, 35.09, 47.06, 56.00, 55.56, 57.78, 18.18, 46.15),
    "sub_gps": (0.90, 1.75, 1.96, 2.00, 8.33, 0.00, 0.00, 7.69),
    "sub_soft": (0.90, 1.75, 3.92, 1.00, 0.00, 0.00, 0.00, 0.00),
    "sub_tonsil": (41.26, 54.39, 41.18, 36.00, 33.33, 40.00, 81.82, 30.77),
    "grade1": (0.90, 0.00, 0.00, 3.00, 0.00, 0.00, 9.09, 0.00),
    "grade2": (28.25, 31.58, 27.45, 28.00, 33.33, 28.89, 45.45, 7.69),
    "grade3": (50.67, 54.39, 56.86, 48.00, 55.56, 46.67, 36.36, 61.54),
    "grade4": (0.90, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 7.69),
    "white": (93.27, 89.47, 96.08, 86.00, 86.11, 93.33, 90.91, 92.31),
    "asp_pre": (2.24, 0.00, 1.96, 7.00, 5.56, 2.22, 0.00, 0.00),
    "dose_mean": (68.99, 66.86, 69.47, 69.36, 69.33, 67.42, 68.05, 67.23),
    "fraction_mean": (2.10, 2.16, 2.08, 2.11, 2.08, 2.15, 2.17, 2.18),
    # transition targets (percent): post-IC response applies only when ic=1
    "cr1_primary": (0, 0, 0, 34.00, 38.89, 66.67, 0, 46.15),
    "pr1_primary": (0, 0, 0, 52.00, 55.56, 28.89, 0, 30.77),
    "cr1_nodal": (0, 0, 0, 10.00, 2.78, 11.11, 0, 0),
    "pr1_nodal": (0, 0, 0, 75.00, 88.89, 86.67, 0, 84.62),
    "dlt1_any": (0, 0, 0, 75.00, 50.00, 64.44, 0, 84.62),
    "cr2_primary": (83.41, 91.23, 68.63, 90.00, 72.22, 91.11, 81.82, 92.31),
    "pr2_primary": (16.14, 7.02, 25.49, 10.00, 19.44, 4.44, 18.18, 7.69),
    "cr2_nodal": (52.02, 52.63, 17.65, 58.00, 19.44, 57.78, 9.09, 7.69),
    "pr2_nodal": (43.95, 35.09, 80.39, 34.00, 77.78, 37.78, 90.91, 69.23),
    "dlt2_any": (27.80, 0.00, 15.69, 29.00, 25.00, 0.00, 0.00, 0.00),
}

# share of any-DLT probability assigned to each of the five toxicity kinds
_DLT_SHARES = (0.45, 0.15, 0.20, 0.35, 0.15)

# lymph-node region involvement weights (7 left + 7 mirrored right); the
# first regions (levels II-IV analogues) dominate clinically
_LN_WEIGHTS = np.array([0.34, 0.22, 0.14, 0.10, 0.08, 0.07, 0.05])

# latent risk: deterministic function of staging/behavior features; fixed
# centering constants so risk does not depend on the sampled cohort
_RISK_TERMS = (
    ("t_stage", 2.4, 1.0, 0.45),
    ("n_stage", 1.5, 0.8, 0.35),
    ("ajcc_stage", 2.8, 1.1, 0.25),
    ("pathological_grade", 2.7, 0.6, 0.15),
    ("age", 58.8, 8.5, 0.20),
    ("smoking_status", 1.0, 0.8, 0.15),
    ("pack_years", 16.0, 15.0, 0.10),
)


def latent_risk(p: PatientFeatures) -> float:
    """Ground-truth severity score used by the synthetic outcome model."""
    r = sum(w * (getattr(p, name) - center) / scale
            for name, center, scale, w in _RISK_TERMS)
    if p.hpv != 1:
        r += 0.25
    return r


def _tilted_response(base_cr: float, base_pr: float, risk: float,
                     rng: np.random.Generator) -> int:
    """Sample an ordinal response whose distribution shifts with risk."""
    rest = max(1.0 - base_cr - base_pr, 0.0)
    probs = np.array([0.15 * rest, 0.85 * rest, base_pr, base_cr])
    probs = np.maximum(probs, 1e-6)
    tilt = np.exp(-0.4 * risk * np.arange(4))
    probs = probs * tilt
    probs /= probs.sum()
    return int(rng.choice(4, p=probs))


def _sample_transitions(seq_idx: int, decisions, risk: float,
                        rng: np.random.Generator):
    def col(key):
        return _MARGINALS[key][seq_idx] / 100.0

    ic, cc, _ = decisions
    if ic:
        post_ic = TransitionState(
            _tilted_response(col("cr1_primary"), col("pr1_primary"), risk, rng),
            _tilted_response(col("cr1_nodal"), col("pr1_nodal"), risk, rng),
            _sample_dlt(col("dlt1_any"), risk, rng),
        )
    else:
        post_ic = TransitionState(STABLE, STABLE, (0, 0, 0, 0, 0))
    # radiation is always delivered, so a post-RT response exists either way
    post_cc = TransitionState(
        _tilted_response(col("cr2_primary"), col("pr2_primary"), risk, rng),
        _tilted_response(col("cr2_nodal"), col("pr2_nodal"), risk, rng),
        _sample_dlt(col("dlt2_any"), risk, rng) if cc else (0, 0, 0, 0, 0),
    )
    return post_ic, post_cc


def _sample_dlt(any_rate: float, risk: float, rng: np.random.Generator) -> tuple:
    if any_rate <= 0.0:
        return (0, 0, 0, 0, 0)
    logit = np.log(any_rate / (1.0 - any_rate + 1e-9)) + 0.3 * risk
    p_any = 1.0 / (1.0 + np.exp(-logit))
    return tuple(int(rng.random() < p_any * share) for share in _DLT_SHARES)


# outcome model coefficients: ln T = intercept - risk_w * risk
#                                    + ic_w*ic + cc_w*cc + nd_w*nd + sigma * eps
_TIME_MODEL = {
    "os": (np.log(85.0), 0.55, 0.15, 0.25, 0.10, 0.70),
    "lrc": (np.log(140.0), 0.65, 0.20, 0.35, 0.25, 0.85),
    "fdm": (np.log(155.0), 0.60, 0.20, 0.30, 0.10, 0.85),
}
# binary toxicity model: logit = intercept + risk_w*risk + per-decision terms
_TOX_MODEL = {
    "ft": (-3.1, 0.45, 0.75, 1.30, 0.55),
    "asp": (-3.3, 0.50, 0.80, 1.35, 0.65),
}


def _sample_outcomes(decisions, risk: float, post_cc: TransitionState,
                     asp_pre: int, rng: np.random.Generator) -> OutcomeRecord:
    ic, cc, nd = decisions
    # residual disease after RT raises late risk; complete response lowers it
    residual = (STABLE + 1 - post_cc.primary_response) * 0.25
    censor = rng.uniform(48.0, 96.0)
    times = {}
    events = {}
    for name, (a, rw, icw, ccw, ndw, sigma) in _TIME_MODEL.items():
        ln_t = a - rw * (risk + residual) + icw * ic + ccw * cc + ndw * nd
        t = float(np.exp(ln_t + sigma * rng.standard_normal()))
        events[name] = int(t <= censor)
        times[name] = min(t, censor)
    tox = {}
    for name, (a, rw, icw, ccw, ndw) in _TOX_MODEL.items():
        logit = a + rw * risk + icw * ic + ccw * cc + ndw * nd
        if name == "asp":
            logit += 1.5 * asp_pre
        tox[name] = int(rng.random() < 1.0 / (1.0 + np.exp(-logit)))
    return OutcomeRecord(
        os_event=events["os"], os_months=times["os"],
        lrc_event=events["lrc"], lrc_months=times["lrc"],
        fdm_event=events["fdm"], fdm_months=times["fdm"],
        ft=tox["ft"], aspiration_post=tox["asp"],
    )


def _sample_features(seq_idx: int, rng: np.random.Generator) -> PatientFeatures:
    def col(key):
        return _MARGINALS[key][seq_idx] / 100.0

    hpv_pos, hpv_unk = col("hpv_pos"), col("hpv_unknown")
    u = rng.random()
    hpv = 1 if u < hpv_pos else (2 if u < hpv_pos + hpv_unk else 0)

    u = rng.random()
    smoking = 2 if u < col("smoker") else (1 if u < col("smoker") + col("former") else 0)
    if smoking == 0:
        pack = 0.0
    else:
        share = max(col("smoker") + col("former"), 1e-6)
        pack = float(abs(rng.normal(_MARGINALS["pack_years_mean"][seq_idx] / share, 9.0)))

    u = rng.random()
    white = col("white")
    if u < white:
        race = (0, 0, 0)
    else:
        v = (u - white) / max(1.0 - white, 1e-9)
        race = (1, 0, 0) if v < 0.5 else ((0, 1, 0) if v < 0.75 else (0, 0, 1))

    t_probs = np.array([col("t1"), col("t2"), col("t3"), col("t4")])
    t_stage = int(rng.choice(4, p=t_probs / t_probs.sum())) + 1
    n_rest = max(1.0 - col("n1") - col("n2") - col("n3"), 0.0)
    n_probs = np.array([n_rest, col("n1"), col("n2"), col("n3")])
    n_stage = int(rng.choice(4, p=n_probs / n_probs.sum()))
    a_rest = max(1.0 - col("ajcc2") - col("ajcc3") - col("ajcc4"), 0.0)
    a_probs = np.array([a_rest, col("ajcc2"), col("ajcc3"), col("ajcc4")])
    ajcc = int(rng.choice(4, p=a_probs / a_probs.sum())) + 1
    g_probs = np.array([col("grade1"), col("grade2"), col("grade3"), col("grade4")])
    grade = int(rng.choice(4, p=g_probs / g_probs.sum())) + 1
    s_rest = max(1.0 - col("sub_bot") - col("sub_gps") - col("sub_soft") - col("sub_tonsil"), 0.0)
    s_probs = np.array([col("sub_bot"), col("sub_tonsil"), col("sub_gps"),
                        col("sub_soft"), s_rest / 2.0, s_rest / 2.0])
    subsite = int(rng.choice(6, p=s_probs / s_probs.sum()))

    bilateral = int(rng.random() < col("bilateral"))
    ln = np.zeros(N_LYMPH_REGIONS, dtype=int)
    n_regions = (0, 1, 3, 5)[n_stage]
    if n_regions:
        w = _LN_WEIGHTS / _LN_WEIGHTS.sum()
        picked = rng.choice(7, size=min(n_regions, 7), replace=False, p=w)
        ln[picked] = 1
        if bilateral:
            contra = rng.choice(7, size=min(max(n_regions // 2, 1), 7),
                                replace=False, p=w)
            ln[7 + contra] = 1

    return PatientFeatures(
        age=float(np.clip(rng.normal(_MARGINALS["age_mean"][seq_idx], 8.5), 25.0, 90.0)),
        is_male=int(rng.random() < col("male")),
        race_black=race[0], race_hispanic=race[1], race_other=race[2],
        hpv=hpv, smoking_status=smoking, pack_years=round(pack, 1),
        lymph_node_regions=tuple(int(v) for v in ln),
        t_stage=t_stage, n_stage=n_stage, ajcc_stage=ajcc,
        pathological_grade=grade, subsite=subsite, bilateral=bilateral,
        total_dose=float(np.clip(rng.normal(_MARGINALS["dose_mean"][seq_idx], 2.0), 60.0, 75.0)),
        dose_fraction=float(np.clip(rng.normal(_MARGINALS["fraction_mean"][seq_idx], 0.06), 1.8, 2.4)),
        aspiration_pre=int(rng.random() < col("asp_pre")),
    )


def generate_synthetic_cohort(seed: int, n: int = 536) -> list[CohortRecord]:
    """Deterministic synthetic cohort calibrated to the published breakdown.

    Every treatment sequence gets a floor of two patients; the remainder is
    multinomial with the published sequence proportions. Transitions and
    outcomes follow the latent-risk model above, so treatment effects are
    known quantities for testing.
    """
    if n < 2 * len(SEQUENCE_NAMES):
        raise ConfigError(f"n={n} too small: need at least {2 * len(SEQUENCE_NAMES)} "
                          "(two per treatment sequence)")
    rng = np.random.default_rng(seed)
    props = np.array(SEQUENCE_COUNTS, dtype=float)
    props /= props.sum()
    counts = np.full(len(SEQUENCE_NAMES), 2) + rng.multinomial(n - 2 * len(SEQUENCE_NAMES), props)
    records = []
    for seq_idx, name in enumerate(SEQUENCE_NAMES):
        decisions = SEQUENCE_DECISIONS[name]
        for _ in range(counts[seq_idx]):
            feats = _sample_features(seq_idx, rng)
            risk = latent_risk(feats)
            post_ic, post_cc = _sample_transitions(seq_idx, decisions, risk, rng)
            outcomes = _sample_outcomes(decisions, risk, post_cc,
                                        feats.aspiration_pre, rng)
            records.append(CohortRecord(
                features=feats,
                sequence=TreatmentSequence(*decisions),
                post_ic=post_ic, post_cc=post_cc, outcomes=outcomes,
            ))
    order = rng.permutation(len(records))
    return [records[i] for i in order]


# ---------------------------------------------------------------------------
# Stratified split

_SPLIT_RATIO = (389, 147)

_BINARY_CHECKS = (
    [("ic", lambda r: r.sequence.ic), ("cc", lambda r: r.sequence.cc),
     ("nd", lambda r: r.sequence.nd),
     ("ft", lambda r: r.outcomes.ft), ("asp_post", lambda r: r.outcomes.aspiration_post),
     ("os_event", lambda r: r.outcomes.os_event),
     ("lrc_event", lambda r: r.outcomes.lrc_event),
     ("fdm_event", lambda r: r.outcomes.fdm_event)]
    + [(f"dlt1_{i + 1}", (lambda i: lambda r: r.post_ic.dlt[i])(i)) for i in range(5)]
    + [(f"dlt2_{i + 1}", (lambda i: lambda r: r.post_cc.dlt[i])(i)) for i in range(5)]
)

_MIN_POSITIVES = 3


def stratified_split(cohort: list[CohortRecord], seed: int):
    """Deterministic split in the 389:147 ratio with per-endpoint floors.

    Every treatment decision and every binary endpoint must keep at least
    three positive records in the training side; a greedy repair pass swaps
    eval positives into train when the random split falls short.
    """
    n = len(cohort)
    n_train = round(n * _SPLIT_RATIO[0] / sum(_SPLIT_RATIO))
    totals = {name: sum(fn(r) for r in cohort) for name, fn in _BINARY_CHECKS}
    infeasible = [name for name, c in totals.items() if c < _MIN_POSITIVES]
    if infeasible:
        raise CohortError("cannot keep >= 3 positive training records for: "
                          + ", ".join(f"{name} (only {totals[name]} in cohort)"
                                      for name in infeasible))

    rng = np.random.default_rng(seed)
    order = list(rng.permutation(n))
    train_ids = set(order[:n_train])

    def train_count(fn):
        return sum(fn(cohort[i]) for i in train_ids)

    for _ in range(10 * len(_BINARY_CHECKS)):
        deficits = [(name, fn) for name, fn in _BINARY_CHECKS
                    if train_count(fn) < _MIN_POSITIVES]
        if not deficits:
            break
        name, fn = deficits[0]
        donor = next(i for i in order if i not in train_ids and fn(cohort[i]))
        # evict the first train record whose removal breaks no floor
        for j in order:
            if j not in train_ids or fn(cohort[j]):
                continue
            safe = all(cnt_fn(cohort[j]) == 0 or train_count(cnt_fn) > _MIN_POSITIVES
                       for _, cnt_fn in _BINARY_CHECKS)
            if safe:
                train_ids.remove(j)
                train_ids.add(donor)
                break
        else:
            raise CohortError(f"split repair failed while fixing {name}")
    else:
        raise CohortError("split repair did not converge")

    train = [cohort[i] for i in order if i in train_ids]
    evaluation = [cohort[i] for i in order if i not in train_ids]
    return train, evaluation


# ---------------------------------------------------------------------------
# Feature encoding
#
# Baseline layout (38 slots):
#   [age, male, race(3), hpv(3), smoking, pack_years, ln(14),
#    t_stage, n_stage, ajcc, grade, subsite(6), bilateral,
#    total_dose, dose_fraction, asp_pre]
# State layout (66 slots) appends [ic, cc, post-IC block(13), post-CC block(13)];
# each transition block is [primary(4), nodal(4), dlt(5)].

BASELINE_GROUPS = (
    [("age", [0]), ("male", [1]), ("race", [2, 3, 4]), ("hpv", [5, 6, 7]),
     ("smoking", [8]), ("pack_years", [9])]
    + [(f"ln_{i:02d}", [10 + i - 1]) for i in range(1, 15)]
    + [("t_stage", [24]), ("n_stage", [25]), ("ajcc", [26]), ("grade", [27]),
       ("subsite", [28, 29, 30, 31, 32, 33]), ("bilateral", [34]),
       ("total_dose", [35]), ("dose_fraction", [36]), ("asp_pre", [37])]
)

STATE_GROUPS = tuple(BASELINE_GROUPS) + tuple(
    [("ic", [38]), ("cc", [39]),
     ("response_primary_ic", [40, 41, 42, 43]), ("response_nodal_ic", [44, 45, 46, 47])]
    + [(f"dlt_ic_{DLT_KINDS[i]}", [48 + i]) for i in range(5)]
    + [("response_primary_rt", [53, 54, 55, 56]), ("response_nodal_rt", [57, 58, 59, 60])]
    + [(f"dlt_rt_{DLT_KINDS[i]}", [61 + i]) for i in range(5)]
)

_ORDINAL_SCALES = {"smoking_status": 2.0, "t_stage": 4.0, "n_stage": 3.0,
                   "ajcc_stage": 4.0, "pathological_grade": 4.0}


def transition_block(state) -> np.ndarray:
    """13-slot encoding of a transition: one-hot responses + DLT flags.

    Accepts a TransitionState, a ready-made 13-vector of probabilities
    (expected-mode rollouts), or None (stage not reached -> zeros).
    """
    if state is None:
        return np.zeros(TRANSITION_WIDTH)
    if isinstance(state, TransitionState):
        block = np.zeros(TRANSITION_WIDTH)
        block[state.primary_response] = 1.0
        block[4 + state.nodal_response] = 1.0
        block[8:13] = state.dlt
        return block
    arr = np.asarray(state, dtype=np.float64)
    if arr.shape != (TRANSITION_WIDTH,):
        raise ConfigError(f"transition block must have {TRANSITION_WIDTH} slots, got {arr.shape}")
    return arr.copy()


class FeatureEncoder:
    """Maps patient features (plus optional stage context) to model inputs.

    Continuous slots are z-normalized with statistics frozen from the
    training split; everything downstream shares one encoder instance.
    """

    CONTINUOUS = ("age", "pack_years", "total_dose", "dose_fraction")

    def __init__(self):
        self.mean: dict[str, float] | None = None
        self.std: dict[str, float] | None = None

    def fit(self, train_records: list[CohortRecord]) -> "FeatureEncoder":
        if not train_records:
            raise ConfigError("cannot fit encoder on an empty training split")
        self.mean, self.std = {}, {}
        for name in self.CONTINUOUS:
            values = np.array([getattr(r.features, name) for r in train_records])
            self.mean[name] = float(values.mean())
            self.std[name] = float(max(values.std(), 1e-8))
        return self

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def _z(self, name: str, value: float) -> float:
        return (value - self.mean[name]) / self.std[name]

    def encode_baseline(self, p: PatientFeatures) -> np.ndarray:
        if not self.fitted:
            raise UsageError("encoder not fitted: normalization statistics missing")
        v = np.zeros(BASELINE_WIDTH)
        v[0] = self._z("age", p.age)
        v[1] = p.is_male
        v[2], v[3], v[4] = p.race_black, p.race_hispanic, p.race_other
        v[5 + p.hpv] = 1.0
        v[8] = p.smoking_status / _ORDINAL_SCALES["smoking_status"]
        v[9] = self._z("pack_years", p.pack_years)
        v[10:24] = p.lymph_node_regions
        v[24] = p.t_stage / _ORDINAL_SCALES["t_stage"]
        v[25] = p.n_stage / _ORDINAL_SCALES["n_stage"]
        v[26] = p.ajcc_stage / _ORDINAL_SCALES["ajcc_stage"]
        v[27] = p.pathological_grade / _ORDINAL_SCALES["pathological_grade"]
        v[28 + p.subsite] = 1.0
        v[34] = p.bilateral
        v[35] = self._z("total_dose", p.total_dose)
        v[36] = self._z("dose_fraction", p.dose_fraction)
        v[37] = p.aspiration_pre
        return v

    def encode_state(self, p: PatientFeatures, ic: float | None = None,
                     cc: float | None = None, post_ic=None, post_cc=None) -> np.ndarray:
        """Full 66-slot state; unreached stages stay zero."""
        v = np.zeros(STATE_WIDTH)
        v[:BASELINE_WIDTH] = self.encode_baseline(p)
        v[38] = 0.0 if ic is None else float(ic)
        v[39] = 0.0 if cc is None else float(cc)
        if post_ic is not None:
            v[40:53] = transition_block(post_ic)
        if post_cc is not None:
            v[53:66] = transition_block(post_cc)
        return v

    def encode_record_state(self, rec: CohortRecord, stage: int) -> np.ndarray:
        """State as seen just before the given decision stage (0=IC, 1=CC, 2=ND)."""
        if stage == 0:
            return self.encode_state(rec.features)
        if stage == 1:
            return self.encode_state(rec.features, ic=rec.sequence.ic,
                                     post_ic=rec.post_ic)
        if stage == 2:
            return self.encode_state(rec.features, ic=rec.sequence.ic,
                                     cc=rec.sequence.cc, post_ic=rec.post_ic,
                                     post_cc=rec.post_cc)
        raise ConfigError(f"stage {stage} outside 0..2")

    def stats_arrays(self) -> dict[str, np.ndarray]:
        if not self.fitted:
            raise UsageError("encoder not fitted")
        names = list(self.CONTINUOUS)
        return {
            "encoder.mean": np.array([self.mean[k] for k in names]),
            "encoder.std": np.array([self.std[k] for k in names]),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "FeatureEncoder":
        enc = cls()
        names = list(cls.CONTINUOUS)
        enc.mean = dict(zip(names, arrays["encoder.mean"].tolist()))
        enc.std = dict(zip(names, arrays["encoder.std"].tolist()))
        return enc


def resequence(rec: CohortRecord, sequence: TreatmentSequence) -> CohortRecord:
    """Copy of a record with a different treatment sequence (what-if input)."""
    return replace(rec, sequence=sequence)
