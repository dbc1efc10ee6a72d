"""Self-reported symptom trajectory forecasts from a separate rating cohort.

Patients rate ten symptoms on a 0-10 scale at four follow-up timepoints
(weeks 0, 7, 12, 27); many cells are missing. A small regression network
(one hidden layer of width 10, batch normalization, sigmoid outputs scaled
to the rating range) maps a reduced feature set to all forty ratings. The
network's value is less its point predictions than its embedding space:
forecasts shown to users are the individual and median trajectories of the
ten most similar treated and ten most similar untreated cohort members.

Group medians use the median rather than the mean (robust to the skewed,
integer-valued ratings), and symptoms are ordered by their final-timepoint
median so the longest-lasting burdens come first.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cohort import CohortError
from .neighbors import knn
from .nn.autodiff import ConfigError, Tensor, UsageError, no_grad, relu, sigmoid, sum_
from .nn.layers import BatchNorm1d, Linear, Module
from .simulator import _fit, _split_rows

SYMPTOMS = ("drymouth", "swallow", "taste", "pain", "fatigue",
            "mucus", "appetite", "voice", "choking", "sleep")
TIMEPOINTS_WEEKS = (0, 7, 12, 27)
N_RATINGS = len(SYMPTOMS) * len(TIMEPOINTS_WEEKS)

# is_male, 3 race flags, 3 hpv slots, pack_years, t, n, 6 subsite slots,
# bilateral, dose, fraction, ic, cc
FEATURE_WIDTH = 21
_CONTINUOUS = ("pack_years", "total_dose", "dose_fraction")


@dataclass
class SymptomFeatures:
    """Reduced covariate set collected alongside the symptom ratings."""

    is_male: int
    pack_years: float = 0.0
    hpv: int = 0
    total_dose: float = 69.0
    dose_fraction: float = 2.1
    race_black: int = 0
    race_hispanic: int = 0
    race_other: int = 0
    bilateral: int = 0
    subsite: int = 0
    t_stage: int = 1
    n_stage: int = 0
    ic: int = 0
    cc: int = 0

    def validate(self) -> list:
        problems = []
        flags = {"is_male": self.is_male, "race_black": self.race_black,
                 "race_hispanic": self.race_hispanic, "race_other": self.race_other,
                 "bilateral": self.bilateral, "ic": self.ic, "cc": self.cc}
        for name, v in flags.items():
            if v not in (0, 1):
                problems.append(f"{name}={v} not binary")
        ranges = {"hpv": (self.hpv, 0, 2), "t_stage": (self.t_stage, 1, 4),
                  "n_stage": (self.n_stage, 0, 3), "subsite": (self.subsite, 0, 5)}
        for name, (v, lo, hi) in ranges.items():
            if not lo <= v <= hi:
                problems.append(f"{name}={v} outside [{lo}, {hi}]")
        if self.pack_years < 0:
            problems.append(f"pack_years={self.pack_years} negative")
        if self.total_dose <= 0 or self.dose_fraction <= 0:
            problems.append("dose fields must be positive")
        return problems


@dataclass
class SymptomCohortRecord:
    """One rated patient: features plus a (symptoms x timepoints) grid.

    Ratings are floats in [0, 10]; NaN marks a missing cell.
    """

    features: SymptomFeatures
    ratings: np.ndarray

    def validate(self) -> list:
        problems = self.features.validate()
        r = np.asarray(self.ratings, dtype=np.float64)
        if r.shape != (len(SYMPTOMS), len(TIMEPOINTS_WEEKS)):
            problems.append(f"ratings grid has shape {r.shape}, "
                            f"need {(len(SYMPTOMS), len(TIMEPOINTS_WEEKS))}")
            return problems
        present = r[~np.isnan(r)]
        if present.size and (present.min() < 0 or present.max() > 10):
            problems.append("ratings outside [0, 10]")
        return problems


@dataclass(frozen=True)
class SymptomConfig:
    hidden: int = 10
    lr: float = 1e-2
    weight_decay: float = 1e-3
    max_epochs: int = 300
    patience: int = 10
    batch_size: int = 64
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.hidden < 1:
            raise ConfigError(f"hidden={self.hidden} must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction={self.val_fraction} outside (0, 1)")


@dataclass
class TrajectoryGroup:
    member_ids: tuple
    trajectories: np.ndarray
    medians: np.ndarray
    low_support: bool


@dataclass
class TrajectoryForecast:
    symptoms: tuple
    timepoints: tuple
    treated: TrajectoryGroup
    untreated: TrajectoryGroup


class SymptomModel(Module):
    """Width-10 regression net whose batch-normalized hidden layer doubles
    as the similarity embedding."""

    def __init__(self, config: SymptomConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.l1 = Linear(FEATURE_WIDTH, config.hidden, rng)
        self.bn = BatchNorm1d(config.hidden)
        self.out = Linear(config.hidden, N_RATINGS, rng)
        self.feat_mean = np.zeros(len(_CONTINUOUS))
        self.feat_std = np.ones(len(_CONTINUOUS))
        self.embeddings = np.zeros((0, config.hidden))
        self.cohort: list = []
        self.trained = False

    def encode(self, f: SymptomFeatures) -> np.ndarray:
        z = {name: (getattr(f, name) - self.feat_mean[i]) / self.feat_std[i]
             for i, name in enumerate(_CONTINUOUS)}
        v = np.zeros(FEATURE_WIDTH)
        v[0] = f.is_male
        v[1], v[2], v[3] = f.race_black, f.race_hispanic, f.race_other
        v[4 + f.hpv] = 1.0
        v[7] = z["pack_years"]
        v[8] = f.t_stage / 4.0
        v[9] = f.n_stage / 3.0
        v[10 + f.subsite] = 1.0
        v[16] = f.bilateral
        v[17] = z["total_dose"]
        v[18] = z["dose_fraction"]
        v[19] = f.ic
        v[20] = f.cc
        return v

    def embed(self, x: Tensor) -> Tensor:
        return self.bn(relu(self.l1(x)))

    def __call__(self, x: Tensor) -> Tensor:
        return sigmoid(self.out(self.embed(x))) * 10.0

    def embed_rows(self, rows: np.ndarray) -> np.ndarray:
        self.set_training(False)
        with no_grad():
            return self.embed(Tensor(np.atleast_2d(rows))).data.copy()

    def predict(self, f: SymptomFeatures) -> np.ndarray:
        """Predicted (symptoms x timepoints) rating grid, each in [0, 10]."""
        self.set_training(False)
        with no_grad():
            out = self(Tensor(self.encode(f).reshape(1, -1))).data
        return out.reshape(len(SYMPTOMS), len(TIMEPOINTS_WEEKS)).copy()

    def cache_cohort(self, records: list):
        """Attach the rating cohort and refresh its stored embeddings."""
        rows = np.stack([self.encode(r.features) for r in records])
        self.embeddings = self.embed_rows(rows)
        self.cohort = list(records)

    def load_state_arrays(self, arrays: dict):
        # embedding count depends on the attached cohort, so rebuild that
        # buffer instead of copying into the empty placeholder
        if "buffer.embeddings" in arrays:
            self.embeddings = np.array(arrays["buffer.embeddings"],
                                       dtype=np.float64)
        rest = {k: v for k, v in arrays.items() if k != "buffer.embeddings"}
        super().load_state_arrays(rest)


def _validated(records: list) -> np.ndarray:
    if not records:
        raise CohortError("symptom cohort is empty")
    problems = []
    for i, rec in enumerate(records):
        problems += [f"row {i}: {p}" for p in rec.validate()]
    if problems:
        raise CohortError(f"{len(problems)} invalid entries:\n  "
                          + "\n  ".join(problems))
    grid = np.stack([np.asarray(r.ratings, dtype=np.float64) for r in records])
    for s, name in enumerate(SYMPTOMS):
        if np.isnan(grid[:, s, :]).all():
            raise CohortError(f"symptom column {name!r} has no observed ratings")
    return grid


def fit_symptom_model(records: list, seed: int,
                      config: SymptomConfig | None = None) -> SymptomModel:
    """Train the rating regressor and cache cohort embeddings.

    The loss is mean squared error over the non-missing cells only; early
    stopping watches the same masked loss on a held-out split.
    """
    config = config if config is not None else SymptomConfig()
    grid = _validated(records)
    rng = np.random.default_rng(seed)
    init_rng, split_rng, fit_rng = rng.spawn(3)

    model = SymptomModel(config, init_rng)
    tr, va = _split_rows(len(records), config.val_fraction, split_rng)
    for i, name in enumerate(_CONTINUOUS):
        values = np.array([getattr(records[j].features, name) for j in tr])
        model.feat_mean[i] = float(values.mean())
        model.feat_std[i] = float(max(values.std(), 1e-8))

    rows = np.stack([model.encode(r.features) for r in records])
    mask = (~np.isnan(grid)).astype(np.float64).reshape(len(records), N_RATINGS)
    target = np.nan_to_num(grid, nan=0.0).reshape(len(records), N_RATINGS)

    def masked_mse(idx, training: bool):
        model.set_training(training)
        pred = model(Tensor(rows[idx]))
        m = Tensor(mask[idx])
        err = (pred - Tensor(target[idx])) * m
        return sum_(err * err) * (1.0 / max(mask[idx].sum(), 1.0))

    def batch_loss(idx, mrng):
        # idx addresses the training subset, not the full cohort
        return masked_mse(tr[idx], training=True)

    def val_loss():
        with no_grad():
            return masked_mse(va, training=False).item()

    _fit(model, batch_loss, val_loss, len(tr), config, fit_rng)
    model.set_training(False)
    model.cache_cohort(records)
    model.trained = True
    return model


def predict_trajectories(model: SymptomModel, features: SymptomFeatures,
                         treatment: str) -> TrajectoryForecast:
    """Median symptom courses of the most similar treated/untreated patients.

    `treatment` names the decision under study ("ic" or "cc"); the ten
    nearest cohort members that received it and the ten nearest that did not
    form the two groups. A group smaller than ten is returned whole with a
    low-support flag.
    """
    if treatment not in ("ic", "cc"):
        raise ConfigError(f"treatment {treatment!r} must be 'ic' or 'cc'")
    if not model.trained:
        raise UsageError("symptom model is untrained; call fit_symptom_model first")
    if len(model.cohort) != model.embeddings.shape[0]:
        raise UsageError("cohort embeddings are stale; call cache_cohort")

    q = model.embed_rows(model.encode(features))[0]
    flags = np.array([getattr(r.features, treatment) for r in model.cohort])
    grid = np.stack([np.asarray(r.ratings, dtype=np.float64)
                     for r in model.cohort])

    def group(flag_value):
        pool = np.where(flags == flag_value)[0]
        take = min(10, len(pool))
        if take:
            local = knn(q, model.embeddings[pool], take)
            ids = pool[local]
            traj = grid[ids]
        else:
            ids = np.array([], dtype=np.int64)
            traj = np.empty((0, len(SYMPTOMS), len(TIMEPOINTS_WEEKS)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN cells
            med = np.nanmedian(traj, axis=0) if take else np.full(
                (len(SYMPTOMS), len(TIMEPOINTS_WEEKS)), np.nan)
        return ids, traj, med

    t_ids, t_traj, t_med = group(1)
    u_ids, u_traj, u_med = group(0)

    pooled = np.concatenate([t_traj, u_traj], axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        final = (np.nanmedian(pooled[:, :, -1], axis=0) if len(pooled)
                 else np.full(len(SYMPTOMS), np.nan))
    order = np.argsort(-np.nan_to_num(final, nan=-1.0), kind="stable")

    def bundle(ids, traj, med):
        return TrajectoryGroup(member_ids=tuple(int(i) for i in ids),
                               trajectories=traj[:, order, :],
                               medians=med[order, :],
                               low_support=len(ids) < 10)

    return TrajectoryForecast(
        symptoms=tuple(SYMPTOMS[i] for i in order),
        timepoints=TIMEPOINTS_WEEKS,
        treated=bundle(t_ids, t_traj, t_med),
        untreated=bundle(u_ids, u_traj, u_med),
    )


# ---------------------------------------------------------------------------
# CSV serialization

SYMPTOM_COLUMNS = (
    ["male", "race_black", "race_hispanic", "race_other", "hpv", "pack_years",
     "t_stage", "n_stage", "subsite", "bilateral", "total_dose",
     "dose_fraction", "ic", "cc"]
    + [f"{sym}_w{week}" for sym in SYMPTOMS for week in TIMEPOINTS_WEEKS]
)


def save_symptom_csv(records: list, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SYMPTOM_COLUMNS)
        for rec in records:
            f = rec.features
            row = [str(f.is_male), str(f.race_black), str(f.race_hispanic),
                   str(f.race_other), str(f.hpv), repr(float(f.pack_years)),
                   str(f.t_stage), str(f.n_stage), str(f.subsite),
                   str(f.bilateral), repr(float(f.total_dose)),
                   repr(float(f.dose_fraction)), str(f.ic), str(f.cc)]
            for v in np.asarray(rec.ratings, dtype=np.float64).ravel():
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)


def load_symptom_csv(path) -> list:
    """Load and validate a symptom cohort; empty rating cells mean missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: empty file")
        missing = [c for c in SYMPTOM_COLUMNS if c not in header]
        if missing:
            raise CohortError(f"{path}: missing columns {missing}")
        index = {c: header.index(c) for c in SYMPTOM_COLUMNS}
        records, problems = [], []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                records.append(_row_to_symptom_record(
                    {c: row[index[c]] for c in SYMPTOM_COLUMNS}))
            except (ValueError, IndexError) as exc:
                problems.append(f"row {rownum}: {exc}")
        for rownum, rec in enumerate(records, start=1):
            problems += [f"row {rownum}: {p}" for p in rec.validate()]
        if problems:
            raise CohortError(f"{path}: {len(problems)} invalid entries:\n  "
                              + "\n  ".join(problems))
    return records


def _row_to_symptom_record(values: dict) -> SymptomCohortRecord:
    def f(col):
        return float(values[col])

    def i(col):
        v = float(values[col])
        if v != int(v):
            raise CohortError(f"column {col}: {values[col]} is not an integer")
        return int(v)

    features = SymptomFeatures(
        is_male=i("male"), race_black=i("race_black"),
        race_hispanic=i("race_hispanic"), race_other=i("race_other"),
        hpv=i("hpv"), pack_years=f("pack_years"), t_stage=i("t_stage"),
        n_stage=i("n_stage"), subsite=i("subsite"), bilateral=i("bilateral"),
        total_dose=f("total_dose"), dose_fraction=f("dose_fraction"),
        ic=i("ic"), cc=i("cc"),
    )
    ratings = np.full((len(SYMPTOMS), len(TIMEPOINTS_WEEKS)), np.nan)
    for s, sym in enumerate(SYMPTOMS):
        for t, week in enumerate(TIMEPOINTS_WEEKS):
            raw = values[f"{sym}_w{week}"].strip()
            if raw:
                ratings[s, t] = float(raw)
    return SymptomCohortRecord(features, ratings)


# ---------------------------------------------------------------------------
# Synthetic rating cohort
#
# Each symptom follows a documented latent rule: a per-symptom severity
# offset, an acute flare at weeks 7/12 that treatment intensifies, partial
# recovery by week 27, plus patient-level frailty and cell noise. Ratings
# are rounded to integers like real self-reports; ~8% of cells are missing.

_SYMPTOM_BASE = {
    "drymouth": (0.4, 1.1, 0.3), "swallow": (0.1, 0.9, 0.5),
    "taste": (0.2, 1.0, 0.2), "pain": (-0.2, 0.7, 0.4),
    "fatigue": (0.3, 0.8, 0.6), "mucus": (-0.1, 0.9, 0.3),
    "appetite": (-0.3, 0.6, 0.5), "voice": (-0.6, 0.5, 0.2),
    "choking": (-1.0, 0.4, 0.3), "sleep": (-0.4, 0.5, 0.4),
}
_TIME_SHIFT = (-1.2, 0.9, 0.3, -0.6)


def generate_symptom_cohort(seed: int, n: int = 937,
                            missing_rate: float = 0.08) -> list:
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n):
        t_stage = int(rng.integers(1, 5))
        n_stage = int(rng.integers(0, 4))
        z_stage = 0.8 * (t_stage - 2.5) + 0.6 * (n_stage - 1.5)
        ic = int(rng.random() < 1.0 / (1.0 + np.exp(-z_stage)))
        cc = int(rng.random() < 1.0 / (1.0 + np.exp(-(z_stage + 0.4))))
        race = rng.random()
        f = SymptomFeatures(
            is_male=int(rng.random() < 0.85),
            pack_years=float(0.0 if rng.random() < 0.4
                             else rng.gamma(2.0, 12.0)),
            hpv=int(rng.choice(3, p=(0.25, 0.15, 0.60))),
            total_dose=float(np.clip(rng.normal(69.0, 2.0), 60.0, 74.0)),
            dose_fraction=float(rng.uniform(2.0, 2.2)),
            race_black=int(race < 0.04),
            race_hispanic=int(0.04 <= race < 0.06),
            race_other=int(0.06 <= race < 0.09),
            bilateral=int(rng.random() < 0.05),
            subsite=int(rng.choice(6, p=(0.45, 0.25, 0.10, 0.08, 0.07, 0.05))),
            t_stage=t_stage,
            n_stage=n_stage,
            ic=ic,
            cc=cc,
        )
        frailty = rng.normal(0.0, 0.8)
        dose_term = 0.08 * (f.total_dose - 69.0)
        ratings = np.full((len(SYMPTOMS), len(TIMEPOINTS_WEEKS)), np.nan)
        for s, sym in enumerate(SYMPTOMS):
            base, cc_eff, ic_eff = _SYMPTOM_BASE[sym]
            for t in range(len(TIMEPOINTS_WEEKS)):
                acute = 1.0 if t in (1, 2) else 0.0
                z = (base + _TIME_SHIFT[t] + frailty + dose_term
                     + acute * (cc_eff * cc + ic_eff * ic)
                     + rng.normal(0.0, 0.4))
                if rng.random() >= missing_rate:
                    ratings[s, t] = float(np.round(10.0 / (1.0 + np.exp(-z))))
        records.append(SymptomCohortRecord(f, ratings))
    return records
