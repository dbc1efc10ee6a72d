"""Feature attribution by integrated gradients against a default patient.

Attributions are computed in probability units relative to a constructed
comparison patient (ordinal fields at their lowest rating, categoricals at
the training-cohort mode, continuous fields at the median, gender male).
The midpoint Riemann rule integrates the gradient along the straight path
from the default patient to the one under study; one-hot blocks are summed
into their named feature so the UI can show a single bar per input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import (
    N_LYMPH_REGIONS,
    STATE_GROUPS,
    CohortRecord,
    PatientFeatures,
)
from .nn.autodiff import ConfigError, ShapeError, Tensor, no_grad, sigmoid, sum_

__all__ = [
    "AttributionSet",
    "WaterfallRow",
    "aggregate_for_waterfall",
    "build_baseline_patient",
    "integrated_gradients",
    "policy_attribution",
]


def _mode(values) -> int:
    vals, counts = np.unique(np.asarray(values), return_counts=True)
    return int(vals[counts.argmax()])


def build_baseline_patient(records: list[CohortRecord]) -> PatientFeatures:
    """Comparison patient the attribution walk starts from.

    Ordinal ratings take their lowest possible value, categorical fields
    the cohort mode, continuous fields the cohort median; gender is male.
    """
    feats = [r.features for r in records]
    race_mode = _mode([4 * f.race_black + 2 * f.race_hispanic + f.race_other
                       for f in feats])
    patient = PatientFeatures(
        age=float(np.median([f.age for f in feats])),
        is_male=1,
        race_black=int(race_mode == 4),
        race_hispanic=int(race_mode == 2),
        race_other=int(race_mode == 1),
        hpv=_mode([f.hpv for f in feats]),
        smoking_status=0,
        pack_years=float(np.median([f.pack_years for f in feats])),
        lymph_node_regions=tuple(
            _mode([f.lymph_node_regions[i] for f in feats])
            for i in range(N_LYMPH_REGIONS)),
        t_stage=1,
        n_stage=0,
        ajcc_stage=1,
        pathological_grade=1,
        subsite=_mode([f.subsite for f in feats]),
        bilateral=_mode([f.bilateral for f in feats]),
        total_dose=float(np.median([f.total_dose for f in feats])),
        dose_fraction=float(np.median([f.dose_fraction for f in feats])),
        aspiration_pre=_mode([f.aspiration_pre for f in feats]),
    )
    problems = patient.validate()
    if problems:
        raise ConfigError(f"default patient invalid: {problems}")
    return patient


@dataclass
class AttributionSet:
    """Signed per-feature contributions plus the endpoint values they bridge."""

    contributions: dict
    baseline_value: float
    final_value: float
    threshold: float = 0.01

    def residual(self) -> float:
        """Completeness gap |sum(attr) - (f(x) - f(x'))|."""
        total = sum(self.contributions.values())
        return abs(total - (self.final_value - self.baseline_value))


def integrated_gradients(fn, x: np.ndarray, baseline: np.ndarray,
                         steps: int = 64, groups=None,
                         threshold: float = 0.01) -> AttributionSet:
    """Midpoint-rule path integral of grad fn from baseline to x.

    ``fn`` maps a (rows, width) Tensor to per-row values and must evaluate
    deterministically (no dropout). ``groups`` is a sequence of
    (name, slot indices) pairs that must partition the input slots;
    one-hot blocks are reported as their summed group.
    """
    if steps < 32:
        raise ConfigError(f"integrated gradients needs steps >= 32, got {steps}")
    x = np.asarray(x, dtype=np.float64).ravel()
    baseline = np.asarray(baseline, dtype=np.float64).ravel()
    if x.shape != baseline.shape:
        raise ShapeError(f"input width {x.shape[0]} != baseline width "
                         f"{baseline.shape[0]}")
    if groups is None:
        groups = tuple((f"slot_{i:02d}", [i]) for i in range(x.shape[0]))
    covered = sorted(i for _, idx in groups for i in idx)
    if covered != list(range(x.shape[0])):
        raise ConfigError("attribution groups must partition the input slots")

    diff = x - baseline
    alphas = (np.arange(steps) + 0.5) / steps
    points = Tensor(baseline[None, :] + alphas[:, None] * diff[None, :],
                    requires_grad=True, name="path")
    sum_(fn(points)).backward()
    avg_grad = points.grad.reshape(steps, -1).mean(axis=0)
    attr = diff * avg_grad

    with no_grad():
        ends = fn(Tensor(np.stack([baseline, x]))).data.ravel()
    contributions = {name: float(attr[list(idx)].sum()) for name, idx in groups}
    return AttributionSet(contributions, float(ends[0]), float(ends[1]),
                          threshold)


@dataclass
class WaterfallRow:
    name: str
    contribution: float
    cumulative: float


def aggregate_for_waterfall(attrs: AttributionSet,
                            threshold: float | None = None) -> list[WaterfallRow]:
    """Display rows: big movers sorted by signed value, the rest pooled.

    Each row's cumulative value is the running sum from the baseline
    probability, so the last row lands on baseline + sum(contributions).
    """
    thr = attrs.threshold if threshold is None else threshold
    kept = [(n, v) for n, v in attrs.contributions.items() if abs(v) >= thr]
    pooled = [v for _, v in attrs.contributions.items() if abs(v) < thr]
    kept.sort(key=lambda item: -item[1])
    rows = []
    running = attrs.baseline_value
    for name, value in kept:
        running += value
        rows.append(WaterfallRow(name, value, running))
    if pooled:
        running += sum(pooled)
        rows.append(WaterfallRow("other", sum(pooled), running))
    return rows


def policy_attribution(model, features: PatientFeatures, baseline: PatientFeatures,
                       stage: str, strategy: str = "imitation", *,
                       ic=None, post_ic=None, cc=None, post_cc=None,
                       steps: int = 64, threshold: float = 0.01) -> AttributionSet:
    """Why this patient's treatment probability differs from the default's.

    Both patients are placed in the same stage context, so decision and
    transition slots cancel and only baseline features carry attribution.
    """
    from .policy import stage_state  # local import keeps module load cheap

    if strategy not in ("imitation", "optimal"):
        raise ConfigError(f"strategy {strategy!r} must be 'imitation' or 'optimal'")
    ctx = dict(ic=ic, cc=cc, post_ic=post_ic, post_cc=post_cc)
    s, x = stage_state(model, features, stage, **ctx)
    _, x0 = stage_state(model, baseline, stage, **ctx)
    head = model.imitation if strategy == "imitation" else model.optimal

    def fn(points: Tensor) -> Tensor:
        return sigmoid(head(model.embed_states(points, s)))

    return integrated_gradients(fn, x, x0, steps=steps, groups=STATE_GROUPS,
                                threshold=threshold)
