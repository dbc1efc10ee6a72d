"""Metrics and structured performance reports for the trained models.

Binary and multiclass discrimination use the rank-statistic AUC with
half-credit for tied scores. Time-to-event endpoints are binarized at a
horizon: a record counts as an event if it occurred at or before the
horizon, counts as a survivor if it was followed at least to the horizon,
and is excluded if it was censored earlier. The exclusion changes the
denominator per horizon, so every horizon entry carries its evaluable
count. F1 for horizon metrics treats survival as the positive class;
with mostly-surviving cohorts the event class is far too small to anchor
an F1 score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cohort import DLT_KINDS, CohortError, CohortRecord, transition_block
from .nn.autodiff import ConfigError, ShapeError
from .simulator import ENDPOINTS, SimulatorModels, survival_curve

__all__ = [
    "HORIZONS",
    "BinaryMetrics",
    "MulticlassAuc",
    "HorizonMetrics",
    "MetricReport",
    "binary_metrics",
    "multiclass_auc",
    "horizon_metrics",
    "evaluate_simulator",
    "report_to_json",
    "report_to_text",
]

HORIZONS = (12, 24, 36, 48)


@dataclass(frozen=True)
class BinaryMetrics:
    """Discrimination and thresholded agreement for one binary output.

    ``auc`` is None when the labels contain a single class; accuracy and
    F1 are still computed at the 0.5 threshold.
    """

    auc: float | None
    accuracy: float
    f1: float


@dataclass(frozen=True)
class MulticlassAuc:
    """One-vs-rest AUC summaries plus the classes missing from the labels."""

    micro: float
    weighted: float
    absent_classes: tuple[int, ...]


@dataclass(frozen=True)
class HorizonMetrics:
    """Event discrimination at one follow-up horizon.

    ``n_evaluable`` counts records that were either observed to the
    horizon or had an earlier event; ``n_excluded`` counts records
    censored before it.
    """

    horizon: float
    auc: float | None
    f1: float
    n_evaluable: int
    n_excluded: int


@dataclass(frozen=True)
class MetricReport:
    """Held-out performance grouped the way the models are served.

    ``transitions`` maps stage -> output -> metric dict, ``toxicity``
    maps output -> metric dict, ``endpoints`` maps endpoint -> horizon
    -> metric dict.
    """

    transitions: dict
    toxicity: dict
    endpoints: dict
    n_records: int


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Mann-Whitney AUC with average ranks; None when one class is missing."""
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = stats.rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _f1(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = float(np.sum(pred & truth))
    fp = float(np.sum(pred & ~truth))
    fn = float(np.sum(~pred & truth))
    denom = 2.0 * tp + fp + fn
    # no true or predicted positives at all: define F1 as 0
    return 2.0 * tp / denom if denom > 0.0 else 0.0


def _check_scores_labels(scores: np.ndarray, labels: np.ndarray):
    if scores.ndim != 1 or labels.ndim != 1:
        raise ShapeError("scores and labels must be 1-D")
    if scores.shape[0] != labels.shape[0]:
        raise ShapeError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    if scores.size == 0:
        raise CohortError("no records to score")
    if not np.all(np.isfinite(scores)):
        raise CohortError("scores contain non-finite values")


def binary_metrics(scores, labels) -> BinaryMetrics:
    """Rank AUC plus accuracy and F1 at the 0.5 threshold.

    Tied scores get half credit in the AUC. Labels must be 0/1; the
    positive class for F1 is label 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    _check_scores_labels(scores, labels)
    if not np.isin(labels, (0, 1)).all():
        bad = labels[~np.isin(labels, (0, 1))][0]
        raise CohortError(f"labels must be 0/1, found {bad!r}")
    labels = labels.astype(np.int64)
    pred = scores >= 0.5
    truth = labels == 1
    return BinaryMetrics(
        auc=_rank_auc(scores, labels),
        accuracy=float(np.mean(pred == truth)),
        f1=_f1(pred, truth),
    )


def multiclass_auc(scores, labels) -> MulticlassAuc:
    """Micro and prevalence-weighted one-vs-rest AUC for a score matrix.

    Micro flattens the one-vs-rest indicator/score pairs of every class
    into one ranking. Weighted averages the per-class AUCs with class
    prevalence weights; classes absent from the labels contribute no
    weight and are listed in ``absent_classes``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2:
        raise ShapeError(f"score matrix must be 2-D, got {scores.ndim}-D")
    if labels.ndim != 1 or labels.shape[0] != scores.shape[0]:
        raise ShapeError(f"{scores.shape[0]} score rows vs {labels.shape} labels")
    n, c = scores.shape
    if c < 2:
        raise ShapeError(f"score matrix needs at least 2 columns, got {c}")
    if n == 0:
        raise CohortError("no records to score")
    if not np.all(np.isfinite(scores)):
        raise CohortError("scores contain non-finite values")
    labels = labels.astype(np.int64)
    if labels.min() < 0 or labels.max() >= c:
        raise CohortError(f"labels outside [0, {c}) for a {c}-column score matrix")
    present = np.unique(labels)
    if present.size < 2:
        raise CohortError("multiclass AUC needs at least 2 classes present, "
                          f"got {present.size}")

    onehot = np.zeros((n, c), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    micro = _rank_auc(scores.ravel(), onehot.ravel())

    weighted = 0.0
    absent = []
    for k in range(c):
        n_k = int(onehot[:, k].sum())
        if n_k == 0:
            absent.append(k)
            continue
        auc_k = _rank_auc(scores[:, k], onehot[:, k])
        # n_k == n is impossible here: >= 2 classes are present
        weighted += (n_k / n) * auc_k
    return MulticlassAuc(micro=float(micro), weighted=float(weighted),
                         absent_classes=tuple(absent))


def horizon_metrics(survival, records, horizon: float,
                    endpoint: str = "os") -> HorizonMetrics:
    """Binarize one time-to-event endpoint at a horizon and score it.

    ``survival`` holds each record's predicted S(horizon). The event
    label is 1 when the event occurred at or before the horizon; records
    censored strictly before the horizon are excluded. AUC ranks by risk
    (1 - S); F1 calls a record positive when it survives, predicted via
    S(horizon) >= 0.5.
    """
    if horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    if endpoint not in ENDPOINTS:
        raise ConfigError(f"endpoint {endpoint!r} must be one of {ENDPOINTS}")
    survival = np.asarray(survival, dtype=np.float64)
    if survival.ndim != 1:
        raise ShapeError("survival values must be 1-D")
    if survival.shape[0] != len(records):
        raise ShapeError(f"{survival.shape[0]} survival values vs "
                         f"{len(records)} records")
    events = np.array([getattr(r, f"{endpoint}_event") for r in records])
    months = np.array([getattr(r, f"{endpoint}_months") for r in records],
                      dtype=np.float64)

    keep = (events == 1) | (months >= horizon)
    n_excluded = int((~keep).sum())
    if not keep.any():
        raise CohortError(f"no records evaluable at horizon {horizon}; all are "
                          "censored earlier")
    s_h = survival[keep]
    event_by_h = ((events == 1) & (months <= horizon))[keep].astype(np.int64)

    pred_surv = s_h >= 0.5
    truth_surv = event_by_h == 0
    return HorizonMetrics(
        horizon=float(horizon),
        auc=_rank_auc(1.0 - s_h, event_by_h),
        f1=_f1(pred_surv, truth_surv),
        n_evaluable=int(keep.sum()),
        n_excluded=n_excluded,
    )


# ---------------------------------------------------------------------------
# Report assembly


def _binary_dict(scores, labels) -> dict:
    m = binary_metrics(scores, labels)
    return {"accuracy": m.accuracy, "auc": m.auc, "f1": m.f1}


def _response_dict(probs: np.ndarray, labels: np.ndarray) -> dict:
    m = multiclass_auc(probs, labels)
    out = {
        "accuracy": float(np.mean(probs.argmax(axis=1) == labels)),
        "auc_micro": m.micro,
        "auc_weighted": m.weighted,
    }
    if m.absent_classes:
        out["absent_classes"] = list(m.absent_classes)
    return out


def _stage_section(probs_primary, probs_nodal, dlt_probs, states) -> dict:
    section = {
        "primary_response": _response_dict(
            probs_primary, np.array([t.primary_response for t in states])),
        "nodal_response": _response_dict(
            probs_nodal, np.array([t.nodal_response for t in states])),
    }
    dlt_flags = np.array([t.dlt for t in states], dtype=np.int64)
    for j, kind in enumerate(DLT_KINDS):
        section[f"dlt_{kind}"] = _binary_dict(dlt_probs[:, j], dlt_flags[:, j])
    return section


def evaluate_simulator(models: SimulatorModels,
                       records: list[CohortRecord]) -> MetricReport:
    """Score every simulator output on held-out records.

    Post-induction metrics use only treated records: untreated ones are
    stable by construction, and scoring them would credit the constraint
    rather than the model. The concurrent stage has no such gate, so all
    records count there.
    """
    if not records:
        raise CohortError("no records to evaluate")
    enc = models.encoder
    base = np.stack([enc.encode_baseline(r.features) for r in records])
    ic = np.array([r.sequence.ic for r in records], dtype=np.float64)
    cc = np.array([r.sequence.cc for r in records], dtype=np.float64)
    nd = np.array([r.sequence.nd for r in records], dtype=np.float64)

    treated = ic == 1.0
    if not treated.any():
        raise CohortError("no induction-treated records; post-induction "
                          "outputs cannot be scored")
    p1, n1, d1 = models.post_ic.predict_batch(base[treated], ic[treated])
    after_ic = _stage_section(
        p1, n1, d1, [r.post_ic for r, t in zip(records, treated) if t])

    block1 = np.stack([transition_block(r.post_ic) for r in records])
    x2 = np.concatenate([base, ic[:, None], block1], axis=1)
    p2, n2, d2 = models.post_cc.predict_batch(x2, cc)
    after_cc = _stage_section(p2, n2, d2, [r.post_cc for r in records])

    block2 = np.stack([transition_block(r.post_cc) for r in records])
    x_out = np.concatenate([base, block1, block2], axis=1)
    dec = np.stack([ic, cc, nd], axis=1)
    tox = models.static.predict_batch(x_out, dec)
    toxicity = {
        "feeding_tube": _binary_dict(
            tox[:, 0], np.array([r.outcomes.ft for r in records])),
        "aspiration": _binary_dict(
            tox[:, 1], np.array([r.outcomes.aspiration_post for r in records])),
    }

    grid = np.asarray(HORIZONS, dtype=np.float64)
    mixtures = models.mixture.predict_params(x_out, dec)
    outcomes = [r.outcomes for r in records]
    endpoints = {}
    for e in ENDPOINTS:
        pi, mu, sig = mixtures[e]
        s_h = np.stack([survival_curve(pi[i], mu[i], sig[i], grid)
                        for i in range(len(records))])
        per_horizon = {}
        for j, h in enumerate(HORIZONS):
            hm = horizon_metrics(s_h[:, j], outcomes, h, endpoint=e)
            per_horizon[h] = {"auc": hm.auc, "f1": hm.f1,
                              "n_evaluable": hm.n_evaluable,
                              "n_excluded": hm.n_excluded}
        endpoints[e] = per_horizon

    return MetricReport(
        transitions={"after_induction": after_ic, "after_concurrent": after_cc},
        toxicity=toxicity,
        endpoints=endpoints,
        n_records=len(records),
    )


def report_to_json(report: MetricReport) -> str:
    payload = {
        "n_records": report.n_records,
        "transitions": report.transitions,
        "toxicity": report.toxicity,
        "endpoints": report.endpoints,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def _fmt(value) -> str:
    return "undefined" if value is None else f"{value:.3f}"


def report_to_text(report: MetricReport) -> str:
    """Fixed-width table: stage blocks, then toxicity, then horizon metrics."""
    lines = [f"evaluation on {report.n_records} records", ""]
    lines.append(f"{'state':<18} {'output':<24} {'metric':<14} value")
    lines.append("-" * 64)
    for stage, section in report.transitions.items():
        for output, metrics in section.items():
            for metric, value in metrics.items():
                if metric == "absent_classes":
                    continue
                lines.append(f"{stage:<18} {output:<24} {metric:<14} {_fmt(value)}")
    for output, metrics in report.toxicity.items():
        for metric, value in metrics.items():
            lines.append(f"{'after_treatment':<18} {output:<24} {metric:<14} "
                         f"{_fmt(value)}")
    lines.append("")
    lines.append(f"{'endpoint':<10} {'months':<8} {'metric':<8} {'value':<10} "
                 f"{'n':<6} excluded")
    lines.append("-" * 54)
    for endpoint, horizons in report.endpoints.items():
        for h, metrics in horizons.items():
            for metric in ("auc", "f1"):
                lines.append(
                    f"{endpoint:<10} {h:<8} {metric:<8} "
                    f"{_fmt(metrics[metric]):<10} {metrics['n_evaluable']:<6} "
                    f"{metrics['n_excluded']}")
    return "\n".join(lines)
