"""Similar-patient retrieval and matched-neighbor effect estimates.

Distances live in the policy model's per-stage embedding space. On top of
plain nearest-neighbor lookup this module offers:

- a propensity-caliper average-treatment-effect estimate over the retrieved
  pool, with automatic caliper widening until both arms are populated,
- the observed treatment rate among the closest few patients, and
- a Mahalanobis novelty percentile that flags queries far outside the
  training cohort.

All functions are read-only over a fitted model and its cohort; heavy
per-cohort arrays can be precomputed once with `build_stage_index` and
passed back in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as _la
from scipy import special as _sp

from .cohort import CohortError, CohortRecord, PatientFeatures
from .nn.autodiff import ConfigError, ShapeError, no_grad
from .policy import PolicyModel, stage_state


@dataclass(frozen=True)
class NeighborConfig:
    """Pool sizes and caliper settings for neighbor-based estimates.

    `k` is the retrieval pool for the treatment-effect estimate, `n` the
    smaller display subset used for treatment rates. The caliper starts at
    `alpha` standard deviations of the cohort's propensity logits and grows
    by `alpha_increment` until both matched arms reach `min_group` members.
    """

    k: int = 100
    n: int = 10
    alpha: float = 0.1
    alpha_increment: float = 0.1
    min_group: int = 5

    def __post_init__(self):
        if not 0 < self.n < self.k:
            raise ConfigError(f"need 0 < n < k, got n={self.n}, k={self.k}")
        if self.alpha <= 0 or self.alpha_increment <= 0:
            raise ConfigError("alpha and alpha_increment must be positive")
        if self.min_group < 1:
            raise ConfigError(f"min_group={self.min_group} must be >= 1")


@dataclass(frozen=True)
class AteEstimate:
    treated_rate: float
    untreated_rate: float
    difference: float
    caliper: float
    alpha: float
    treated_ids: tuple
    untreated_ids: tuple
    low_support: bool

    @property
    def group_sizes(self) -> tuple:
        return (len(self.treated_ids), len(self.untreated_ids))


@dataclass(frozen=True)
class TreatmentRate:
    rate: float
    member_ids: tuple


@dataclass(frozen=True)
class NoveltyRating:
    distance: float
    percentile: float
    trusted: bool


@dataclass(frozen=True)
class StageIndex:
    """Per-stage lookup arrays for one fitted policy model and cohort.

    Row order matches the cohort list; ids returned by the estimators index
    into it.
    """

    stage: int
    embeddings: np.ndarray
    logits: np.ndarray
    propensities: np.ndarray
    decisions: np.ndarray


def knn(query, embeddings, k: int) -> np.ndarray:
    """Ids of the k nearest cohort rows by Euclidean distance.

    Ties are broken by ascending id, so the result is independent of any
    reordering of equidistant rows.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64).ravel()
    if emb.ndim != 2:
        raise ShapeError(f"cohort embeddings must be 2-D, got shape {emb.shape}")
    if q.shape[0] != emb.shape[1]:
        raise ShapeError(f"query has {q.shape[0]} dims, cohort rows have {emb.shape[1]}")
    if not 1 <= k <= emb.shape[0]:
        raise ConfigError(f"k={k} outside [1, {emb.shape[0]}]")
    d = np.sqrt(((emb - q) ** 2).sum(axis=1))
    # stable sort keeps equidistant rows in ascending-id order
    return np.argsort(d, kind="stable")[:k]


def caliper_distance(propensities, alpha: float) -> float:
    """alpha times the population standard deviation of logit(p)."""
    if alpha <= 0:
        raise ConfigError(f"alpha={alpha} must be positive")
    p = np.asarray(propensities, dtype=np.float64).ravel()
    bad = (p <= 0.0) | (p >= 1.0)
    if bad.any():
        raise CohortError(f"{int(bad.sum())} propensities outside the open "
                          f"interval (0, 1), first offender {p[bad][0]}")
    return float(alpha * _sp.logit(p).std())


def build_stage_index(model: PolicyModel, records: list, stage: str) -> StageIndex:
    """Embed and score every cohort record at one decision stage."""
    from .policy import STAGES

    if stage not in STAGES:
        raise ConfigError(f"stage {stage!r} must be one of {STAGES}")
    s = STAGES.index(stage)
    states = np.stack([model.encoder.encode_record_state(r, s) for r in records])
    with no_grad():
        h = model.embed_states(states, s)
        logits = model.imitation(h).data[:, 0].copy()
    decisions = np.array([r.sequence.as_tuple()[s] for r in records], dtype=np.int64)
    return StageIndex(stage=s, embeddings=h.data.copy(), logits=logits,
                      propensities=_sp.expit(logits), decisions=decisions)


def _query_point(model, patient, stage, ctx, index, cohort):
    if index is None:
        index = build_stage_index(model, cohort, stage)
    if len(cohort) != index.embeddings.shape[0]:
        raise ShapeError(f"index covers {index.embeddings.shape[0]} rows, "
                         f"cohort has {len(cohort)}")
    s, state = stage_state(model, patient, stage, **ctx)
    if s != index.stage:
        raise ConfigError(f"index was built for stage {index.stage}, query is {s}")
    with no_grad():
        h = model.embed_states(state.reshape(1, -1), s)
        q_logit = float(model.imitation(h).data[0, 0])
    return index, h.data[0], q_logit


def estimate_ate(patient: PatientFeatures, cohort: list, model: PolicyModel,
                 outcome, *, stage: str = "ic",
                 config: NeighborConfig | None = None,
                 index: StageIndex | None = None,
                 ic=None, post_ic=None, cc=None, post_cc=None) -> AteEstimate:
    """Outcome-rate difference between matched treated and untreated neighbors.

    `outcome` maps a cohort record to its observed outcome (typically a 0/1
    flag). The k nearest neighbors are filtered to those whose propensity
    logit lies within the caliper of the query's; the caliper widens until
    both arms have `min_group` members or the whole pool is in. If an arm is
    still short at full k the estimate carries `low_support=True` and an
    undefined (NaN) rate for any empty arm.
    """
    cfg = config if config is not None else NeighborConfig()
    ctx = dict(ic=ic, post_ic=post_ic, cc=cc, post_cc=post_cc)
    index, q_emb, q_logit = _query_point(model, patient, stage, ctx, index, cohort)

    ids = knn(q_emb, index.embeddings, cfg.k)
    spread = float(index.logits.std())
    deltas = np.abs(index.logits[ids] - q_logit)
    alpha = cfg.alpha
    while True:
        cd = alpha * spread
        kept = ids[deltas <= cd]
        treated = kept[index.decisions[kept] == 1]
        untreated = kept[index.decisions[kept] == 0]
        if min(len(treated), len(untreated)) >= cfg.min_group:
            low = False
            break
        if len(kept) == len(ids) or spread == 0.0:
            low = True
            break
        # jump to the next caliper grid value that admits at least one new
        # neighbor; stepping one increment at a time is unbounded in practice
        # when the logit spread is vanishingly small
        gap = float(deltas[deltas > cd].min()) / spread - alpha
        alpha += max(1.0, np.ceil(gap / cfg.alpha_increment)) * cfg.alpha_increment

    def rate(group):
        if len(group) == 0:
            return float("nan")
        return float(np.mean([outcome(cohort[i]) for i in group]))

    t_rate, u_rate = rate(treated), rate(untreated)
    return AteEstimate(treated_rate=t_rate, untreated_rate=u_rate,
                       difference=t_rate - u_rate, caliper=cd, alpha=alpha,
                       treated_ids=tuple(int(i) for i in treated),
                       untreated_ids=tuple(int(i) for i in untreated),
                       low_support=low)


def neighbor_treatment_rate(patient: PatientFeatures, cohort: list,
                            model: PolicyModel, *, stage: str = "ic",
                            config: NeighborConfig | None = None,
                            index: StageIndex | None = None,
                            ic=None, post_ic=None, cc=None,
                            post_cc=None) -> TreatmentRate:
    """Fraction of the n nearest neighbors whose recorded decision was yes."""
    cfg = config if config is not None else NeighborConfig()
    ctx = dict(ic=ic, post_ic=post_ic, cc=cc, post_cc=post_cc)
    index, q_emb, _ = _query_point(model, patient, stage, ctx, index, cohort)
    ids = knn(q_emb, index.embeddings, cfg.n)
    return TreatmentRate(rate=float(index.decisions[ids].mean()),
                         member_ids=tuple(int(i) for i in ids))


def mahalanobis_percentile(patient_embedding, cohort_embeddings) -> NoveltyRating:
    """How unusual a patient embedding is relative to the cohort.

    Distance uses the cohort mean and shrinkage-regularized covariance
    (sigma + lambda I with lambda = 1e-3 trace(sigma)/d). The percentile is
    the fraction of cohort members strictly closer to the mean, times 100;
    at or below the 75th percentile the rating counts as trusted.
    """
    emb = np.asarray(cohort_embeddings, dtype=np.float64)
    q = np.asarray(patient_embedding, dtype=np.float64).ravel()
    if emb.ndim != 2:
        raise ShapeError(f"cohort embeddings must be 2-D, got shape {emb.shape}")
    if q.shape[0] != emb.shape[1]:
        raise ShapeError(f"query has {q.shape[0]} dims, cohort rows have {emb.shape[1]}")
    n, d = emb.shape
    if n < 2:
        raise CohortError(f"need at least 2 cohort rows, got {n}")
    mu = emb.mean(axis=0)
    centered = emb - mu
    sigma = centered.T @ centered / n
    lam = 1e-3 * np.trace(sigma) / d
    sigma = sigma + lam * np.eye(d)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise CohortError("cohort embedding covariance is singular even after "
                          "shrinkage; rows are degenerate") from None
    whitened = _la.solve_triangular(chol, centered.T, lower=True)
    cohort_d = np.sqrt((whitened ** 2).sum(axis=0))
    wq = _la.solve_triangular(chol, q - mu, lower=True)
    dist = float(np.sqrt((wq ** 2).sum()))
    percentile = float((cohort_d < dist).mean() * 100.0)
    return NoveltyRating(distance=dist, percentile=percentile,
                         trusted=percentile <= 75.0)
