"""HTTP decision-support service over a trained runtime.

Endpoints:
  GET  /api/health      liveness plus whether a model is loaded
  GET  /api/schema      feature metadata the input panel is built from
  GET  /api/model-info  provenance, limitations, and model shapes
  POST /api/simulate    full what-if simulation for one patient

A simulate request names one decision under study. The response carries
two arms (decision taken / not taken); every other decision comes from
the user's fixed map or, when absent, from the selected policy head.
Each arm bundles expected transition distributions, toxicity risks and
survival curves with MC-dropout confidence envelopes on a shared 0-60
month grid. Alongside the twin's view the response reports the matched
neighbors' view: observed outcome rates, feature summaries, and
Kaplan-Meier curves of the caliper-matched treated/untreated groups,
plus novelty and attribution for the policy probability. Requests may pin an RNG seed so repeated
identical calls return identical envelopes.
"""

from __future__ import annotations

import threading
import time
from dataclasses import asdict
from typing import Any, Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import __version__
from .cohort import (
    DLT_KINDS,
    N_LYMPH_REGIONS,
    RESPONSE_LEVELS,
    SUBSITES,
    PatientFeatures,
    TransitionState,
    transition_block,
)
from .evaluation import HORIZONS
from .explain import aggregate_for_waterfall, policy_attribution
from .neighbors import NeighborConfig, estimate_ate, mahalanobis_percentile, \
    neighbor_treatment_rate
from .pipeline import TwinRuntime
from .policy import STAGES, predict_policy
from .simulator import ENDPOINTS, predict_with_ci, survival_curve
from .symptoms import SYMPTOMS, TIMEPOINTS_WEEKS, SymptomFeatures, \
    predict_trajectories

__all__ = ["SimulateRequest", "RequestError", "handle_simulate", "create_app",
           "MONTHS", "schema_payload", "model_info_payload", "kaplan_meier"]

MONTHS = tuple(range(61))
_CURVE_GRID = np.arange(1.0, 61.0)
_ATTRIBUTION_STEPS = 256

DECISION_LABELS = {"ic": "induction chemotherapy",
                   "cc": "concurrent chemotherapy",
                   "nd": "neck dissection"}


class RequestError(ValueError):
    """Invalid request content; carries field-level problem strings."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class TransitionStateIn(BaseModel):
    primary_response: int = Field(ge=0, le=3)
    nodal_response: int = Field(ge=0, le=3)
    dlt: list[int] = Field(default_factory=lambda: [0] * 5,
                           min_length=5, max_length=5)


class SimulateRequest(BaseModel):
    """Body of POST /api/simulate."""

    features: dict[str, Any]
    decision: Literal["ic", "cc", "nd"] = "cc"
    strategy: Literal["imitation", "optimal"] = "imitation"
    fixed: dict[Literal["ic", "cc", "nd"], int] = Field(default_factory=dict)
    post_ic_state: TransitionStateIn | None = None
    ci_level: float = Field(default=0.95, gt=0.0, lt=1.0)
    mc_samples: int = Field(default=20, ge=20, le=200)
    seed: int | None = None
    debug: bool = False


def _features_from_payload(payload: dict) -> PatientFeatures:
    data = dict(payload)
    if isinstance(data.get("lymph_node_regions"), list):
        data["lymph_node_regions"] = tuple(data["lymph_node_regions"])
    try:
        features = PatientFeatures(**data)
    except TypeError as exc:
        raise RequestError([f"features: {exc}"])
    problems = features.validate()
    if problems:
        raise RequestError([f"features: {p}" for p in problems])
    return features


def _num(x) -> float | None:
    x = float(x)
    return None if np.isnan(x) else x


def _grid_list(curve: np.ndarray) -> list[float]:
    """Prepend the month-0 point (everyone at risk) to a 60-month curve."""
    return [1.0] + [float(v) for v in curve]


def kaplan_meier(months, events, grid=None) -> np.ndarray:
    """Product-limit survival estimate sampled on a month grid."""
    months = np.asarray(months, dtype=np.float64)
    events = np.asarray(events, dtype=np.int64)
    grid = _CURVE_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    event_times = np.unique(months[events == 1])
    factors = [(t, 1.0 - ((months == t) & (events == 1)).sum()
                / max((months >= t).sum(), 1))
               for t in event_times]
    out = np.ones(grid.shape[0])
    for i, g in enumerate(grid):
        s = 1.0
        for t, f in factors:
            if t <= g:
                s *= f
        out[i] = s
    return out


# ---------------------------------------------------------------------------
# Simulation


def _policy_vote(runtime: TwinRuntime, features: PatientFeatures, stage: str,
                 strategy: str, ctx: dict) -> int:
    out = predict_policy(runtime.policy, features, stage, strategy, **ctx)
    return int(out.probability >= 0.5)


def _resolve_arm(runtime: TwinRuntime, features: PatientFeatures,
                 base: np.ndarray, decision: str, strategy: str,
                 fixed: dict, user_block: np.ndarray | None,
                 arm_value: int) -> dict:
    """Walk the three stages for one arm of the studied decision.

    Returns the concrete sequence, where each value came from, and the
    expected transition blocks feeding the outcome models.
    """
    models = runtime.simulator
    seq: dict[str, int] = {}
    sources: dict[str, str] = {}

    def resolve(stage: str, ctx: dict):
        if stage == decision:
            seq[stage] = arm_value
            sources[stage] = "under-study"
        elif stage in fixed:
            seq[stage] = int(fixed[stage])
            sources[stage] = "user"
        else:
            seq[stage] = _policy_vote(runtime, features, stage, strategy, ctx)
            sources[stage] = strategy

    resolve("ic", {})
    if user_block is not None:
        block1 = user_block
    else:
        p1, n1, d1 = models.post_ic.predict_batch(
            base[None, :], np.array([float(seq["ic"])]))
        block1 = np.concatenate([p1[0], n1[0], d1[0]])

    resolve("cc", {"ic": seq["ic"], "post_ic": block1})
    x2 = np.concatenate([base, [float(seq["ic"])], block1])
    p2, n2, d2 = models.post_cc.predict_batch(
        x2[None, :], np.array([float(seq["cc"])]))
    block2 = np.concatenate([p2[0], n2[0], d2[0]])

    resolve("nd", {"ic": seq["ic"], "cc": seq["cc"],
                   "post_ic": block1, "post_cc": block2})
    return {"sequence": seq, "sources": sources,
            "block1": block1, "block2": block2}


def _arm_outcome_inputs(base: np.ndarray, arm: dict) -> tuple[np.ndarray, np.ndarray]:
    x_out = np.concatenate([base, arm["block1"], arm["block2"]])[None, :]
    seq = arm["sequence"]
    dec = np.array([[float(seq["ic"]), float(seq["cc"]), float(seq["nd"])]])
    return x_out, dec


def _arm_payload(runtime: TwinRuntime, base: np.ndarray, arm: dict,
                 user_block: np.ndarray | None, ci_level: float,
                 mc_samples: int, rng: np.random.Generator) -> dict:
    """Expected predictions for one arm, with MC-dropout envelopes."""
    models = runtime.simulator
    seq = arm["sequence"]
    x_out, dec = _arm_outcome_inputs(base, arm)

    tox = models.static.predict_batch(x_out, dec)[0]
    params = models.mixture.predict_params(x_out, dec)
    point_curves = {e: survival_curve(*(p[0] for p in params[e]), _CURVE_GRID)
                    for e in ENDPOINTS}

    n_grid = _CURVE_GRID.shape[0]

    def sample(mask_rng):
        if user_block is not None:
            b1 = user_block
        else:
            p1, n1, d1 = models.post_ic.predict_batch(
                base[None, :], np.array([float(seq["ic"])]), mask_rng)
            b1 = np.concatenate([p1[0], n1[0], d1[0]])
        x2 = np.concatenate([base, [float(seq["ic"])], b1])
        p2, n2, d2 = models.post_cc.predict_batch(
            x2[None, :], np.array([float(seq["cc"])]), mask_rng)
        b2 = np.concatenate([p2[0], n2[0], d2[0]])
        x = np.concatenate([base, b1, b2])[None, :]
        t = models.static.predict_batch(x, dec, mask_rng)[0]
        mix = models.mixture.predict_params(x, dec, mask_rng)
        curves = [survival_curve(*(p[0] for p in mix[e]), _CURVE_GRID)
                  for e in ENDPOINTS]
        return np.concatenate(curves + [t])

    ci = predict_with_ci(sample, samples=mc_samples, level=ci_level, rng=rng)

    curves = {}
    for j, e in enumerate(ENDPOINTS):
        sl = slice(j * n_grid, (j + 1) * n_grid)
        point = point_curves[e]
        curves[e] = {
            "survival": _grid_list(point),
            "lower": _grid_list(np.minimum(ci.lower[sl], point)),
            "upper": _grid_list(np.maximum(ci.upper[sl], point)),
        }

    toxicity = {}
    for j, name in enumerate(("feeding_tube", "aspiration")):
        p = float(tox[j])
        toxicity[name] = {
            "probability": p,
            "lower": float(min(ci.lower[3 * n_grid + j], p)),
            "upper": float(max(ci.upper[3 * n_grid + j], p)),
        }

    def dist(block):
        return {"primary": [float(v) for v in block[:4]],
                "nodal": [float(v) for v in block[4:8]],
                "dlt": [float(v) for v in block[8:13]]}

    return {
        "sequence": dict(seq),
        "transitions": {"post_ic": dist(arm["block1"]),
                        "post_cc": dist(arm["block2"])},
        "toxicity": toxicity,
        "curves": curves,
    }


def _policy_context(decision: str, treated_arm: dict) -> dict:
    """Stage context for the studied decision; upstream of it, the arms agree."""
    seq, b1, b2 = (treated_arm["sequence"], treated_arm["block1"],
                   treated_arm["block2"])
    if decision == "ic":
        return {}
    if decision == "cc":
        return {"ic": seq["ic"], "post_ic": b1}
    return {"ic": seq["ic"], "cc": seq["cc"], "post_ic": b1, "post_cc": b2}


def _policy_section(runtime: TwinRuntime, features: PatientFeatures,
                    decision: str, strategy: str, ctx: dict) -> dict:
    out = predict_policy(runtime.policy, features, decision, strategy, **ctx)
    index = runtime.indexes[decision]
    novelty = mahalanobis_percentile(out.embedding, index.embeddings)

    cfg = _neighbor_config(len(runtime.records))
    rate = neighbor_treatment_rate(features, runtime.records, runtime.policy,
                                   stage=decision, config=cfg, index=index,
                                   **ctx)
    attrs = policy_attribution(runtime.policy, features, runtime.baseline,
                               decision, strategy,
                               steps=_ATTRIBUTION_STEPS, **ctx)
    waterfall = [{"name": r.name, "contribution": float(r.contribution),
                  "cumulative": float(r.cumulative)}
                 for r in aggregate_for_waterfall(attrs)]
    return {
        "stage": decision,
        "strategy": strategy,
        "probability": out.probability,
        "novelty": {"distance": float(novelty.distance),
                    "percentile": float(novelty.percentile),
                    "trusted": bool(novelty.trusted)},
        "neighbor_rate": {"rate": float(rate.rate),
                          "members": list(rate.member_ids)},
        "attribution": {
            "baseline_probability": attrs.baseline_value,
            "final_probability": attrs.final_value,
            "contributions": {k: float(v)
                              for k, v in attrs.contributions.items()},
            "residual": attrs.residual(),
            "waterfall": waterfall,
        },
    }


def _neighbor_config(n_rows: int) -> NeighborConfig:
    k = min(100, n_rows)
    return NeighborConfig(k=k, n=max(1, min(10, k - 1)))


_PROFILE_MEANS = ("age", "is_male", "race_black", "race_hispanic", "race_other",
                  "hpv", "smoking_status", "pack_years", "t_stage", "n_stage",
                  "ajcc_stage", "pathological_grade", "bilateral", "total_dose",
                  "dose_fraction", "aspiration_pre")
_PROFILE_MEMBER_ROWS = 6


def _patient_profile(record) -> dict:
    f, dlt1, dlt2 = record.features, record.post_ic.dlt, record.post_cc.dlt
    out = {name: float(getattr(f, name)) for name in _PROFILE_MEANS}
    out["lymph_node_rates"] = [float(v) for v in f.lymph_node_regions]
    out["subsite_rates"] = [1.0 if i == f.subsite else 0.0
                            for i in range(len(SUBSITES))]
    # a kind counts once per patient even when it recurs across cycles
    out["dlt_rates"] = [float(max(a, b)) for a, b in zip(dlt1, dlt2)]
    return out


def _group_profile(records: list, ids: tuple) -> dict | None:
    """Feature summary of one matched group: means plus the nearest rows."""
    if not ids:
        return None
    rows = [_patient_profile(records[i]) for i in ids]

    def mean(key):
        return np.mean([r[key] for r in rows], axis=0)

    profile = {name: float(mean(name)) for name in _PROFILE_MEANS}
    for key in ("lymph_node_rates", "subsite_rates", "dlt_rates"):
        profile[key] = [float(v) for v in mean(key)]
    profile["n"] = len(ids)
    profile["members"] = [dict(rows[j], id=int(ids[j]))
                          for j in range(min(_PROFILE_MEMBER_ROWS, len(ids)))]
    return profile


def _neighbor_section(runtime: TwinRuntime, features: PatientFeatures,
                      decision: str, ctx: dict) -> tuple[dict, dict]:
    """Matched-group rates and KM curves; also the neighbor risk columns."""
    cfg = _neighbor_config(len(runtime.records))
    index = runtime.indexes[decision]
    estimates = {
        "feeding_tube": estimate_ate(
            features, runtime.records, runtime.policy,
            lambda r: r.outcomes.ft, stage=decision, config=cfg,
            index=index, **ctx),
        "aspiration": estimate_ate(
            features, runtime.records, runtime.policy,
            lambda r: r.outcomes.aspiration_post, stage=decision, config=cfg,
            index=index, **ctx),
    }
    first = estimates["feeding_tube"]

    km = {}
    for e in ENDPOINTS:
        km[e] = {}
        for label, ids in (("treated", first.treated_ids),
                           ("untreated", first.untreated_ids)):
            if not ids:
                km[e][label] = None
                continue
            months = [getattr(runtime.records[i].outcomes, f"{e}_months")
                      for i in ids]
            events = [getattr(runtime.records[i].outcomes, f"{e}_event")
                      for i in ids]
            km[e][label] = _grid_list(kaplan_meier(months, events))

    ate = {name: {"treated_rate": _num(est.treated_rate),
                  "untreated_rate": _num(est.untreated_rate),
                  "difference": _num(est.difference)}
           for name, est in estimates.items()}
    section = {
        "alpha": float(first.alpha),
        "caliper": float(first.caliper),
        "low_support": bool(first.low_support),
        "group_sizes": {"treated": len(first.treated_ids),
                        "untreated": len(first.untreated_ids)},
        "treated_ids": list(first.treated_ids),
        "untreated_ids": list(first.untreated_ids),
        "profiles": {
            "treated": _group_profile(runtime.records, first.treated_ids),
            "untreated": _group_profile(runtime.records, first.untreated_ids),
        },
        "ate": ate,
        "km": km,
    }
    return section, estimates


def _debug_section(runtime: TwinRuntime, features: PatientFeatures,
                   decision: str, strategy: str, ctx: dict) -> dict:
    """Development aid: the stage cohort in its top two embedding PCs."""
    out = predict_policy(runtime.policy, features, decision, strategy, **ctx)
    index = runtime.indexes[decision]
    mu = index.embeddings.mean(axis=0)
    _, _, vt = np.linalg.svd(index.embeddings - mu, full_matrices=False)
    axes = vt[:2]
    pcs = (index.embeddings - mu) @ axes.T
    query = (out.embedding - mu) @ axes.T
    propensities = 1.0 / (1.0 + np.exp(-index.logits))
    return {
        "cohort": [[float(x), float(y)] for x, y in pcs],
        "query": [float(query[0]), float(query[1])],
        "decisions": [int(d) for d in index.decisions],
        "propensities": [float(p) for p in propensities],
    }


def _symptom_section(runtime: TwinRuntime, features: PatientFeatures,
                     decision: str, treated_seq: dict) -> dict:
    treatment = "ic" if decision == "ic" else "cc"
    sf = SymptomFeatures(
        is_male=features.is_male, pack_years=features.pack_years,
        hpv=features.hpv, total_dose=features.total_dose,
        dose_fraction=features.dose_fraction, race_black=features.race_black,
        race_hispanic=features.race_hispanic, race_other=features.race_other,
        bilateral=features.bilateral, subsite=features.subsite,
        t_stage=features.t_stage, n_stage=features.n_stage,
        ic=treated_seq["ic"], cc=treated_seq["cc"])
    forecast = predict_trajectories(runtime.symptoms, sf, treatment)

    def med_rows(values: np.ndarray) -> list:
        return [[_num(v) for v in row] for row in values]

    def group(g):
        return {
            "members": list(g.member_ids),
            "low_support": bool(g.low_support),
            "medians": med_rows(g.medians),
            "trajectories": [med_rows(t) for t in g.trajectories],
        }

    return {
        "treatment": treatment,
        "symptoms": list(forecast.symptoms),
        "timepoint_weeks": list(forecast.timepoints),
        "treated": group(forecast.treated),
        "untreated": group(forecast.untreated),
    }


def handle_simulate(request: SimulateRequest, runtime: TwinRuntime) -> dict:
    """Run the full what-if simulation; pure apart from the request RNG."""
    t_start = time.perf_counter()
    timing: dict[str, float] = {}
    features = _features_from_payload(request.features)

    for stage, value in request.fixed.items():
        if value not in (0, 1):
            raise RequestError([f"fixed decision {stage!r} must be 0 or 1, "
                                f"got {value}"])
    user_block = None
    if request.post_ic_state is not None:
        ts = TransitionState(request.post_ic_state.primary_response,
                             request.post_ic_state.nodal_response,
                             tuple(request.post_ic_state.dlt))
        problems = ts.validate("post_ic_state: ")
        if problems:
            raise RequestError(problems)
        user_block = transition_block(ts)

    base = runtime.simulator.encoder.encode_baseline(features)
    rng = (np.random.default_rng(request.seed) if request.seed is not None
           else np.random.default_rng())
    rng_treated, rng_untreated = rng.spawn(2)

    t0 = time.perf_counter()
    arm_t = _resolve_arm(runtime, features, base, request.decision,
                         request.strategy, request.fixed, user_block, 1)
    arm_u = _resolve_arm(runtime, features, base, request.decision,
                         request.strategy, request.fixed, user_block, 0)
    arms = {
        "treated": _arm_payload(runtime, base, arm_t, user_block,
                                request.ci_level, request.mc_samples,
                                rng_treated),
        "untreated": _arm_payload(runtime, base, arm_u, user_block,
                                  request.ci_level, request.mc_samples,
                                  rng_untreated),
    }
    timing["rollout_ms"] = (time.perf_counter() - t0) * 1e3

    ctx = _policy_context(request.decision, arm_t)
    t0 = time.perf_counter()
    policy = _policy_section(runtime, features, request.decision,
                             request.strategy, ctx)
    timing["policy_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    neighbors, estimates = _neighbor_section(runtime, features,
                                             request.decision, ctx)
    timing["neighbors_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    symptoms = _symptom_section(runtime, features, request.decision,
                                arm_t["sequence"])
    timing["symptoms_ms"] = (time.perf_counter() - t0) * 1e3

    risk_table = {}
    for name in ("feeding_tube", "aspiration"):
        est = estimates[name]
        risk_table[name] = {
            "twin_treated": arms["treated"]["toxicity"][name]["probability"],
            "twin_untreated": arms["untreated"]["toxicity"][name]["probability"],
            "neighbor_treated": _num(est.treated_rate),
            "neighbor_untreated": _num(est.untreated_rate),
        }

    debug = None
    if request.debug:
        debug = _debug_section(runtime, features, request.decision,
                               request.strategy, ctx)

    timing["total_ms"] = (time.perf_counter() - t_start) * 1e3
    return {
        "decision": request.decision,
        "decision_label": DECISION_LABELS[request.decision],
        "strategy": request.strategy,
        "months": list(MONTHS),
        "decision_sources": arm_t["sources"],
        "arms": arms,
        "policy": policy,
        "neighbors": neighbors,
        "risk_table": risk_table,
        "symptoms": symptoms,
        "ci_level": request.ci_level,
        "mc_samples": request.mc_samples,
        "seed": request.seed,
        "debug": debug,
        "timing": timing,
    }


# ---------------------------------------------------------------------------
# Metadata endpoints


_FEATURE_SPECS = (
    ("age", "continuous", {"min": 1.0}),
    ("is_male", "binary", {}),
    ("race_black", "binary", {"group": "race"}),
    ("race_hispanic", "binary", {"group": "race"}),
    ("race_other", "binary", {"group": "race"}),
    ("hpv", "ordinal", {"min": 0, "max": 2}),
    ("smoking_status", "ordinal", {"min": 0, "max": 2}),
    ("pack_years", "continuous", {"min": 0.0}),
    ("lymph_node_regions", "flags", {"count": N_LYMPH_REGIONS}),
    ("t_stage", "ordinal", {"min": 1, "max": 4}),
    ("n_stage", "ordinal", {"min": 0, "max": 3}),
    ("ajcc_stage", "ordinal", {"min": 1, "max": 4}),
    ("pathological_grade", "ordinal", {"min": 1, "max": 4}),
    ("subsite", "category", {"labels": list(SUBSITES)}),
    ("bilateral", "binary", {}),
    ("total_dose", "continuous", {"min": 0.0}),
    ("dose_fraction", "continuous", {"min": 0.0}),
    ("aspiration_pre", "binary", {}),
)


def schema_payload(runtime: TwinRuntime) -> dict:
    defaults = asdict(runtime.baseline)
    defaults["lymph_node_regions"] = list(defaults["lymph_node_regions"])
    features = []
    for name, kind, extra in _FEATURE_SPECS:
        entry = {"name": name, "kind": kind, "default": defaults[name]}
        entry.update(extra)
        features.append(entry)
    return {
        "version": 1,
        "features": features,
        "decisions": list(STAGES),
        "decision_labels": DECISION_LABELS,
        "strategies": ["imitation", "optimal"],
        "response_levels": list(RESPONSE_LEVELS),
        "dlt_kinds": list(DLT_KINDS),
        "subsites": list(SUBSITES),
        "symptoms": list(SYMPTOMS),
        "symptom_timepoint_weeks": list(TIMEPOINTS_WEEKS),
        "months": list(MONTHS),
        "horizons": list(HORIZONS),
        "novelty_threshold_percentile": 75.0,
    }


def _param_count(model) -> int:
    return int(sum(p.data.size for p in model.parameters()))


def model_info_payload(runtime: TwinRuntime) -> dict:
    sim = runtime.simulator
    return {
        "package_version": __version__,
        "bundle": {
            "seed": runtime.seed,
            "digest": runtime.digest,
            "n_records": len(runtime.records),
            "n_symptom_records": len(runtime.symptoms.cohort),
        },
        "models": {
            "transition_post_ic": {"parameters": _param_count(sim.post_ic)},
            "transition_post_cc": {"parameters": _param_count(sim.post_cc)},
            "static_toxicity": {"parameters": _param_count(sim.static)},
            "survival_mixture": {"parameters": _param_count(sim.mixture)},
            "policy": {"parameters": _param_count(runtime.policy)},
            "symptoms": {"parameters": _param_count(runtime.symptoms)},
        },
        "provenance": (
            "All models in this bundle were trained on a synthetic cohort "
            "generated by this package; no real patient data is included. "
            "Survival curves come from a log-normal mixture model, toxicity "
            "risks from a feed-forward network, and treatment probabilities "
            "from a policy network trained to imitate recorded decisions."),
        "limitations": (
            "Research prototype for interface and methods work. Predictions "
            "are not validated for clinical use and must not guide the care "
            "of real patients. Confidence envelopes reflect model "
            "uncertainty under dropout, not calibrated coverage."),
    }


def create_app(runtime: TwinRuntime | None) -> FastAPI:
    """Build the FastAPI app; with no runtime every model route returns 503."""
    app = FastAPI(title="treatment-twin decision support", version=__version__)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    counters = {"simulate_requests": 0}
    lock = threading.Lock()

    def need_runtime() -> TwinRuntime:
        if runtime is None:
            raise HTTPException(status_code=503,
                                detail="no model bundle loaded")
        return runtime

    @app.get("/api/health")
    def health():
        return {"status": "ok", "model_loaded": runtime is not None,
                "simulate_requests": counters["simulate_requests"]}

    @app.get("/api/schema")
    def schema():
        return schema_payload(need_runtime())

    @app.get("/api/model-info")
    def model_info():
        return model_info_payload(need_runtime())

    @app.post("/api/simulate")
    def simulate(request: SimulateRequest):
        rt = need_runtime()
        try:
            response = handle_simulate(request, rt)
        except RequestError as exc:
            raise HTTPException(status_code=422,
                                detail={"problems": exc.problems})
        with lock:
            counters["simulate_requests"] += 1
        return response

    return app
