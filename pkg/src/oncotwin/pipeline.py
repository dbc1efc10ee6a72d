"""Training orchestration and bundle (de)serialization for serving.

A TwinRuntime holds every trained component the HTTP service needs:
simulator, policy twin, symptom model, the neighbor pool with per-stage
indexes, and the default comparison patient. `runtime_to_bundle` freezes
it into named arrays plus JSON metadata; `runtime_from_bundle` rebuilds
a runtime that reproduces all predictions bit-identically.
"""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .bundle import ModelBundle
from .cohort import (
    CohortRecord,
    FeatureEncoder,
    PatientFeatures,
    load_cohort_csv,
    save_cohort_csv,
)
from .explain import build_baseline_patient
from .neighbors import StageIndex, build_stage_index
from .nn.layers import DropoutSpec
from .policy import (
    STAGES,
    OptimalObjectiveWeights,
    PolicyConfig,
    PolicyModel,
    TripletConfig,
    fit_policy,
)
from .simulator import (
    SimulatorConfig,
    SimulatorModels,
    StaticOutcomeModel,
    SurvivalMixtureModel,
    TransitionModel,
    fit_simulator,
)
from .symptoms import (
    SymptomConfig,
    SymptomModel,
    fit_symptom_model,
    load_symptom_csv,
    save_symptom_csv,
)

__all__ = ["TwinRuntime", "train_runtime", "runtime_to_bundle",
           "runtime_from_bundle"]

log = logging.getLogger("oncotwin")

_INDEX_FIELDS = ("embeddings", "logits", "propensities", "decisions")


@dataclass
class TwinRuntime:
    """Everything the decision-support service serves from."""

    simulator: SimulatorModels
    policy: PolicyModel
    symptoms: SymptomModel
    records: list[CohortRecord]
    indexes: dict[str, StageIndex]
    baseline: PatientFeatures
    configs: dict
    seed: int
    digest: str = ""


def train_runtime(records: list[CohortRecord], symptom_records: list,
                  seed: int, *,
                  simulator_config: SimulatorConfig | None = None,
                  policy_config: PolicyConfig | None = None,
                  symptom_config: SymptomConfig | None = None,
                  weights: OptimalObjectiveWeights | None = None) -> TwinRuntime:
    """Train all components from one seed and assemble the serving state."""
    simulator_config = simulator_config or SimulatorConfig()
    policy_config = policy_config or PolicyConfig()
    symptom_config = symptom_config or SymptomConfig()

    log.info("training simulator on %d records (seed %d)", len(records), seed)
    simulator = fit_simulator(records, seed, config=simulator_config)
    log.info("training policy twin (seed %d)", seed + 10)
    policy = fit_policy(records, simulator, seed + 10, config=policy_config,
                        weights=weights)
    log.info("training symptom model on %d rated records (seed %d)",
             len(symptom_records), seed + 20)
    symptoms = fit_symptom_model(symptom_records, seed + 20,
                                 config=symptom_config)
    indexes = {stage: build_stage_index(policy, records, stage)
               for stage in STAGES}
    return TwinRuntime(
        simulator=simulator,
        policy=policy,
        symptoms=symptoms,
        records=list(records),
        indexes=indexes,
        baseline=build_baseline_patient(records),
        configs={"simulator": simulator_config, "policy": policy_config,
                 "symptoms": symptom_config},
        seed=seed,
    )


def _csv_bytes(save_fn, records) -> np.ndarray:
    fd, path = tempfile.mkstemp(suffix=".csv")
    os.close(fd)
    try:
        save_fn(records, path)
        with open(path, "rb") as fh:
            raw = fh.read()
    finally:
        os.unlink(path)
    return np.frombuffer(raw, dtype=np.uint8).copy()


def _csv_records(load_fn, blob: np.ndarray) -> list:
    fd, path = tempfile.mkstemp(suffix=".csv")
    os.close(fd)
    try:
        with open(path, "wb") as fh:
            fh.write(blob.tobytes())
        return load_fn(path)
    finally:
        os.unlink(path)


def runtime_to_bundle(runtime: TwinRuntime) -> ModelBundle:
    arrays: dict[str, np.ndarray] = {}
    sim = runtime.simulator
    for name, model in (("simulator.post_ic", sim.post_ic),
                        ("simulator.post_cc", sim.post_cc),
                        ("simulator.static", sim.static),
                        ("simulator.mixture", sim.mixture),
                        ("policy", runtime.policy),
                        ("symptoms", runtime.symptoms)):
        for key, value in model.state_arrays().items():
            arrays[f"{name}.{key}"] = value
    arrays.update(sim.encoder.stats_arrays())
    for stage, index in runtime.indexes.items():
        for field_name in _INDEX_FIELDS:
            arrays[f"index.{stage}.{field_name}"] = getattr(index, field_name)
    arrays["data.cohort.csv"] = _csv_bytes(save_cohort_csv, runtime.records)
    arrays["data.symptoms.csv"] = _csv_bytes(save_symptom_csv,
                                             runtime.symptoms.cohort)

    baseline = asdict(runtime.baseline)
    baseline["lymph_node_regions"] = list(baseline["lymph_node_regions"])
    meta = {
        "seed": runtime.seed,
        "n_records": len(runtime.records),
        "n_symptom_records": len(runtime.symptoms.cohort),
        "baseline_patient": baseline,
        "configs": {name: asdict(cfg) for name, cfg in runtime.configs.items()},
    }
    return ModelBundle(meta=meta, arrays=arrays)


def _sub_arrays(arrays: dict, prefix: str) -> dict:
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in arrays.items() if k.startswith(prefix + ".")}


def _simulator_config(raw: dict) -> SimulatorConfig:
    raw = dict(raw)
    raw["dropout"] = DropoutSpec(**raw["dropout"])
    return SimulatorConfig(**raw)


def _policy_config(raw: dict) -> PolicyConfig:
    raw = dict(raw)
    raw["dropout"] = DropoutSpec(**raw["dropout"])
    raw["triplet"] = TripletConfig(**raw["triplet"])
    return PolicyConfig(**raw)


def runtime_from_bundle(bundle: ModelBundle) -> TwinRuntime:
    meta = bundle.meta
    configs = {
        "simulator": _simulator_config(meta["configs"]["simulator"]),
        "policy": _policy_config(meta["configs"]["policy"]),
        "symptoms": SymptomConfig(**meta["configs"]["symptoms"]),
    }
    # parameters are overwritten wholesale, so the init rng is irrelevant
    rng = np.random.default_rng(0)

    encoder = FeatureEncoder.from_arrays(
        {k: bundle.arrays[k] for k in ("encoder.mean", "encoder.std")})
    post_ic = TransitionModel("post_ic", rng, configs["simulator"])
    post_cc = TransitionModel("post_cc", rng, configs["simulator"])
    static = StaticOutcomeModel(rng, configs["simulator"])
    mixture = SurvivalMixtureModel(rng, configs["simulator"])
    policy = PolicyModel(rng, configs["policy"])
    symptoms = SymptomModel(configs["symptoms"], rng)
    for name, model in (("simulator.post_ic", post_ic),
                        ("simulator.post_cc", post_cc),
                        ("simulator.static", static),
                        ("simulator.mixture", mixture),
                        ("policy", policy),
                        ("symptoms", symptoms)):
        model.load_state_arrays(_sub_arrays(bundle.arrays, name))
        model.set_training(False)
        model.trained = True
    policy.encoder = encoder

    records = _csv_records(load_cohort_csv, bundle.arrays["data.cohort.csv"])
    symptoms.cohort = _csv_records(load_symptom_csv,
                                   bundle.arrays["data.symptoms.csv"])

    indexes = {}
    for stage in STAGES:
        fields = {f: bundle.arrays[f"index.{stage}.{f}"] for f in _INDEX_FIELDS}
        indexes[stage] = StageIndex(stage=STAGES.index(stage), **fields)

    baseline_raw = dict(meta["baseline_patient"])
    baseline_raw["lymph_node_regions"] = tuple(baseline_raw["lymph_node_regions"])
    return TwinRuntime(
        simulator=SimulatorModels(encoder, post_ic, post_cc, static, mixture),
        policy=policy,
        symptoms=symptoms,
        records=records,
        indexes=indexes,
        baseline=PatientFeatures(**baseline_raw),
        configs=configs,
        seed=int(meta["seed"]),
        digest=bundle.digest,
    )
