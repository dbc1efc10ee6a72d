"""Shared plumbing for the demo scripts: build or reload a small twin bundle."""

import pathlib
import warnings

from oncotwin.bundle import load_bundle, save_bundle
from oncotwin.cohort import generate_synthetic_cohort
from oncotwin.pipeline import (
    TwinRuntime,
    runtime_from_bundle,
    runtime_to_bundle,
    train_runtime,
)
from oncotwin.policy import PolicyConfig
from oncotwin.simulator import SimulatorConfig
from oncotwin.symptoms import SymptomConfig, generate_symptom_cohort

BUNDLE_PATH = pathlib.Path(__file__).parent / "out" / "twin.bundle"

DEMO_SIM = SimulatorConfig(hidden=48, mixture_hidden=24, components=3,
                           max_epochs=30, patience=6)
DEMO_POLICY = PolicyConfig(width=48, heads=4, ffn_hidden=48, head_hidden=12,
                           lr=3e-3, max_epochs=40, patience=8)
DEMO_SYMPTOM = SymptomConfig(max_epochs=40, patience=8)


def train_demo_runtime(seed: int = 11, n: int = 260) -> tuple[TwinRuntime, list]:
    """Train a desk-scale twin and return it with its held-out records."""
    cohort = generate_synthetic_cohort(seed=seed, n=n)
    rated = generate_symptom_cohort(seed=seed + 1, n=200)
    train, held = cohort[:200], cohort[200:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        runtime = train_runtime(train, rated, seed=seed,
                                simulator_config=DEMO_SIM,
                                policy_config=DEMO_POLICY,
                                symptom_config=DEMO_SYMPTOM)
    return runtime, held


def load_or_train(path: pathlib.Path = BUNDLE_PATH) -> TwinRuntime:
    """Reload the demo bundle, or train and save one on first use."""
    if path.exists():
        return runtime_from_bundle(load_bundle(path))
    print(f"no bundle at {path}, training one (about half a minute) ...")
    runtime, _ = train_demo_runtime()
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = save_bundle(runtime_to_bundle(runtime), path)
    print(f"saved {path} ({digest[:12]}...)\n")
    return runtime
