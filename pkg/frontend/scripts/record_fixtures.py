"""Record API fixtures for the frontend test suite.

Trains a small bundle, stands up the service in-process, and captures
the schema payload, one full simulate response, and one validation
error body. Rerun whenever the API payload shapes change:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import warnings
from pathlib import Path

from fastapi.testclient import TestClient

from oncotwin.cohort import generate_synthetic_cohort
from oncotwin.pipeline import train_runtime
from oncotwin.policy import PolicyConfig
from oncotwin.service import create_app
from oncotwin.simulator import SimulatorConfig
from oncotwin.symptoms import SymptomConfig, generate_symptom_cohort

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    cohort = generate_synthetic_cohort(seed=19, n=200)
    rated = generate_symptom_cohort(seed=7, n=120)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        runtime = train_runtime(
            cohort, rated, seed=5,
            simulator_config=SimulatorConfig(hidden=16, mixture_hidden=12,
                                             components=2, max_epochs=4,
                                             patience=2),
            policy_config=PolicyConfig(width=16, heads=4, ffn_hidden=16,
                                       head_hidden=8, max_epochs=4, patience=4),
            symptom_config=SymptomConfig(max_epochs=6, patience=3))

    client = TestClient(create_app(runtime))
    schema = client.get("/api/schema").json()

    features = {f["name"]: f["default"] for f in schema["features"]}
    good = client.post("/api/simulate", json={
        "features": features, "decision": "cc", "strategy": "imitation",
        "seed": 11})
    assert good.status_code == 200, good.text

    # a patient far from the baseline so the waterfall carries real rows
    ln = [0] * 14
    ln[3] = ln[4] = ln[10] = 1
    shifted = dict(features, age=71.0, t_stage=4, n_stage=2, ajcc_stage=4,
                   hpv=0, smoking_status=2, pack_years=45.0,
                   lymph_node_regions=ln, bilateral=1, subsite=2)
    alt = client.post("/api/simulate", json={
        "features": shifted, "decision": "ic", "strategy": "imitation",
        "seed": 23, "debug": True})
    assert alt.status_code == 200, alt.text
    assert len(alt.json()["policy"]["attribution"]["waterfall"]) >= 3

    bad = client.post("/api/simulate", json={
        "features": dict(features, age=-4.0), "decision": "cc"})
    assert bad.status_code == 422, bad.text

    OUT.mkdir(parents=True, exist_ok=True)
    for name, payload in (("schema.json", schema),
                          ("simulate.json", good.json()),
                          ("simulate_alt.json", alt.json()),
                          ("error422.json", bad.json())):
        (OUT / name).write_text(json.dumps(payload, indent=1))
        print(f"wrote {OUT / name}")


if __name__ == "__main__":
    main()
