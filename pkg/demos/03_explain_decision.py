#!/usr/bin/env python3
"""Explain a treatment vote as a feature waterfall.

Integrated gradients splits the gap between the cohort-default patient's
probability and this patient's probability into signed per-feature
contributions; small movers are pooled into an "other" row so the chart
stays readable. The contributions sum back to the gap (completeness).
"""

from oncotwin.service import SimulateRequest, handle_simulate

from _common import load_or_train

PATIENT = {
    "age": 71.0, "is_male": 0, "hpv": 0, "smoking_status": 2,
    "pack_years": 45.0, "t_stage": 4, "n_stage": 3, "ajcc_stage": 4,
    "pathological_grade": 3, "bilateral": 1,
}


def main():
    runtime = load_or_train()
    out = handle_simulate(
        SimulateRequest(features=PATIENT, decision="ic", seed=1), runtime)

    attr = out["policy"]["attribution"]
    print(f"default patient treats with p = {attr['baseline_probability']:.3f}")
    print(f"this patient treats with    p = {attr['final_probability']:.3f}\n")

    print(f"{'feature':<24} {'shift':>8} {'running p':>10}")
    for row in attr["waterfall"]:
        print(f"{row['name']:<24} {row['contribution']:>+8.3f} "
              f"{row['cumulative']:>10.3f}")

    total = sum(attr["contributions"].values())
    gap = attr["final_probability"] - attr["baseline_probability"]
    print(f"\ncontributions sum to {total:+.4f}; probability gap is "
          f"{gap:+.4f}; residual {attr['residual']:.2e}")

    rate = out["policy"]["neighbor_rate"]
    print(f"\ncorroborating evidence: {rate['rate']:.0%} of the "
          f"{len(rate['members'])} most similar cohort patients received "
          f"induction chemotherapy")


if __name__ == "__main__":
    main()
