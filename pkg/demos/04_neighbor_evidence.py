#!/usr/bin/env python3
"""What happened to patients like this one?

Retrieves the query patient's nearest cohort members in the policy's
embedding space, splits them into treated and untreated arms inside a
propensity caliper, and contrasts observed outcomes: toxicity rates and
product-limit survival curves per arm.
"""

from oncotwin.service import SimulateRequest, handle_simulate

from _common import load_or_train

PATIENT = {
    "age": 64.0, "is_male": 1, "hpv": 2, "smoking_status": 1,
    "pack_years": 10.0, "t_stage": 2, "n_stage": 2, "ajcc_stage": 2,
    "subsite": 0,
}


def main():
    runtime = load_or_train()
    out = handle_simulate(
        SimulateRequest(features=PATIENT, decision="ic", seed=9), runtime)

    nb = out["neighbors"]
    sizes = nb["group_sizes"]
    print(f"matched pool: {sizes['treated']} treated vs "
          f"{sizes['untreated']} untreated neighbors "
          f"(caliper {nb['caliper']:.3f} at alpha {nb['alpha']:.1f}"
          f"{', low support' if nb['low_support'] else ''})\n")

    print("observed toxicity contrast (treated - untreated):")
    for outcome, cells in nb["ate"].items():
        if cells["difference"] is None:
            print(f"  {outcome}: one arm empty, no estimate")
            continue
        print(f"  {outcome}: {cells['treated_rate']:.0%} vs "
              f"{cells['untreated_rate']:.0%} -> "
              f"difference {cells['difference']:+.0%}")

    print("\nobserved survival among the matched arms:")
    for endpoint, curves in nb["km"].items():
        for arm in ("treated", "untreated"):
            curve = curves[arm]
            if curve is None:
                print(f"  {endpoint} {arm}: arm empty")
                continue
            yearly = "  ".join(f"{curve[m]:.2f}" for m in (12, 24, 36, 48, 60))
            print(f"  {endpoint} {arm:<9} S at years 1-5: {yearly}")

    novelty = out["policy"]["novelty"]
    print(f"\nquery sits at the {novelty['percentile']:.0f}th novelty "
          f"percentile of the cohort "
          f"({'inside' if novelty['trusted'] else 'outside'} the trusted "
          f"range)")


if __name__ == "__main__":
    main()
