#!/usr/bin/env python3
"""Symptom burden over the treatment course, treated vs untreated.

The symptom twin retrieves diary patients similar to the query and shows
median 0-10 severity for each symptom at baseline and weeks 7, 12, and 27,
split by whether those patients received the therapy under study.
"""

from oncotwin.service import SimulateRequest, handle_simulate

from _common import load_or_train

PATIENT = {
    "age": 55.0, "is_male": 1, "hpv": 1, "smoking_status": 0,
    "t_stage": 3, "n_stage": 1, "ajcc_stage": 3, "subsite": 1,
}


def main():
    runtime = load_or_train()
    out = handle_simulate(
        SimulateRequest(features=PATIENT, decision="cc", seed=5), runtime)

    sym = out["symptoms"]
    weeks = sym["timepoint_weeks"]
    print(f"therapy under study: {sym['treatment']}")
    for arm in ("treated", "untreated"):
        group = sym[arm]
        print(f"\n{arm} diary patients: {len(group['members'])}"
              f"{' (low support)' if group['low_support'] else ''}")
        header = "".join(f"{f'wk {w:g}':>8}" for w in weeks)
        print(f"  {'symptom':<16}{header}")
        for name, row in zip(sym["symptoms"], group["medians"]):
            cells = "".join(
                f"{'-':>8}" if v is None else f"{v:>8.1f}" for v in row)
            print(f"  {name:<16}{cells}")

    print("\nmedians of 0-10 severity; '-' marks timepoints with no "
          "observed diaries")


if __name__ == "__main__":
    main()
