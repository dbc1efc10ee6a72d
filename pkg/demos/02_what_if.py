#!/usr/bin/env python3
"""Pose a what-if consultation: induction chemo, yes or no?

One request answers the counterfactual pair: the same patient is rolled
through the treatment sequence twice, once with the decision under study
set to yes and once to no, with every other decision resolved the same way
in both arms. Survival curves carry Monte-Carlo dropout envelopes.
"""

import argparse

from oncotwin.service import SimulateRequest, handle_simulate

from _common import load_or_train

PATIENT = {
    # 58-year-old male smoker, T3 N2 stage-3 oropharynx, HPV positive
    "age": 58.0, "is_male": 1, "hpv": 1, "smoking_status": 2,
    "pack_years": 30.0, "t_stage": 3, "n_stage": 2, "ajcc_stage": 3,
    "subsite": 1, "bilateral": 0,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--decision", choices=("ic", "cc", "nd"), default="ic")
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    runtime = load_or_train()
    request = SimulateRequest(features=PATIENT, decision=args.decision,
                              strategy="imitation", seed=args.seed)
    out = handle_simulate(request, runtime)

    print(f"decision under study: {out['decision_label']}")
    print(f"how each decision was resolved: {out['decision_sources']}")
    print(f"twin vote for treating: {out['policy']['probability']:.1%} "
          f"(novelty percentile {out['policy']['novelty']['percentile']:.0f}, "
          f"{'trusted' if out['policy']['novelty']['trusted'] else 'novel'})\n")

    for arm in ("treated", "untreated"):
        block = out["arms"][arm]
        print(f"--- {arm} arm, sequence {block['sequence']} ---")
        for name in ("os", "lrc", "fdm"):
            curve = block["curves"][name]
            s24, s60 = curve["survival"][24], curve["survival"][60]
            lo, hi = curve["lower"][60], curve["upper"][60]
            print(f"  {name}: S(24m) {s24:.2f}  S(60m) {s60:.2f} "
                  f"[{lo:.2f}, {hi:.2f}]")
        for tox, ci in block["toxicity"].items():
            print(f"  {tox}: {ci['probability']:.1%} "
                  f"[{ci['lower']:.1%}, {ci['upper']:.1%}]")
        print()

    print("risk table (twin vs matched neighbors):")
    for outcome, cells in out["risk_table"].items():
        row = "  ".join(f"{k} {v:.0%}" for k, v in cells.items()
                        if v is not None)
        print(f"  {outcome}: {row}")
    print(f"\nresponse built in {out['timing']['total_ms']:.0f} ms "
          f"(seed {out['seed']}, {out['mc_samples']} dropout samples)")


if __name__ == "__main__":
    main()
