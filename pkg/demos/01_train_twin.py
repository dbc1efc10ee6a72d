#!/usr/bin/env python3
"""Train the dual twin end to end and score it on held-out patients.

Walks the full pipeline: synthesize a cohort, fit the patient simulator
(stage transitions, toxicity, survival mixtures), fit the physician policy
on top of it, pack everything into a single content-addressed bundle, and
print the held-out evaluation table.
"""

import argparse

from oncotwin.bundle import save_bundle
from oncotwin.evaluation import evaluate_simulator, report_to_text
from oncotwin.pipeline import runtime_to_bundle

from _common import BUNDLE_PATH, train_demo_runtime


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    print("training patient simulator + policy twin on 200 synthetic "
          "patients ...")
    runtime, held = train_demo_runtime(seed=args.seed)

    BUNDLE_PATH.parent.mkdir(parents=True, exist_ok=True)
    digest = save_bundle(runtime_to_bundle(runtime), BUNDLE_PATH)
    print(f"bundle written to {BUNDLE_PATH}")
    print(f"content digest {digest}")
    print("retraining with the same seed reproduces this digest exactly.\n")

    print(f"evaluation on {len(held)} held-out patients:")
    report = evaluate_simulator(runtime.simulator, held)
    print(report_to_text(report))


if __name__ == "__main__":
    main()
