"""Command-line entry point: generate, train, evaluate, serve, simulate.

Subcommands:
  gen-cohort  --seed --n --out [--symptoms-out]
  train       --cohort --out-bundle --seed [--symptom-cohort] [--max-epochs]
  eval        --bundle --cohort --report
  serve       --bundle --port [--host]
  simulate    --bundle --patient <json or @file> --decision --strategy
              [--fixed ic=0 ...] [--seed]

The log level comes from the ONCOTWIN_LOG_LEVEL environment variable
(DEBUG/INFO/WARNING/ERROR; default INFO).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from .bundle import BundleError, load_bundle, save_bundle
from .cohort import CohortError, generate_synthetic_cohort, load_cohort_csv, \
    save_cohort_csv
from .evaluation import evaluate_simulator, report_to_json, report_to_text
from .pipeline import runtime_from_bundle, runtime_to_bundle, train_runtime
from .policy import PolicyConfig
from .simulator import SimulatorConfig
from .symptoms import SymptomConfig, generate_symptom_cohort, load_symptom_csv, \
    save_symptom_csv

log = logging.getLogger("oncotwin")


def _setup_logging():
    level = os.environ.get("ONCOTWIN_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _cmd_gen_cohort(args) -> int:
    records = generate_synthetic_cohort(seed=args.seed, n=args.n)
    save_cohort_csv(records, args.out)
    log.info("wrote %d records to %s", len(records), args.out)
    if args.symptoms_out:
        rated = generate_symptom_cohort(seed=args.seed)
        save_symptom_csv(rated, args.symptoms_out)
        log.info("wrote %d rated records to %s", len(rated), args.symptoms_out)
    return 0


def _cmd_train(args) -> int:
    records = load_cohort_csv(args.cohort)
    if args.symptom_cohort:
        rated = load_symptom_csv(args.symptom_cohort)
    else:
        # no rated file supplied: use the generator, tied to the same seed
        rated = generate_symptom_cohort(seed=args.seed)
    sim_cfg, pol_cfg, sym_cfg = SimulatorConfig(), PolicyConfig(), SymptomConfig()
    if args.max_epochs is not None:
        sim_cfg = replace(sim_cfg, max_epochs=args.max_epochs)
        pol_cfg = replace(pol_cfg, max_epochs=args.max_epochs)
        sym_cfg = replace(sym_cfg, max_epochs=args.max_epochs)
    if args.width is not None:
        sim_cfg = replace(sim_cfg, hidden=args.width)
        pol_cfg = replace(pol_cfg, width=args.width, ffn_hidden=args.width)
    runtime = train_runtime(records, rated, args.seed,
                            simulator_config=sim_cfg, policy_config=pol_cfg,
                            symptom_config=sym_cfg)
    digest = save_bundle(runtime_to_bundle(runtime), args.out_bundle)
    log.info("bundle written to %s (digest %s)", args.out_bundle, digest[:12])
    print(digest)
    return 0


def _cmd_eval(args) -> int:
    runtime = runtime_from_bundle(load_bundle(args.bundle))
    records = load_cohort_csv(args.cohort)
    report = evaluate_simulator(runtime.simulator, records)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    print(report_to_text(report))
    log.info("report written to %s", args.report)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    runtime = runtime_from_bundle(load_bundle(args.bundle))
    log.info("serving bundle %s (%d records) on %s:%d",
             args.bundle, len(runtime.records), args.host, args.port)
    uvicorn.run(create_app(runtime), host=args.host, port=args.port,
                log_level=os.environ.get("ONCOTWIN_LOG_LEVEL", "info").lower())
    return 0


def _cmd_simulate(args) -> int:
    from .service import RequestError, SimulateRequest, handle_simulate

    raw = args.patient
    if raw.startswith("@"):
        with open(raw[1:], encoding="utf-8") as fh:
            raw = fh.read()
    features = json.loads(raw)

    fixed = {}
    for item in args.fixed or []:
        stage, _, value = item.partition("=")
        if stage not in ("ic", "cc", "nd") or value not in ("0", "1"):
            raise SystemExit(f"--fixed expects ic|cc|nd=0|1, got {item!r}")
        fixed[stage] = int(value)

    runtime = runtime_from_bundle(load_bundle(args.bundle))
    request = SimulateRequest(features=features, decision=args.decision,
                              strategy=args.strategy, fixed=fixed,
                              seed=args.seed)
    try:
        response = handle_simulate(request, runtime)
    except RequestError as exc:
        for problem in exc.problems:
            print(f"invalid request: {problem}", file=sys.stderr)
        return 2
    json.dump(response, sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oncotwin",
        description="Digital-twin decision support: generate data, train, "
                    "evaluate, serve, and query models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-cohort", help="write a synthetic cohort CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=536)
    p.add_argument("--out", required=True)
    p.add_argument("--symptoms-out", help="also write a rated symptom cohort")
    p.set_defaults(func=_cmd_gen_cohort)

    p = sub.add_parser("train", help="train all models and write a bundle")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out-bundle", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--symptom-cohort", help="rated symptom CSV; generated "
                   "from the seed when omitted")
    p.add_argument("--max-epochs", type=int, help="cap training epochs")
    p.add_argument("--width", type=int, help="override hidden width")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a bundle against a cohort CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--report", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP decision-support service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("simulate", help="one what-if query, JSON to stdout")
    p.add_argument("--bundle", required=True)
    p.add_argument("--patient", required=True,
                   help="feature JSON, or @path to a JSON file")
    p.add_argument("--decision", choices=("ic", "cc", "nd"), default="cc")
    p.add_argument("--strategy", choices=("imitation", "optimal"),
                   default="imitation")
    p.add_argument("--fixed", action="append", metavar="STAGE=0|1",
                   help="pin a decision, e.g. --fixed ic=0 (repeatable)")
    p.add_argument("--seed", type=int, help="request RNG seed")
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BundleError, CohortError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
