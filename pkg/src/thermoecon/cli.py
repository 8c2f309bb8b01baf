"""Command-line interface.

Subcommands: run, verify, list-experiments, schema.
Exit codes: 0 success, 2 assertion/criterion failure, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import verify as verify_mod
from .config import (ScenarioConfig, config_schema, load_config, resolve_outdir,
                     write_json)
from .errors import ThermoeconError
from .experiments import list_experiments, run_experiment

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ASSERTION = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="thermoecon",
        description="Exchange-economy thermodynamics: simulation, protocols "
                    "and verification.")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("--config", required=True, help="TOML scenario file")
    run_p.add_argument("--seed", type=int, default=None, help="override master seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--replicas", type=int, default=None)
    run_p.add_argument("--mode", choices=["analytic", "stochastic"], default=None)
    run_p.add_argument("--steps", type=int, default=None)

    ver_p = sub.add_parser("verify", help="run an acceptance suite")
    ver_p.add_argument("suite", choices=sorted(verify_mod.SUITES),
                       help="suite name")
    ver_p.add_argument("--out", default=None, help="write the JSON report here")

    sub.add_parser("list-experiments", help="list runnable experiments")
    sub.add_parser("schema", help="print the config schema as JSON")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    if args.mode is not None:
        cfg.mode = args.mode
        cfg.raw["mode"] = args.mode
    if args.replicas is not None:
        cfg.replicas = args.replicas
    if args.steps is not None:
        cfg.steps = args.steps
    outdir = resolve_outdir(cfg, args.out)
    rec = run_experiment(cfg, outdir)
    print(f"run {rec.run_id}: wrote {len(rec.files)} files to {outdir}")
    for a in rec.assertions:
        flag = "PASS" if a["passed"] else "FAIL"
        print(f"  [{flag}] {a['name']}")
    return EXIT_OK if rec.passed else EXIT_ASSERTION


def _cmd_verify(args) -> int:
    results = verify_mod.run_suite(args.suite)
    payload = {"suite": args.suite,
               "results": [{"criterion": r.criterion, "passed": r.passed,
                            "elapsed_s": r.elapsed_s, "details": r.details}
                           for r in results],
               "passed": all(r.passed for r in results)}
    for r in results:
        print(r.line())
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_json(path, payload)
        print(f"report: {path}")
    return EXIT_OK if payload["passed"] else EXIT_ASSERTION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "list-experiments":
            for name in list_experiments():
                print(name)
            return EXIT_OK
        if args.command == "schema":
            json.dump(config_schema(), sys.stdout, indent=2, sort_keys=True)
            print()
            return EXIT_OK
        return EXIT_ERROR
    except ThermoeconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
