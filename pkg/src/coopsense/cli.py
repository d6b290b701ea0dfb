"""Command line front-end.

    coopsense scenario  [--config C] [--seed S]
    coopsense roc       [--config C] [--seed S] [--out DIR] [--realizations N] [--fast] [--workers W]
    coopsense converge  [--config C] [--seed S] [--out DIR]
    coopsense sweep     [--config C] [--seed S] [--out DIR] [--repetitions N]
    coopsense validate  [--config C] [--seed S] [--out DIR] [--trials N]

Exit codes: 0 success, 2 config error, 3 runtime/numeric error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig

log = logging.getLogger("coopsense")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--realizations", type=int, help="ensemble size (overrides config)")
    common.add_argument("--fast", action="store_true", default=None,
                        help="ROC: optimize BGA once per realization at the reference pf")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="coopsense", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("scenario", parents=[common], help="print realization 0 as JSON")
    roc = sub.add_parser("roc", parents=[common], help="ROC comparison of all schemes")
    roc.add_argument("--workers", type=int, default=1, help="worker processes (output is unaffected)")
    sub.add_parser("converge", parents=[common], help="GA convergence trace")
    sweep = sub.add_parser("sweep", parents=[common], help="one-factor GA parameter sweep")
    sweep.add_argument("--repetitions", type=int, help="seeded repetitions per cell")
    val = sub.add_parser("validate", parents=[common], help="Monte Carlo check of the Gaussian model")
    val.add_argument("--trials", type=int, help="Monte Carlo trials per hypothesis")
    return ap


def _build_config(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = str(args.out)
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if args.fast:
        overrides["fast"] = True
    try:
        if getattr(args, "repetitions", None) is not None:
            overrides["sweep"] = dataclasses.replace(cfg.sweep, repetitions=args.repetitions)
        if getattr(args, "trials", None) is not None:
            overrides["validate"] = dataclasses.replace(cfg.validate, trials=args.trials)
        return dataclasses.replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _run(args) -> None:
    cfg = _build_config(args)
    out = Path(cfg.out)
    if args.command == "scenario":
        scenario = harness.scenario_for(cfg, 0)
        print(json.dumps({"seed": cfg.seed, "scenario": scenario.to_dict()}, indent=2, sort_keys=True))
        return

    if args.command == "roc":
        curves = harness.run_roc(cfg, workers=args.workers)
        path = harness.emit_csv((row for c in curves for row in c.rows()), out / "roc.csv", harness.ROC_COLUMNS)
        mode = f"fast (BGA optimized once at pf={cfg.reference_pf})" if cfg.fast else "BGA re-optimized per pf"
        harness.write_metadata(path, cfg, "roc", bga_mode=mode)
    elif args.command == "converge":
        run = harness.run_convergence(cfg)
        path = harness.emit_csv(harness.convergence_rows(run), out / "converge.csv", harness.CONVERGE_COLUMNS)
        harness.write_metadata(path, cfg, "converge", ga=dataclasses.asdict(harness.convergence_config(cfg)),
                               best_fitness=run.best_fitness, best_weights=run.best_weights.tolist())
        print(f"final best fitness {run.best_fitness:.6f} after {run.generations_run} generations")
    elif args.command == "sweep":
        rows = harness.run_param_sweep(cfg)
        path = harness.emit_csv((r.as_dict() for r in rows), out / "sweep.csv", harness.SWEEP_COLUMNS)
        argmax = harness.sweep_argmax(rows)
        reference = {name: getattr(harness.GaConfig(), name) for name in argmax}
        harness.write_metadata(path, cfg, "sweep", argmax=argmax, reference_selection=reference)
        for name, value in argmax.items():
            print(f"{name:>6}: best {value} (reference selection {reference[name]})")
    elif args.command == "validate":
        rows = harness.run_validation(cfg)
        path = harness.emit_csv(rows, out / "validate.csv", harness.VALIDATE_COLUMNS)
        harness.write_metadata(path, cfg, "validate")
        worst = max(max(abs(r["pf_analytic"] - r["pf_empirical"]), abs(r["pd_analytic"] - r["pd_empirical"]))
                    for r in rows)
        print(f"largest |analytic - empirical| deviation: {worst:.4f}")
    print(f"wrote {path}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # numeric/runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
