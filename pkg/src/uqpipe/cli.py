"""Command line interface for staged uncertainty-quantification runs.

Subcommands map onto the pipeline stages; each one brings the run
directory up to its stage (reusing every stored stage whose inputs are
unchanged) and rewrites the reports:

    design    build and export the space-filling design
    ingest    attach outputs (external files or benchmark evaluation)
    screen    rank inputs and select the explanatory ones
    fit       build the joint mean/dispersion metamodel
    validate  predictivity and interval calibration
    sobol     sensitivity indices from the metamodel
    quantile  high-quantile estimates with intervals
    pipeline  run everything (or up to --stage)

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _pin_linear_algebra_threads():
    """Force the linear-algebra libraries onto one thread.

    Threaded BLAS reductions reorder floating-point sums, which would
    break the byte-reproducibility contract of the reports — runs must
    not depend on the machine's thread settings.  This must happen
    before the first numpy import, which is why the package __init__
    imports nothing eagerly.
    """
    for var in _THREAD_VARS:
        os.environ[var] = "1"


_pin_linear_algebra_threads()

import dataclasses  # noqa: E402

from .errors import (ConfigError, DataError, NumericalError,  # noqa: E402
                     UqpipeError)
from .pipeline import (STAGES, PipelineRun, RunConfig,  # noqa: E402
                       load_config)

_TARGETS = {
    "design": "design",
    "ingest": "sample",
    "screen": "screen",
    "fit": "fit",
    "validate": "validate",
    "sobol": "sobol",
    "quantile": "quantile",
    "pipeline": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqpipe",
        description="Screening, joint metamodeling, sensitivity indices "
                    "and quantile estimation for expensive simulators.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    helps = {
        "design": "build and export the space-filling design",
        "ingest": "attach outputs to the design (files or benchmark)",
        "screen": "rank inputs and select the explanatory ones",
        "fit": "build the joint mean/dispersion metamodel",
        "validate": "measure predictivity and interval calibration",
        "sobol": "compute sensitivity indices from the metamodel",
        "quantile": "estimate high quantiles with intervals",
        "pipeline": "run all stages in order",
    }
    for command, text in helps.items():
        cmd = sub.add_parser(command, help=text, description=text)
        cmd.add_argument("--config", metavar="FILE",
                         help="YAML run configuration")
        cmd.add_argument("--model", metavar="NAME",
                         help="builtin benchmark to analyze (shortcut "
                              "for a config file)")
        cmd.add_argument("--seed", type=int, metavar="N",
                         help="master seed (overrides the config)")
        cmd.add_argument("--out-dir", default="uqpipe-run", metavar="DIR",
                         help="run directory (default: %(default)s)")
        if command == "pipeline":
            cmd.add_argument("--stage", choices=STAGES, default=None,
                             help="run only this stage and its "
                                  "dependencies (default: all stages)")
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config and args.model:
        raise ConfigError("pass either --config or --model, not both")
    if args.config:
        config = load_config(args.config)
    elif args.model:
        config = RunConfig(bench=args.model,
                           seed=0 if args.seed is None else args.seed)
    else:
        raise ConfigError(
            "a configuration is required: --config FILE or --model NAME"
        )
    if args.seed is not None and args.seed != config.seed:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        target = getattr(args, "stage", None) or _TARGETS[args.command]
        run = PipelineRun(config, args.out_dir)
        run.execute(target)
        for message in run.messages:
            print(message)
        print(f"report: {Path(args.out_dir) / 'report.txt'}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except UqpipeError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
