"""Command line entry point: ``fsmcmc <command> --config run.yaml``.

Exit codes: 0 success, 1 invalid configuration or inputs, 2 numerical
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np
import pydantic
import yaml

from . import experiments as ex
from .config import load_config

log = logging.getLogger("fsmcmc")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

NUMERICAL = (ArithmeticError, np.linalg.LinAlgError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsmcmc", description="Function-space MCMC experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help, multi=False, workers=False):
        s = sub.add_parser(name, help=help)
        if multi:
            s.add_argument("--config", "-c", action="append", default=[],
                           help="run config; repeat once per run")
            s.add_argument("--run", "-r", action="append", default=[],
                           help="existing run directory (uses its stored config.yaml); repeatable")
        else:
            s.add_argument("--config", "-c", required=True, help="YAML experiment config")
        s.add_argument("--out", "-o", help="output directory (overrides output_dir in the config)")
        s.add_argument("--force", "-f", action="store_true", help="overwrite existing outputs")
        if workers:
            s.add_argument("--workers", "-j", type=int, default=1, help="concurrent chains")
        return s

    add("generate", "draw a truth and synthesise observations")
    add("tune", "build the weight operator and adapt beta")
    add("sample", "run the chain ensemble", workers=True)
    add("diagnose", "IACT, ESS, PSRF and error curves for sampled chains")
    add("compare", "side-by-side ESS of several runs on the same data", multi=True)
    add("analytic1d", "quadrature sweep for the scalar model")
    return p


def run(args) -> None:
    if args.command == "compare":
        cfgs = [load_config(c) for c in args.config] + [ex.load_run(r) for r in args.run]
        if not cfgs:
            raise ValueError("compare needs runs given by --config or --run")
        ex.cmd_compare(cfgs, args.out or cfgs[0].output_dir, args.force)
        return
    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.with_output(args.out)
    if args.command == "generate":
        ex.cmd_generate(cfg, args.force)
    elif args.command == "tune":
        ex.cmd_tune(cfg, args.force)
    elif args.command == "sample":
        if args.workers < 1:
            raise ValueError("--workers must be >= 1")
        ex.cmd_sample(cfg, args.workers, args.force)
    elif args.command == "diagnose":
        ex.cmd_diagnose(cfg, args.force)
    elif args.command == "analytic1d":
        ex.cmd_analytic1d(cfg, args.force)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except (pydantic.ValidationError, yaml.YAMLError) as err:
        log.error("invalid config: %s", err)
        return EXIT_VALIDATION
    except NUMERICAL as err:
        log.error("numerical failure: %s", err)
        return EXIT_NUMERICAL
    except OSError as err:
        log.error("I/O failure: %s", err)
        return EXIT_IO
    except ValueError as err:
        log.error("%s", err)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
