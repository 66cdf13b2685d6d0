"""
Command line entry point.

    ahflow run [config.yaml] [--re 100 --rho 20 --alpha 100 ...]
    ahflow sweep config.yaml [--workers 4]
    ahflow figure fig2
    ahflow mms --h 1/8 1/16 1/32 --element TH --nonlinear

Flags override values read from the config file. Exit codes: 0 on success
(non-converged runs included), 2 on configuration or solver errors, 1 on
anything unexpected.
"""
import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from ahflow import __version__
from ahflow.exceptions import AhflowError
from ahflow.harness.runner import mms_convergence_study, run_single, run_sweep
from ahflow.harness.specs import PRESETS, SweepSpec, build_spec, load_spec

OVERRIDE_FLAGS = ("problem", "re", "rho", "alpha", "gamma", "epsilon", "depth",
                  "beta", "element", "method", "h", "tol", "max_iters", "out",
                  "workers")


def _number(text: str) -> float:
    """Accept decimals and fractions such as 1/32."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as error:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from error


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run parameters (override the config file)")
    group.add_argument("--problem", choices=["cavity", "step", "mms"])
    group.add_argument("--re", type=_number, help="Reynolds number (nu = 1/re)")
    group.add_argument("--rho", type=_number)
    group.add_argument("--alpha", type=_number, help="default 1/nu")
    group.add_argument("--gamma", type=_number, help="grad-div parameter")
    group.add_argument("--epsilon", type=_number, help="IPP penalty")
    group.add_argument("--depth", type=int, help="Anderson depth m")
    group.add_argument("--beta", type=_number, help="Anderson damping")
    group.add_argument("--element", choices=["TH", "SV"])
    group.add_argument("--method", choices=["AH", "GradDivAH", "IPP", "Picard"])
    group.add_argument("--h", type=_number, help="mesh size, e.g. 1/32")
    group.add_argument("--tol", type=_number)
    group.add_argument("--max-iters", dest="max_iters", type=int)
    group.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ahflow",
        description="Arrow-Hurwicz and Anderson accelerated steady Navier-Stokes solvers")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log every iteration")
    parser.add_argument("--log-file", type=Path, help="also log to this file")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="single run")
    run.add_argument("config", nargs="?", help="YAML config file")
    _add_run_flags(run)

    sweep = commands.add_parser("sweep", help="parameter sweep")
    sweep.add_argument("config", help="YAML config file with a `sweep:` mapping")
    sweep.add_argument("--workers", type=int, help="worker processes")
    _add_run_flags(sweep)

    figure = commands.add_parser("figure", help="run a shipped preset")
    figure.add_argument("name", choices=PRESETS)
    figure.add_argument("--workers", type=int, help="worker processes")
    _add_run_flags(figure)

    mms = commands.add_parser("mms", help="manufactured solution convergence study")
    mms.add_argument("--h", dest="h_list", type=_number, nargs="+",
                     default=[1 / 8, 1 / 16, 1 / 32])
    mms.add_argument("--element", choices=["TH", "SV"], default="TH")
    mms.add_argument("--nonlinear", action="store_true",
                     help="Navier-Stokes (Picard) instead of Stokes")
    mms.add_argument("--nu", type=_number, default=1.0)
    mms.add_argument("--out", type=Path, default=Path("results"))
    return parser


def configure_logging(verbose: bool, log_file: Optional[Path]) -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")
    if log_file is not None:
        logger.add(log_file, level="DEBUG")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {flag: getattr(args, flag) for flag in OVERRIDE_FLAGS
            if getattr(args, flag, None) is not None}


def _execute(spec) -> None:
    if isinstance(spec, SweepSpec):
        result = run_sweep(spec)
        logger.info(f"Sweep summary written to {result.artifacts['summary']}")
    else:
        result = run_single(spec)
        logger.info(f"Run artifacts in {result.artifacts['trace'].parent}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.log_file)
    try:
        if args.command == "mms":
            study = mms_convergence_study(args.h_list, args.element,
                                          nonlinear=args.nonlinear, nu=args.nu)
            args.out.mkdir(parents=True, exist_ok=True)
            study.table.to_csv(args.out / "mms.csv", index=False)
            logger.info("MMS errors\n" + study.table.to_string(index=False))
            logger.info(f"Observed orders: {study.orders}")
        elif args.command == "run":
            overrides = _overrides(args)
            overrides.pop("workers", None)
            spec = (load_spec(args.config, overrides) if args.config
                    else build_spec({}, overrides))
            _execute(spec)
        elif args.command == "sweep":
            _execute(load_spec(args.config, _overrides(args)))
        else:
            _execute(load_spec(args.name, _overrides(args)))
    except AhflowError as error:
        logger.error(str(error))
        return 2
    except Exception:
        logger.exception("Unexpected failure")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
