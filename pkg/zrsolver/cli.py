import argparse
import logging
import os
import sys
from typing import List, Optional

from .experiments import (
    cmd_collide,
    cmd_compare,
    cmd_converge_space,
    cmd_converge_time,
    cmd_selftest,
)
from .model import InvalidSolitonError, SingularParameterError
from .oracle import OracleError
from .rk_stepper import SingularStageMatrixError
from .Simulation import RunConfig, Simulation, supported_schemes
from .stepper import POLICIES, StageSolveError
from .tableau import get_tableau
from .utils import ensure_dir, write_json

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

COMMANDS = ["run", "converge-space", "converge-time", "collide", "compare", "selftest"]

HANDLED_ERRORS = (
    SingularParameterError,
    InvalidSolitonError,
    SingularStageMatrixError,
    StageSolveError,
    OracleError,
    ValueError,
    OSError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zrsolver",
        description="Structure-preserving Fourier pseudo-spectral Runge-Kutta solver "
        "for the Zakharov-Rubenchik equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "selftest":
            p.add_argument(
                "--corrupt",
                choices=["gauss1", "gauss2", "gauss3"],
                default=None,
                help="shift a_11 of this tableau by 1e-3 before running the suites",
            )
            p.add_argument("--out", default=None, help="directory for error.json")
            continue
        p.add_argument("--config", default=None, help="flat TOML run file")
        p.add_argument("--scheme", choices=list(supported_schemes.keys()), default=None)
        p.add_argument("--N", type=int, default=None)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--T", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        p.add_argument("--policy", choices=POLICIES, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--cadence", type=int, default=None)
        p.add_argument("--case", choices=["I", "II", "III"], default=None)
        p.add_argument("--emit-plots", dest="emit_plots", action="store_true")
        p.add_argument("--progress", action="store_true")
        p.add_argument(
            "--no-reference",
            dest="no_reference",
            action="store_true",
            help="fail instead of falling back to a reference run when the exact solution does not validate",
        )
    return parser


def load_config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        base = RunConfig.from_toml(args.config).to_explicit_dict()
    return RunConfig.from_args(args, base)


def dispatch(args) -> int:
    if args.command == "selftest":
        overrides = None
        if args.corrupt:
            overrides = {args.corrupt: get_tableau(args.corrupt).perturbed(0, 0, 1e-3)}
        ok, _ = cmd_selftest(overrides)
        return 0 if ok else 1

    config = load_config(args)
    if args.command == "run":
        Simulation(config).run()
    elif args.command == "converge-space":
        cmd_converge_space(config)
    elif args.command == "converge-time":
        cmd_converge_time(config)
    elif args.command == "collide":
        cmd_collide(config, args.case)
    elif args.command == "compare":
        cmd_compare(config)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    # argparse exits with status 2 on usage errors
    args = parser.parse_args(argv)
    try:
        return dispatch(args)
    except HANDLED_ERRORS as e:
        out_dir = getattr(args, "out", None) or "out"
        try:
            ensure_dir(out_dir)
            write_json(
                os.path.join(out_dir, "error.json"),
                {"error": type(e).__name__, "message": str(e), "command": args.command},
            )
        except OSError:
            pass
        logging.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
