import argparse
import json
import logging
import sys
from typing import List, Optional

from core.config import APP_DESCRIPTION, APP_NAME, configure_logging
from commands import command_registry

logger = logging.getLogger(__name__)

GRAPH_COMMANDS = ("analyze", "zeta", "heat", "measure", "distance", "form", "telescope")
TILING_COMMANDS = ("pisot", "omega")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="write the output to this file instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--eps", type=float, help="truncation tolerance (heat) or clipping width (form)")
    parser.add_argument("--depth", type=int, help="levels, path depth or truncation depth")
    parser.add_argument("--seed", type=int, help="seed for sampled pairs and functions")
    parser.add_argument("--kmax", type=int, help="pole index range (zeta) or resonance scan bound (pisot)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list the available commands")

    for name in GRAPH_COMMANDS + TILING_COMMANDS:
        command = command_registry.get_command(name)
        p = sub.add_parser(name, help=command.description, description=command.description)
        if name in GRAPH_COMMANDS:
            p.add_argument("spec", help="graph spec JSON file or the name of a bundled spec")
            p.add_argument("--rho", type=float, help="override the spec's rho")
        else:
            p.add_argument("rules", help="substitution rules JSON file or the name of a bundled spec")
        _common(p)

    parsers = sub.choices
    parsers["zeta"].add_argument("--z", action="append", help="evaluation point, repeatable (e.g. 2 or 1.5+3j)")
    heat = parsers["heat"]
    heat.add_argument("--t-min", dest="t_min", type=float)
    heat.add_argument("--t-max", dest="t_max", type=float)
    heat.add_argument("--points", type=int)
    heat.add_argument("--K", type=int, help="Fourier terms of the log-periodic coefficients")
    measure = parsers["measure"]
    measure.add_argument("--levels", type=int, help="levels of the Cesaro averages")
    measure.add_argument("--state-depth", dest="state_depth", type=int)
    distance = parsers["distance"]
    distance.add_argument("--pairs", help="JSON file of path pairs; without it a distance matrix is sampled")
    distance.add_argument("--oracle", action="store_true", default=None,
                          help="cross-check every pair against the Dijkstra oracle")
    distance.add_argument("--samples", type=int)
    form = parsers["form"]
    form.add_argument("--trig", help="trigonometric polynomial 'k:c,k:c' on the dyadic circle")
    form.add_argument("--samples", type=int)
    form.add_argument("--markov-level", dest="markov_level", type=int)
    form.add_argument("--cylinder-depth", dest="cylinder_depth", type=int)
    telescope = parsers["telescope"]
    telescope.add_argument("--p", type=int)
    telescope.add_argument("--samples", type=int)
    pisot = parsers["pisot"]
    pisot.add_argument("--beta", action="append",
                       help="value of beta on the first return vector as coefficients in powers of theta, repeatable")
    pisot.add_argument("--n-min", dest="n_min", type=int)
    pisot.add_argument("--n-max", dest="n_max", type=int)
    omega = parsers["omega"]
    omega.add_argument("--rho-tr", dest="rho_tr", type=float)
    omega.add_argument("--rho-lg", dest="rho_lg", type=float)
    omega.add_argument("--t-min", dest="t_min", type=float)
    omega.add_argument("--t-max", dest="t_max", type=float)
    omega.add_argument("--points", type=int)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for bratteli-spectra; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(getattr(args, "log_level", None))

    if args.command == "list":
        _emit(json.dumps(command_registry.get_all_command_info(), indent=2) + "\n", None)
        return 0

    command = command_registry.get_command(args.command)
    params = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        command.initialize(params)
    except Exception as exc:
        logger.error("%s", exc)
        sys.stderr.write(f"{exc}\n")
        return getattr(exc, "exit_code", 2)

    result = command.execute()
    if result.report is not None:
        if args.format == "csv" and result.csv is not None:
            _emit(result.csv, args.out)
        else:
            _emit(result.report.to_json(), args.out)
    if not result.success:
        sys.stderr.write(json.dumps(result.error, indent=2, sort_keys=True, default=str) + "\n")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
