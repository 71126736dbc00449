import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from gridohm import __version__
from gridohm.commands.resistance import cmd_catalog, cmd_compute, cmd_converge, cmd_table
from gridohm.commands.verify import cmd_verify
from gridohm.config import get_settings
from gridohm.exceptions import GridohmError, InvalidRequestError, NoConvergenceError
from gridohm.models.request import CommandResult, Engine, OutputFormat, RunRequest
from gridohm.models.results import QuadratureConfig
from gridohm.utils.formatting import render_error, render_json

logger = logging.getLogger(__name__)

EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors become InvalidRequest so they print as a JSON error object"""

    def error(self, message: str):
        raise InvalidRequestError(message)


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _param(text: str) -> Tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key} needs a number, got {value!r}")


def _add_lattice_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--lattice", help="catalog lattice name")
    source.add_argument("--spec", dest="spec_path", help="lattice document (JSON)")
    parser.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                        help="catalog parameter such as R=2 or R1=1.5")


def _add_query(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--from", dest="source", type=int, required=True, help="source site (1-based)")
    parser.add_argument("--to", dest="target", type=int, required=True, help="target site (1-based)")
    parser.add_argument("--offset", type=_int_list, required=True, help="target cell, e.g. 1,0")


def _add_quadrature(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--order", type=int, help="initial midpoint order per dimension (even)")
    parser.add_argument("--rel-error", type=float, default=1e-5, help="target relative error")
    parser.add_argument("--max-refinements", type=int, default=3)
    parser.add_argument("--strict", action="store_true", help="treat non-convergence as an error")


def _add_output(parser: argparse.ArgumentParser, default: OutputFormat = OutputFormat.JSON) -> None:
    parser.add_argument("--format", dest="output", choices=[f.value for f in OutputFormat], default=default.value)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gridohm", description="Two-point resistance on periodic resistor networks")
    parser.add_argument("--version", action="version", version=f"gridohm {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    compute = commands.add_parser("compute", help="resistance between two nodes")
    _add_lattice_source(compute)
    _add_query(compute)
    compute.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.SPECTRAL.value)
    compute.add_argument("--torus", dest="torus_sizes", type=_int_list, help="torus sizes for --engine torus")
    _add_quadrature(compute)
    _add_output(compute)
    compute.add_argument("--timing", action="store_true", help="include wall time in the output")

    table = commands.add_parser("table", help="all site pairs for small offsets")
    _add_lattice_source(table)
    table.add_argument("--max-offset", type=int, default=0)
    _add_quadrature(table)
    _add_output(table)
    table.add_argument("--timing", action="store_true")

    converge = commands.add_parser("converge", help="spectral orders and torus sizes side by side")
    _add_lattice_source(converge)
    _add_query(converge)
    converge.add_argument("--orders", type=_int_list, default=(), help="midpoint orders, e.g. 32,64,128")
    converge.add_argument("--sizes", type=_int_list, default=(), help="torus sizes per dimension, e.g. 8,16,32")
    _add_output(converge)

    catalog = commands.add_parser("catalog", help="list lattices or export one as a document")
    catalog.add_argument("--export", metavar="NAME")
    catalog.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
    catalog.add_argument("--out", help="write the exported document to this file")
    _add_output(catalog, OutputFormat.TEXT)

    verify = commands.add_parser("verify", help="run the reference-value checks")
    verify.add_argument("--profile", default="default", choices=["default", "quick"])
    verify.add_argument("--only", metavar="GROUP", help="run one group, e.g. bcc")
    verify.add_argument("--report", dest="report_path", help="write the per-check JSON report here")
    _add_output(verify, OutputFormat.TEXT)
    return parser


def setup_logging(verbosity: int) -> None:
    level = get_settings().log_level
    if verbosity == 1:
        level = "INFO"
    elif verbosity >= 2:
        level = "DEBUG"
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _params(pairs: List[Tuple[str, float]]) -> Dict[str, float]:
    return dict(pairs)


def _request(args: argparse.Namespace) -> RunRequest:
    fields = {
        "lattice": args.lattice,
        "spec_path": args.spec_path,
        "params": _params(args.param),
        "output": OutputFormat(args.output),
    }
    if getattr(args, "source", None) is not None:
        fields.update(source=args.source - 1, target=args.target - 1, offset=args.offset)
    if hasattr(args, "rel_error"):
        fields["quadrature"] = QuadratureConfig(
            order=args.order,
            target_relative_error=args.rel_error,
            max_refinements=args.max_refinements,
            strict=args.strict,
        )
    for name in ("engine", "torus_sizes", "max_offset", "orders", "sizes", "timing"):
        if getattr(args, name, None) is not None:
            fields[name] = getattr(args, name)
    return RunRequest(**fields)


def dispatch(args: argparse.Namespace) -> CommandResult:
    if args.command == "catalog":
        result = cmd_catalog(args.export, _params(args.param) or None, OutputFormat(args.output))
        if args.out is not None and args.export is not None:
            try:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(result.output + "\n")
            except OSError as e:
                raise InvalidRequestError(f"cannot write {args.out}: {e}", {"path": args.out})
            return CommandResult(output=args.out)
        return result
    if args.command == "verify":
        return cmd_verify(args.profile, args.only, args.report_path, OutputFormat(args.output))
    request = _request(args)
    if args.command == "compute":
        return cmd_compute(request)
    if args.command == "table":
        return cmd_table(request)
    return cmd_converge(request)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except GridohmError as e:
        print(render_error(e))
        return EXIT_INVALID

    setup_logging(args.verbose)
    try:
        result = dispatch(args)
    except NoConvergenceError as e:
        logger.warning(f"No convergence: {e.message}")
        partial = e.result if isinstance(e.result, list) else [e.result]
        print(render_json({"error": e.to_dict(), "values": [r.value for r in partial]}))
        return EXIT_NOT_CONVERGED
    except ValidationError as e:
        print(render_error(InvalidRequestError("invalid request", {"errors": [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()]})))
        return EXIT_INVALID
    except GridohmError as e:
        logger.error(f"{e.code}: {e.message}")
        print(render_error(e))
        return EXIT_INVALID

    print(result.output)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
