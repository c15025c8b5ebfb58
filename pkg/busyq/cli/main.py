"""`busyq` command line.

Exit status: 0 on success, 1 on validation errors, 2 on numerical failures (and on a
failing `verify` suite). Errors are written to stderr as one JSON object
{"error": CODE, "message": ..., "path": ...}.
"""
from __future__ import annotations
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from busyq import config
from busyq.cli.commands import run
from busyq.errors import BusyqError, ModelValidationError, NumericalError
from busyq.schemas.run_schemas import ErrorReport, GridSpec, RunSpec
from busyq.analysis.laplace_inversion import InversionConfig
from busyq.telemetry.tracing import flush
from busyq.utils.json_utils import pointer

logger = logging.getLogger("busyq")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2; usage errors are validation errors
        raise ModelValidationError(message, code="INVALID_ARGUMENT", path="/argv")


def _common(p: argparse.ArgumentParser, *, inversion: bool = False) -> None:
    p.add_argument("--out", choices=["csv", "json"], default="csv")
    p.add_argument("--output", help="write to this file instead of stdout")
    if inversion:
        p.add_argument("--invert-method", choices=["gaver-stehfest", "talbot"])
        p.add_argument("--invert-order", type=int)
        p.add_argument("--extended-precision", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="busyq", description="M|G|oo busy-period and network sojourn analysis")
    parser.add_argument("--log-level", default=None, help="overrides BUSYQ_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transform", help="busy-period transform B(s) on an s grid")
    p.add_argument("--model", required=True)
    p.add_argument("--s-grid", required=True)
    _common(p)

    p = sub.add_parser("moments", help="E[B^n] for n = 1..N")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--method", choices=["auto", "recursion", "closed"], default="auto")
    _common(p)

    p = sub.add_parser("busy-law", help="busy-period d.f. on a t grid")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--method", choices=["auto", "closed", "series", "inversion"], default="auto")
    _common(p, inversion=True)

    tail = sub.add_parser("tail", help="service-tail recovery and feasibility checks")
    tail_sub = tail.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = tail_sub.add_parser("recover")
    p.add_argument("--hbar", required=True, help='rational:"<poly>/<poly>" in s')
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--grid", required=True)
    _common(p, inversion=True)
    p = tail_sub.add_parser("check")
    p.add_argument("--a", required=True, help="expression in t")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--grid", required=True)
    _common(p)

    network = sub.add_parser("network", help="open infinite-server networks")
    net_sub = network.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = net_sub.add_parser("solve")
    p.add_argument("--net", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--s-grid")
    mode.add_argument("--moments", action="store_true")
    mode.add_argument("--invert", metavar="GRID")
    _common(p, inversion=True)

    sim = sub.add_parser("sim", help="discrete-event oracle")
    sim_sub = sim.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = sim_sub.add_parser("queue")
    p.add_argument("--model", required=True)
    p.add_argument("--periods", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--warmup", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--samples", action="store_true", help="emit every duration instead of a summary")
    _common(p)
    p = sim_sub.add_parser("network")
    p.add_argument("--net", required=True)
    p.add_argument("--customers", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--samples", action="store_true")
    _common(p)

    p = sub.add_parser("verify", help="cross-module acceptance suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller samples")
    _common(p)
    return parser


def _grid(text: Optional[str], path: str) -> Optional[GridSpec]:
    return GridSpec.parse(text, path=path) if text else None


def to_run_spec(ns: argparse.Namespace) -> RunSpec:
    command = ns.command if getattr(ns, "action", None) is None else f"{ns.command} {ns.action}"
    skip = {"command", "action", "out", "output", "log_level", "model", "net", "grid", "s_grid",
            "seed", "invert_method", "invert_order", "extended_precision", "invert"}
    options: Dict[str, Any] = {("lambda" if k == "lam" else k): v for k, v in vars(ns).items() if k not in skip}
    inversion = InversionConfig(
        method=getattr(ns, "invert_method", None),
        order=getattr(ns, "invert_order", None),
        extended_precision=bool(getattr(ns, "extended_precision", False)),
    )
    grid_text = getattr(ns, "grid", None) or getattr(ns, "invert", None)
    return RunSpec(
        command=command,
        model=getattr(ns, "model", None),
        net=getattr(ns, "net", None),
        grid=_grid(grid_text, "/grid"),
        s_grid=_grid(getattr(ns, "s_grid", None), "/s_grid"),
        out=ns.out,
        inversion=inversion,
        seed=getattr(ns, "seed", 0) or 0,
        options=options,
    )


def _report(err: BusyqError) -> None:
    sys.stderr.write(json.dumps(ErrorReport(**err.to_dict()).model_dump()) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        config.configure_logging(ns.log_level)
        status, text = run(to_run_spec(ns))
        if ns.output:
            try:
                Path(ns.output).write_text(text, encoding="utf-8")
            except OSError as e:
                raise ModelValidationError(f"cannot write {ns.output}: {e.strerror or e}",
                                           code="OUTPUT_PATH", path="/output") from e
        else:
            sys.stdout.write(text)
        return status
    except BusyqError as e:
        logger.debug("command failed: %s", e, exc_info=True)
        _report(e)
        return e.exit_status
    except ValidationError as e:
        first = e.errors()[0]
        _report(ModelValidationError(first.get("msg", str(e)), path=pointer(first.get("loc", ()))))
        return 1
    except Exception as e:
        # numpy / scipy failures outside the coded paths
        logger.debug("unexpected failure", exc_info=True)
        err = NumericalError(f"{type(e).__name__}: {e}", code="UNEXPECTED_FAILURE")
        _report(err)
        return err.exit_status
    finally:
        flush()


if __name__ == "__main__":
    sys.exit(main())
