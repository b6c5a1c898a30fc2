"""Command-line entry point: validate | gen | comm | run | serve."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .codegen import CodegenError, generate_project, write_project
from .comm import CommError, derive_pubsub, emit_comm_config
from .debug import protocol
from .debug.server import serve
from .diagnostics import Severity, ValidationReport
from .format import parse_model
from .st.interp import RuntimeFault
from .st.sim import Scenario, SimulationError, parse_scenario, run_simulation
from .validator import validate_model

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

_RED, _YELLOW, _RESET = "\033[31m", "\033[33m", "\033[0m"


class _Failure(Exception):
    def __init__(self, status: int, report: ValidationReport | None = None,
                 message: str | None = None):
        super().__init__(message or "")
        self.status = status
        self.report = report
        self.message = message


def _color_enabled() -> bool:
    mode = os.environ.get("MASPC_COLOR", "auto")
    if mode == "never":
        return False
    return sys.stdout.isatty()


def _render_report(report: ValidationReport) -> str:
    if not _color_enabled():
        return report.to_text()
    lines = []
    for diag in report.diagnostics:
        color = _RED if diag.severity is Severity.ERROR else _YELLOW
        lines.append(f"{color}{diag}{_RESET}")
    lines.append(f"{len(report.errors)} errors, "
                 f"{len(report.warnings)} warnings")
    return "\n".join(lines) + "\n"


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Failure(EXIT_USAGE, message=f"cannot read {path}: {exc}")


def _parse(args) -> tuple:
    model, diags = parse_model(_read(args.model), strict=not args.lenient)
    if any(d.severity is Severity.ERROR for d in diags):
        raise _Failure(EXIT_VALIDATION, ValidationReport(diags))
    return model, diags


def _project(args):
    model, _ = _parse(args)
    try:
        return generate_project(model, allow_widening=args.allow_widening)
    except CodegenError as exc:
        raise _Failure(EXIT_VALIDATION, ValidationReport(exc.diagnostics))


def _scenario(args) -> Scenario:
    if args.scenario is not None:
        scenario, diags = parse_scenario(_read(args.scenario))
        if any(d.severity is Severity.ERROR for d in diags):
            raise _Failure(EXIT_VALIDATION, ValidationReport(diags))
    else:
        scenario = Scenario(0)
    if getattr(args, "cycles", None) is not None:
        scenario.cycles = args.cycles
    return scenario


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    model, parse_diags = _parse(args)
    _, report = validate_model(model, allow_widening=args.allow_widening)
    combined = ValidationReport([*parse_diags, *report.diagnostics])
    if args.json:
        sys.stdout.write(combined.to_json())
    else:
        sys.stdout.write(_render_report(combined))
    return EXIT_OK if combined.passed else EXIT_VALIDATION


def cmd_gen(args) -> int:
    project = _project(args)
    written = write_project(project, args.out)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_comm(args) -> int:
    model, _ = _parse(args)
    resolved, report = validate_model(model, allow_widening=args.allow_widening)
    if not report.passed:
        raise _Failure(EXIT_VALIDATION, report)
    try:
        config = derive_pubsub(resolved)
    except CommError as exc:
        raise _Failure(EXIT_VALIDATION, ValidationReport(exc.diagnostics))
    _write_output(emit_comm_config(config), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    if args.scenario is None and args.cycles is None:
        print("error: run needs --scenario and/or --cycles", file=sys.stderr)
        return EXIT_USAGE
    project = _project(args)
    scenario = _scenario(args)
    try:
        trace = run_simulation(project, scenario)
    except SimulationError as exc:
        print(f"error {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeFault as fault:
        print(f"error E_RUNTIME: {fault}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_output(trace.to_jsonl(), args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    project = _project(args)
    scenario = _scenario(args)

    def ready(server) -> None:
        print(f"debug service listening on "
              f"ws://{server.host}:{server.port}{protocol.WS_PATH} "
              f"(plain TCP on the same port)", flush=True)
        if args.ui is not None:
            print(f"ui served from {args.ui} at "
                  f"http://{server.host}:{server.port}/", flush=True)

    try:
        serve(project, scenario, host=args.host, port=args.port,
              ui_dir=args.ui, ready=ready)
    except SimulationError as exc:
        print(f"error {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot listen on port {args.port}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("model", help="model file (.maspm)")
    sub.add_argument("--allow-widening", action="store_true",
                     help="accept INT->DINT and REAL->LREAL connections "
                          "with a warning")
    sub.add_argument("--lenient", action="store_true",
                     help="downgrade unknown document keys to warnings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maspc",
        description="SysML-AT toolchain: validate models, generate "
                    "IEC 61131-3 ST, derive pub/sub comm config, simulate, "
                    "and serve a live debugger.")
    parser.add_argument("--version", action="version",
                        version=f"maspc {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="check a model, print a report")
    _add_common(p)
    p.add_argument("--json", action="store_true",
                   help="machine-readable report")
    p.set_defaults(func=cmd_validate)

    p = subs.add_parser("gen", help="generate ST artifacts and comm.json")
    _add_common(p)
    p.add_argument("-o", "--out", default="out", help="output directory")
    p.set_defaults(func=cmd_gen)

    p = subs.add_parser("comm", help="derive the pub/sub comm config")
    _add_common(p)
    p.add_argument("-o", "--out", default=None,
                   help="write to a file instead of stdout")
    p.set_defaults(func=cmd_comm)

    p = subs.add_parser("run", help="batch-simulate and print the trace")
    _add_common(p)
    p.add_argument("--scenario", default=None, help="scenario file (.scn.json)")
    p.add_argument("--cycles", type=int, default=None,
                   help="cycle count (overrides the scenario)")
    p.add_argument("-o", "--out", default=None,
                   help="write the JSONL trace to a file")
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("serve", help="host the live debug service")
    _add_common(p)
    p.add_argument("--scenario", default=None,
                   help="scenario whose stimulus feeds each cycle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=protocol.DEFAULT_PORT)
    p.add_argument("--ui", nargs="?", const="frontend/dist", default=None,
                   help="also serve the monitor UI bundle (default dir: "
                        "frontend/dist)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return EXIT_OK
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _Failure as exc:
        if exc.report is not None:
            sys.stdout.write(_render_report(exc.report))
        if exc.message:
            print(f"error: {exc.message}", file=sys.stderr)
        return exc.status
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
