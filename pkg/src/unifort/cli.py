"""Command line: transpile, graph, perfmodel, run, verify.

Exit codes: 0 success, 1 diagnostics or failed verification, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .analysis import build_callgraph, color_callgraph, to_dot
from .analysis.callgraph import DEFAULT_EXTERNALS
from .codegen.config import TARGETS, BuildConfig
from .diagnostics import TranspileError
from .frontend import load_program
from .interpreter.runtime import InterpreterError

EXIT_OK, EXIT_DIAG, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _grid(text: str) -> tuple:
    try:
        parts = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be nx,ny,nz integers, got {text!r}") from None
    if len(parts) != 3 or min(parts) <= 0:
        raise argparse.ArgumentTypeError(f"grid must be three positive integers, got {text!r}")
    return parts


def _check_sources(paths) -> list:
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise UsageError(f"no such source file: {', '.join(missing)}")
    return [Path(p) for p in paths]


def _report_diagnostics(exc: TranspileError) -> int:
    for d in exc.diagnostics:
        print(str(d), file=sys.stderr)
    return EXIT_DIAG


def cmd_transpile(args) -> int:
    from .pipeline import transpile, write_units

    sources = _check_sources(args.sources)
    build = BuildConfig.load(args.config) if args.config else BuildConfig()
    out_dir = args.out_dir or build.output_dir or "."
    result = transpile(sources, args.target, build)
    for path in write_units(result, out_dir):
        print(path)
    return EXIT_OK


def cmd_graph(args) -> int:
    sources = _check_sources(args.sources)
    program = load_program(sources)
    graph = build_callgraph(program, DEFAULT_EXTERNALS)
    archs = ("cpu", "gpu") if args.arch == "all" else (args.arch,)
    for arch in archs:
        colors, diags = color_callgraph(graph, arch, strict=False)
        for d in diags:
            print(str(d), file=sys.stderr)
        sys.stdout.write(to_dot(graph, colors, arch))
    return EXIT_OK


def cmd_perfmodel(args) -> int:
    from .perfmodel import ModelError, ModelParams, get_machine, model_report

    try:
        machine = get_machine(args.machine)
        nx, ny, nz = args.grid
        params = ModelParams.preset(nx, ny, nz, args.steps, cached=args.cached, m_htod=args.m_htod)
        report = model_report(machine, params, args.target)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAG
    print(report.text())
    if args.csv:
        path = Path(args.csv)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(report.csv_header())
            writer.writerow(report.csv_row())
    if args.plot:
        from .plotting import plot_model

        try:
            print(f"plot: {plot_model(machine, params, args.plot)}")
        except ModelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIAG
    return EXIT_OK


def _setup(args):
    from .interpreter.reference import WeatherSetup

    nx, ny, nz = args.grid
    try:
        return WeatherSetup(nx, ny, nz, args.steps, args.dv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args) -> int:
    from .interpreter.fields import write_field
    from .interpreter.harness import run_variant

    setup = _setup(args)
    try:
        result = run_variant(args.variant, setup)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    e = result.energy
    print(f"{args.variant}: {setup.nx}x{setup.ny}x{setup.nz}, {setup.steps} steps, "
          f"sum={float(e.sum()):.17g} min={float(e.min()):.17g} max={float(e.max()):.17g}")
    if args.dump:
        print(f"dump: {write_field(args.dump, e, setup.lower)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .interpreter.fields import compare_fields, load_field
    from .interpreter.harness import run_variant

    if args.dumps:
        a, lower = load_field(Path(args.dumps[0]).read_text(encoding="utf-8"))
        b, _ = load_field(Path(args.dumps[1]).read_text(encoding="utf-8"))
        try:
            cmp = compare_fields(a, b, args.tol, lower)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIAG
        print(f"{args.dumps[0]} vs {args.dumps[1]}: {cmp}")
        return EXIT_OK if cmp.passed else EXIT_DIAG
    setup = _setup(args)
    names = args.variants or ["reference", "original"]
    if len(names) < 2:
        raise UsageError("verify needs at least two variants")
    try:
        base = run_variant(names[0], setup).energy
        ok = True
        for name in names[1:]:
            cmp = compare_fields(run_variant(name, setup).energy, base, args.tol, setup.lower)
            print(f"{name} vs {names[0]}: {cmp}")
            ok &= cmp.passed
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK if ok else EXIT_DIAG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unifort", description="Directive-based Fortran transpiler toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transpile", help="generate backend sources")
    p.add_argument("sources", nargs="+")
    p.add_argument("--target", choices=sorted(TARGETS), default="cpu-openmp")
    p.add_argument("--config", help="build configuration file (KEY = VALUE lines)")
    p.add_argument("--out-dir", help="output directory (default: config OUTPUT_DIR or .)")
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("graph", help="print the colored call graph as DOT")
    p.add_argument("sources", nargs="+")
    p.add_argument("--arch", choices=("cpu", "gpu", "all"), default="all")
    p.add_argument("--format", choices=("dot",), default="dot")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("perfmodel", help="evaluate the bandwidth performance model")
    p.add_argument("--machine", required=True)
    p.add_argument("--grid", type=_grid, default=(128, 128, 128), help="nx,ny,nz")
    p.add_argument("--steps", type=int, default=100)
    cache = p.add_mutually_exclusive_group()
    cache.add_argument("--cached", dest="cached", action="store_true", default=True)
    cache.add_argument("--uncached", dest="cached", action="store_false")
    p.add_argument("--m-htod", type=float, default=0.0, help="values moved host<->device per point")
    p.add_argument("--target", choices=("cpu1", "cpu", "gpu", "condition"), default="gpu")
    p.add_argument("--csv", help="append a CSV row to this file")
    p.add_argument("--plot", help="save a model-time chart to this image file")
    p.set_defaults(func=cmd_perfmodel)

    for name, fn, help_ in (("run", cmd_run, "run one variant of the weather corpus"),
                            ("verify", cmd_verify, "compare variants or field dumps")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--grid", type=_grid, default=(16, 16, 8), help="nx,ny,nz")
        p.add_argument("--steps", type=int, default=10)
        p.add_argument("--dv", type=float, default=0.1, help="diffusion velocity")
        if name == "run":
            p.add_argument("--variant", default="reference")
            p.add_argument("--dump", help="write the final field to this file")
        else:
            p.add_argument("--variants", nargs="+", help="first one is the baseline")
            p.add_argument("--dumps", nargs=2, metavar=("A", "B"))
            p.add_argument("--tol", type=float, default=1e-12)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TranspileError as exc:
        return _report_diagnostics(exc)
    except InterpreterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAG


if __name__ == "__main__":
    sys.exit(main())
