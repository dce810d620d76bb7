"""``perimetry`` command line.

Exit status: 0 when every clause passes, 1 when a verdict fails (artifacts are
still written), 2 on invalid input or any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import __version__
from .boundary import common_boundary, common_boundary_csv, relative_perimeter
from .demos import DEMOS, demo_universe
from .errors import BudgetExhausted, PerimetryError
from .geometry import (
    MARGIN_FACTOR,
    Universe,
    area,
    atomic_write,
    perimeter,
    read_geometry,
    write_geometry,
)
from .render import svg_document, trace_svg
from .verify import ApproxReport, check_clauses, crofton_perimeter_oracle, raster_area_oracle
from .weighted import as_density, directional, weighted_area, weighted_perimeter

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perimetry", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def outputs(sp, svg=True):
        sp.add_argument("--json", help="write the report as JSON")
        sp.add_argument("--csv", help="write the report as CSV")
        if svg:
            sp.add_argument("--svg", help="write an SVG overlay")

    def universe(sp):
        sp.add_argument("--universe-margin", type=float, default=MARGIN_FACTOR,
                        help="Universe margin as a multiple of the bounding-box diagonal")

    def densities(sp):
        sp.add_argument("--f", help="volume density, e.g. const:1 or exp-x")
        sp.add_argument("--g", help="perimeter density, e.g. const:1 or cusp-g")
        sp.add_argument("--g-modulation", default="isotropic", help="isotropic, ellipse:a,b or lp:p")

    sp = sub.add_parser("measure", help="area, perimeter, relative perimeter and common boundary")
    sp.add_argument("E")
    sp.add_argument("omega", nargs="?")
    densities(sp)
    outputs(sp, svg=False)
    universe(sp)

    for name, text in (("remove-boundary", "remove the common boundary with Ω"),
                       ("approx", "approximate inside a container"),
                       ("approx-weighted", "approximate with volume and perimeter densities")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("E")
        sp.add_argument("omega")
        sp.add_argument("--eps", type=_positive, required=True)
        sp.add_argument("-o", "--out", help="write the approximant F as geometry JSON")
        if name != "remove-boundary":
            sp.add_argument("--delta", type=_positive, help="starting mollification radius")
            sp.add_argument("--grid", type=_positive, help="grid spacing (default delta/3)")
        if name == "approx-weighted":
            densities(sp)
            sp.add_argument("--bounded", action="store_true", help="truncate to a bounded approximant")
            sp.add_argument("--M", type=_positive, help="bound with g <= M f, needed by --bounded")
        if name == "remove-boundary":
            sp.add_argument("--trace-csv", help="write the per-pass trace as CSV")
            sp.add_argument("--boundary-csv", help="write the common boundary of the input as CSV")
        outputs(sp)
        universe(sp)

    sp = sub.add_parser("verify", help="check the clauses for a given approximant")
    sp.add_argument("E")
    sp.add_argument("F")
    sp.add_argument("omega")
    sp.add_argument("--eps", type=_positive, required=True)
    sp.add_argument("--mode", choices=("pushout", "approx", "weighted"))
    densities(sp)
    outputs(sp)
    universe(sp)

    sp = sub.add_parser("demo", help="counterexample curves")
    sp.add_argument("which", choices=sorted(DEMOS))
    outputs(sp)

    sp = sub.add_parser("oracle", help="compare area and perimeter with independent estimates")
    sp.add_argument("E")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lines", type=int, default=100_000)
    sp.add_argument("--resolution", type=int, default=64)
    outputs(sp, svg=False)
    universe(sp)
    return p


def _emit_report(args, report: ApproxReport) -> None:
    if args.json:
        atomic_write(args.json, report.to_json())
    if args.csv:
        atomic_write(args.csv, report.to_csv())
    status = "pass" if report.verdict else "fail: " + ", ".join(report.failed)
    print(f"{report.mode}: {status}")
    for k, (v, b) in report.clauses.items():
        print(f"  {k}: {v:.6g} < {b:.6g} {'ok' if v < b else 'FAIL'}")


def _dump(path: Optional[str], rows: dict) -> None:
    if path:
        atomic_write(path, json.dumps(rows, indent=2, sort_keys=True) + "\n")


def _dump_csv(path: Optional[str], rows: dict) -> None:
    if path:
        atomic_write(path, "quantity,value\n" + "".join(f"{k},{v!r}\n" for k, v in rows.items()))


def cmd_measure(args) -> int:
    E = read_geometry(args.E)
    rows = {"area": area(E), "perimeter": perimeter(E)}
    omega = read_geometry(args.omega) if args.omega else None
    if omega is not None:
        cb = common_boundary(E, omega)
        rows.update(relative_perimeter=relative_perimeter(E, omega), gamma_plus=cb.length_plus,
                    gamma_minus=cb.length_minus)
    if args.f:
        rows["f_volume"] = weighted_area(E, as_density(args.f))
    if args.g:
        g = directional(args.g, args.g_modulation)
        rows["g_perimeter"] = weighted_perimeter(E, g)
        if omega is not None:
            rows["g_relative_perimeter"] = weighted_perimeter(E, g, omega)
    for k, v in rows.items():
        print(f"{k}: {v!r}")
    _dump(args.json, rows)
    _dump_csv(args.csv, rows)
    return EXIT_PASS


def _pipeline(args) -> int:
    from .pushout import remove_common_boundary
    from .smooth import approximate_in_container
    from .weighted import approximate_weighted

    E, omega = read_geometry(args.E), read_geometry(args.omega)
    universe = Universe.around(E, omega, margin_factor=args.universe_margin)
    trace = None
    try:
        if args.command == "remove-boundary":
            if args.boundary_csv:
                atomic_write(args.boundary_csv, common_boundary_csv(common_boundary(E, omega)))
            F, trace = remove_common_boundary(E, omega, args.eps, universe)
            report = check_clauses(E, F, omega, args.eps, mode="pushout", universe=universe, trace=trace)
        elif args.command == "approx":
            F, report = approximate_in_container(E, omega, args.eps, args.delta, args.grid, universe)
        else:
            F, report = approximate_weighted(E, omega, args.f or "const:1", args.g or "const:1", args.eps,
                                             want_bounded=args.bounded, M=args.M,
                                             modulation=args.g_modulation, delta=args.delta,
                                             h_g=args.grid, universe=universe)
    except BudgetExhausted as exc:
        if exc.result is None:
            raise
        print(f"budget exhausted: {exc}", file=sys.stderr)
        F, report = exc.result, exc.report
        if report is None:
            report = check_clauses(E, F, omega, args.eps, mode="pushout", universe=universe)
    if args.out:
        write_geometry(args.out, F)
    if trace is not None and args.trace_csv:
        atomic_write(args.trace_csv, trace.to_csv())
    if args.svg:
        doc = (trace_svg(universe, E, omega, F, trace) if trace is not None
               else svg_document(universe, E=E, omega=omega, F=F))
        atomic_write(args.svg, doc)
    _emit_report(args, report)
    return EXIT_PASS if report.verdict else EXIT_FAIL


def cmd_verify(args) -> int:
    E, F, omega = read_geometry(args.E), read_geometry(args.F), read_geometry(args.omega)
    universe = Universe.around(E, F, omega, margin_factor=args.universe_margin)
    f = as_density(args.f) if args.f else None
    g = directional(args.g, args.g_modulation) if args.g else None
    report = check_clauses(E, F, omega, args.eps, f=f, g=g, mode=args.mode, universe=universe)
    if args.svg:
        atomic_write(args.svg, svg_document(universe, E=E, omega=omega, F=F))
    _emit_report(args, report)
    return EXIT_PASS if report.verdict else EXIT_FAIL


def cmd_demo(args) -> int:
    result = DEMOS[args.which]()
    text = result.to_csv()
    if args.csv:
        atomic_write(args.csv, text)
    else:
        sys.stdout.write(text)
    if args.json:
        _dump(args.json, {"demo": result.name, "columns": result.header, "rows": result.rows})
    if args.svg:
        atomic_write(args.svg, svg_document(demo_universe(result), E=result.E, F=result.shapes[-1],
                                            lines=result.lines))
    return EXIT_PASS


def cmd_oracle(args) -> int:
    E = read_geometry(args.E)
    a, P = area(E), perimeter(E)
    raster = raster_area_oracle(E, args.resolution)
    est, err = crofton_perimeter_oracle(E, args.lines, args.seed)
    rows = {"area": a, "raster_area": raster, "area_bound": P / args.resolution,
            "perimeter": P, "crofton_perimeter": est, "crofton_stderr": err}
    ok_area = abs(raster - a) <= P / args.resolution
    ok_per = abs(est - P) <= 3 * err if err > 0 else abs(est - P) == 0
    for k, v in rows.items():
        print(f"{k}: {v!r}")
    print(f"area: {'ok' if ok_area else 'FAIL'}  perimeter: {'ok' if ok_per else 'FAIL'}")
    _dump(args.json, rows)
    _dump_csv(args.csv, rows)
    return EXIT_PASS if ok_area and ok_per else EXIT_FAIL


COMMANDS = {
    "measure": cmd_measure,
    "remove-boundary": _pipeline,
    "approx": _pipeline,
    "approx-weighted": _pipeline,
    "verify": cmd_verify,
    "demo": cmd_demo,
    "oracle": cmd_oracle,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (PerimetryError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
