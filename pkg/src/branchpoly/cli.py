"""Command-line entry point: ``branchpoly {polygon,tables,profile,opf}``.

Exit status is 0 on success, 1 on usage or domain errors and 2 when the
LP solver reports the model infeasible or unbounded.  Output files go to
``--out`` or, when absent, to ``$BRANCHPOLY_OUT`` or the current directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import halfplanes, lopf, polygeom
from .caseio import CaseFormatError, branch_limits, load_case

TABLE1_ERRORS = (0.1, 0.2, 0.3)
TABLE1_LIMITS = (16, 220, 880, 1800)
SWEEP_ERRORS = np.geomspace(1e-3, 1.0, 31)
OUT_ENV = "BRANCHPOLY_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclasses.dataclass
class RunReport:
    command: list[str]
    timings_ms: dict[str, float] = dataclasses.field(default_factory=dict)
    outputs: list[str] = dataclasses.field(default_factory=list)
    summary: dict = dataclasses.field(default_factory=dict)
    error: str | None = None

    def timed(self, phase: str):
        report = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                report.timings_ms[phase] = (time.perf_counter() - self.t0) * 1000.0
                return False

        return _Timer()

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str, report: RunReport | None = None) -> Path:
    path.write_text(text)
    if report is not None:
        report.outputs.append(str(path))
    return path


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# polygon --------------------------------------------------------------------


def cmd_polygon(args) -> int:
    limit = polygeom.CircleLimit(args.s, index=0)
    poly = polygeom.build_polygon(limit, args.e, args.kind)
    cs = halfplanes.polygon_to_constraints(poly, branch=0)
    out = _out_dir(args)
    stem = f"polygon_{args.kind}_s{args.s:g}_e{args.e:g}"
    if args.format == "csv":
        _write(out / f"{stem}_constraints.csv", halfplanes.to_csv([cs]))
        _write_csv(out / f"{stem}_vertices.csv", ["vertex", "p", "q"],
                   [[k, _fmt(p), _fmt(q)] for k, (p, q) in enumerate(poly.vertices, start=1)])
    else:
        _write(out / f"{stem}_constraints.json", halfplanes.to_json([cs]))
        verts = [{"vertex": k, "p": float(_fmt(p)), "q": float(_fmt(q))}
                 for k, (p, q) in enumerate(poly.vertices, start=1)]
        _write(out / f"{stem}_vertices.json", json.dumps(verts, indent=1))
    print(poly.m)
    return 0


# tables ---------------------------------------------------------------------


def table1_grid():
    """``{(kind, e, s): side count}`` over the standard error/limit grid."""
    grid = {}
    for kind in ("regular", "irregular"):
        for e in TABLE1_ERRORS:
            for s in TABLE1_LIMITS:
                grid[kind, e, s] = polygeom.side_count(s, e, kind)
    return grid


def table2_totals(cases: dict, errors=TABLE1_ERRORS):
    """``{(kind, e, case_name): total branch constraints}``."""
    out = {}
    for name, case in cases.items():
        limits = branch_limits(case)
        for kind in ("regular", "irregular"):
            for e in errors:
                out[kind, e, name] = halfplanes.count_system_constraints(limits, e, kind)
    return out


def cmd_tables(args) -> int:
    out = _out_dir(args)
    if args.which == "table1":
        grid = table1_grid()
        header = ["e_mva"] + [f"regular_{s}" for s in TABLE1_LIMITS] + [
            f"irregular_{s}" for s in TABLE1_LIMITS]
        rows = [[f"{e:g}"] + [grid["regular", e, s] for s in TABLE1_LIMITS]
                + [grid["irregular", e, s] for s in TABLE1_LIMITS] for e in TABLE1_ERRORS]
        _write_csv(out / "table1.csv", header, rows)
    else:
        if not args.case:
            raise UsageError("tables table2 needs at least one --case")
        cases = {}
        for ref in args.case:
            case = load_case(ref)
            cases[case.name] = case
        totals = table2_totals(cases)
        names = list(cases)
        header = ["e_mva", "kind"] + names
        rows = [[f"{e:g}", kind] + [totals[kind, e, n] for n in names]
                for kind in ("regular", "irregular") for e in TABLE1_ERRORS]
        _write_csv(out / "table2.csv", header, rows)
        for name, case in cases.items():
            unrated = sum(1 for br in case.branches if br.rate_mva <= 0)
            if unrated:
                print(f"# note: {name} has {unrated} in-service branches with no rating; "
                      "they add no constraints", file=sys.stderr)
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))
    return 0


# profile --------------------------------------------------------------------


def cmd_profile(args) -> int:
    limit = polygeom.CircleLimit(args.s)
    if args.mq is not None:
        poly = polygeom.irregular_from_mq(limit, args.mq)
    else:
        poly = polygeom.build_irregular(limit, args.e)
    out = _out_dir(args)
    stem = f"profile_s{args.s:g}_mq{poly.mq}"
    _write_csv(out / f"{stem}_sides.csv", ["side", "delta_theta", "length", "sagitta"],
               [[k, _fmt(sd.delta_theta), _fmt(sd.length), _fmt(sd.sagitta)]
                for k, sd in enumerate(poly.sides, start=1)])
    rows = []
    for s in TABLE1_LIMITS:
        for e in SWEEP_ERRORS:
            mq = polygeom.irregular_quadrant_count(s, float(e))
            d1, lfg, e1 = polygeom.first_segment_stats(s, mq)
            rows.append([s, _fmt(e), mq, 4 * mq, _fmt(d1), _fmt(math.degrees(d1)),
                         _fmt(lfg), _fmt(e1)])
    _write_csv(out / "profile_sweep.csv",
               ["s_mva", "e_min", "mq", "m_irr", "delta_theta_1", "delta_theta_1_deg",
                "l_fg", "e_1"], rows)
    print(poly.m)
    return 0


# opf --------------------------------------------------------------------------


def cmd_opf(args, report: RunReport) -> int:
    out = _out_dir(args)
    with report.timed("parse"):
        case = load_case(args.case)
    report.summary["case"] = case.name
    with report.timed("build"):
        model = lopf.assemble(case, args.e, args.kind)
    with report.timed("solve"):
        sol = lopf.solve_model(model)
    stem = f"opf_{case.name}_{args.kind}_e{args.e:g}"
    _write(out / f"{stem}.json", sol.to_json(), report)
    _write(out / f"{stem}_flows.csv", lopf.flows_csv(sol), report)
    report.summary.update({
        "kind": args.kind, "e": args.e, "objective": sol.objective,
        "polygon_rows": sol.polygon_rows, "binding": len(sol.binding),
        "iterations": sol.iterations, "max_balance_residual": sol.max_balance_residual,
    })
    print(f"{sol.objective:.6f}")
    return 0


# entry ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="branchpoly", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def kind_arg(p):
        p.add_argument("--kind", choices=("regular", "irregular"), default="irregular")

    p = sub.add_parser("polygon", help="half-plane constraints for one branch")
    p.add_argument("--s", type=float, required=True, help="branch rating, MVA")
    p.add_argument("--e", type=float, required=True, help="sagitta error, MVA")
    kind_arg(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")

    p = sub.add_parser("tables", help="side-count tables")
    p.add_argument("which", choices=("table1", "table2"))
    p.add_argument("--case", action="append", help="case file or bundled case name")
    p.add_argument("--out")

    p = sub.add_parser("profile", help="per-side error/length and first-side sweep")
    p.add_argument("--s", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mq", type=int)
    g.add_argument("--e", type=float)
    p.add_argument("--out")

    p = sub.add_parser("opf", help="solve the linear OPF with polygon limits")
    p.add_argument("--case", required=True)
    p.add_argument("--e", type=float, required=True)
    kind_arg(p)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    report = RunReport(command=["branchpoly"] + argv)
    code = 0
    try:
        if args.command == "polygon":
            code = cmd_polygon(args)
        elif args.command == "tables":
            code = cmd_tables(args)
        elif args.command == "profile":
            code = cmd_profile(args)
        else:
            code = cmd_opf(args, report)
    except lopf.OpfError as exc:
        report.error = str(exc)
        print(f"branchpoly: {exc}", file=sys.stderr)
        code = 2
    except (polygeom.DomainError, CaseFormatError, FileNotFoundError, UsageError) as exc:
        report.error = str(exc)
        print(f"branchpoly: {exc}", file=sys.stderr)
        code = 1
    if args.command == "opf":
        try:
            out = _out_dir(args)
            name = report.summary.get("case") or Path(args.case).name.removesuffix(".m")
            path = out / f"opf_{name}_{args.kind}_e{args.e:g}_report.json"
            report.outputs.append(str(path))
            path.write_text(report.to_json())
        except OSError as exc:
            print(f"branchpoly: could not write report: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
