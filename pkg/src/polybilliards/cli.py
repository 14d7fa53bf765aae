"""Command-line front end.

Subcommands: solve (shortest closed billiard trajectory of a polytope),
verify (check a candidate trajectory), gen (random polytope JSON), bench
(timing table over the tuple pipeline).  JSON in and out; 2-D tables can
also be rendered as SVG.
"""

import argparse
import json
import os
import sys
import xml.etree.ElementTree as ET

import numpy as np

from ._kernels import NUMBA_AVAILABLE, set_backend
from .fixtures import builtin, random_polytope, random_polytope_with_facets
from .geometry import Polytope, Trajectory
from .numerics import (DEFAULT_TOL, InvalidInput, NumericalFailure,
                       PreconditionViolation, ToleranceProfile)
from .search import SearchOptions, count_facet_tuples, search_min
from .verify import verify_billiard

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_REGULAR = 2
EXIT_INVALID_TRAJECTORY = 3


def _tolerance(args) -> ToleranceProfile:
    feas = getattr(args, "tol_feas", None)
    if feas is None:
        return DEFAULT_TOL
    return ToleranceProfile(feas=feas)


def _load_polytope_file(path: str, tol: ToleranceProfile) -> Polytope:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return Polytope.from_dict(data, tol)


def _emit(text: str, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _fmt(x) -> str:
    return f"{x:.12g}"


# -- SVG ---------------------------------------------------------------------

def _svg_map(P: Polytope):
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)

    def to_px(p):
        # y grows downward in SVG
        x = (p[0] - lo[0]) / span[0] * 1000.0
        y = 1000.0 - (p[1] - lo[1]) / span[1] * 1000.0
        return f"{x:.2f},{y:.2f}"

    return to_px


def _svg_document(P: Polytope, trajectories) -> str:
    """Polygon outline plus trajectory polylines in a 1000x1000 viewport."""
    if P.dim != 2:
        raise InvalidInput("svg output needs a 2-D polytope")
    to_px = _svg_map(P)
    root = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "version": "1.1",
        "viewBox": "0 0 1000 1000",
        "width": "1000", "height": "1000",
    })
    centroid = P.vertices.mean(axis=0)
    order = np.argsort(np.arctan2(P.vertices[:, 1] - centroid[1],
                                  P.vertices[:, 0] - centroid[0]))
    ET.SubElement(root, "polygon", {
        "points": " ".join(to_px(P.vertices[i]) for i in order),
        "fill": "none", "stroke": "black", "stroke-width": "3",
    })
    colors = ("crimson", "royalblue", "seagreen", "darkorange")
    for k, traj in enumerate(trajectories):
        pts = list(traj.points) + [traj.points[0]]
        ET.SubElement(root, "polyline", {
            "points": " ".join(to_px(p) for p in pts),
            "fill": "none", "stroke": colors[k % len(colors)],
            "stroke-width": "2",
        })
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


# -- solve -------------------------------------------------------------------

def _trajectory_payload(P: Polytope, traj: Trajectory, tol) -> dict:
    rep = verify_billiard(P, traj, tol)
    return {
        "points": [[float(v) for v in row] for row in traj.points],
        "length": float(traj.length()),
        "regular": bool(rep.regular),
        "facets": [sorted(e["active"]) for e in rep.per_point],
    }


def _solve_payload(P: Polytope, report, tol) -> dict:
    per_m = {}
    for m, entry in report.per_m_best.items():
        per_m[str(m)] = {
            "length": float(entry["length"]),
            "tuple": [int(i) for i in entry["tuple"]],
            "regular": bool(entry["regular"]),
        }
    best = report.best
    payload = {
        "best": None if best is None else _trajectory_payload(P, best, tol),
        "length": None if best is None else float(best.length()),
        "bounces": None if best is None else int(best.m),
        "per_m": per_m,
        "stage_counts": {k: int(v) for k, v in report.stage_counts.items()},
        "tuples_examined": int(report.tuples_examined),
        "elapsed_s": float(report.elapsed),
        "best_regular": (None if report.best_regular is None
                         else _trajectory_payload(P, report.best_regular, tol)),
        "warnings": list(report.warnings),
    }
    return payload


def _solve_text(payload) -> str:
    lines = []
    if payload["best"] is None:
        lines.append("no closed billiard trajectory found")
    else:
        lines.append(f"length   {_fmt(payload['length'])}")
        lines.append(f"bounces  {payload['bounces']}")
        lines.append(f"regular  {str(payload['best']['regular']).lower()}")
        for row in payload["best"]["points"]:
            lines.append("  point  " + "  ".join(_fmt(v) for v in row))
    lines.append("per bounce count:")
    for m in sorted(payload["per_m"], key=int):
        e = payload["per_m"][m]
        reg = "regular" if e["regular"] else "non-regular"
        lines.append(f"  m={m}  length {_fmt(e['length'])}  "
                     f"tuple {tuple(e['tuple'])}  {reg}")
    lines.append("stages: " + ", ".join(
        f"{k}={v}" for k, v in sorted(payload["stage_counts"].items())))
    lines.append(f"tuples examined: {payload['tuples_examined']}")
    lines.append(f"elapsed: {payload['elapsed_s']:.3f}s")
    for w in payload["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def cmd_solve(args) -> int:
    tol = _tolerance(args)
    if args.fixture:
        P = builtin(args.fixture, tol=tol).polytope
    else:
        P = _load_polytope_file(args.input, tol)
    if args.format == "svg" and P.dim != 2:
        raise InvalidInput("svg output is only available in dimension 2")
    opts = SearchOptions(max_bounces=args.max_bounces, tol=tol,
                         workers=args.workers)
    report = search_min(P, opts)
    payload = _solve_payload(P, report, tol)
    if args.format == "json":
        text = json.dumps(payload, sort_keys=True, indent=2)
    elif args.format == "text":
        text = _solve_text(payload)
    else:
        trajs = [t for t in (report.best, report.best_regular) if t is not None]
        if report.best_regular is report.best:
            trajs = trajs[:1]
        text = _svg_document(P, trajs)
    _emit(text, args.output)
    return EXIT_OK if report.best_regular is not None else EXIT_NO_REGULAR


# -- verify ------------------------------------------------------------------

def _cross_check(name, given, computed, tol_abs):
    if given is None:
        return
    if isinstance(computed, bool):
        if bool(given) != computed:
            raise InvalidInput(
                f"trajectory JSON claims {name}={given} but recomputation "
                f"gives {computed}")
        return
    if abs(float(given) - computed) > tol_abs:
        raise InvalidInput(
            f"trajectory JSON claims {name}={given} but recomputation "
            f"gives {computed:.12g}")


def cmd_verify(args) -> int:
    tol = _tolerance(args)
    fixture = None
    if args.fixture:
        fixture = builtin(args.fixture, tol=tol)
        P = fixture.polytope
    else:
        P = _load_polytope_file(args.polytope, tol)

    if args.input:
        with open(args.input, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        traj = Trajectory.from_dict(data)
    elif args.reference is not None:
        if fixture is None or not fixture.reference_trajectories:
            raise InvalidInput("--reference needs a fixture with references")
        if not (0 <= args.reference < len(fixture.reference_trajectories)):
            raise InvalidInput(f"reference index out of range "
                               f"0..{len(fixture.reference_trajectories) - 1}")
        traj = fixture.reference_trajectories[args.reference].trajectory()
        data = {}
    else:
        raise InvalidInput("verify needs --input FILE or --reference IDX")

    rep = verify_billiard(P, traj, tol)
    _cross_check("length", data.get("length"), rep.length,
                 1e-9 * max(1.0, rep.length))
    _cross_check("regular", data.get("regular"), bool(rep.regular), 0.0)
    if data.get("facets"):
        claimed = [sorted(int(i) for i in row) for row in data["facets"]]
        actual = [sorted(e["active"]) for e in rep.per_point]
        if claimed != actual:
            raise InvalidInput(
                f"trajectory JSON claims facets {claimed} but recomputation "
                f"gives {actual}")

    if args.format == "json":
        text = json.dumps(rep.to_dict(), sort_keys=True, indent=2)
    elif args.format == "text":
        lines = [
            f"valid billiard  {str(rep.valid_billiard).lower()}",
            f"regular         {str(rep.regular).lower()}",
            f"pinned in body  {str(rep.in_FT).lower()}",
            f"minimality ok   {str(rep.theorem1_ok).lower()}",
            f"length          {_fmt(rep.length)}",
        ]
        for j, e in enumerate(rep.per_point):
            resid = "n/a" if e["residual"] is None else _fmt(e["residual"])
            lines.append(f"  p_{j + 1} facets {e['active']} residual {resid}")
        lines.extend(f"note: {n}" for n in rep.notes)
        text = "\n".join(lines)
    else:
        text = _svg_document(P, [traj])
    _emit(text, args.output)
    return EXIT_OK if rep.valid_billiard else EXIT_INVALID_TRAJECTORY


# -- gen ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    tol = _tolerance(args)
    P = random_polytope(args.dim, args.points, args.seed, tol)
    name = f"random-d{args.dim}-p{args.points}-s{args.seed}"
    text = json.dumps(P.to_dict(name=name), sort_keys=True, indent=2)
    _emit(text, args.output)
    return EXIT_OK


# -- bench -------------------------------------------------------------------

def cmd_bench(args) -> int:
    tol = _tolerance(args)
    P = random_polytope_with_facets(args.dim, args.facets, args.seed, tol)
    if args.backends == "both":
        backends = ["numpy", "numba"] if NUMBA_AVAILABLE else ["numpy"]
    elif args.backends == "auto":
        backends = ["numba" if NUMBA_AVAILABLE else "numpy"]
    else:
        backends = [args.backends]

    rows = []
    for backend in backends:
        set_backend(backend)
        prev_elapsed = 0.0
        prev_tuples = 0
        for m in range(2, args.dim + 2):
            report = search_min(P, SearchOptions(
                max_bounces=m, tol=tol, workers=args.workers))
            want = count_facet_tuples(args.facets, m)
            if report.tuples_examined != want:
                raise NumericalFailure(
                    f"tuple count mismatch at m={m}: examined "
                    f"{report.tuples_examined}, formula gives {want}")
            rows.append({
                "backend": backend,
                "facets": args.facets,
                "dim": args.dim,
                "m": m,
                "tuples_m": report.tuples_examined - prev_tuples,
                "tuples_cumulative": report.tuples_examined,
                "seconds_m": max(report.elapsed - prev_elapsed, 0.0),
                "best_length": report.best_length,
            })
            prev_elapsed = report.elapsed
            prev_tuples = report.tuples_examined
    set_backend("numba" if NUMBA_AVAILABLE else "numpy")

    if args.format == "json":
        text = json.dumps(rows, sort_keys=True, indent=2)
    else:
        header = (f"{'backend':>8} {'facets':>6} {'dim':>4} {'m':>3} "
                  f"{'tuples':>8} {'seconds':>9} {'best':>14}")
        lines = [header, "-" * len(header)]
        for r in rows:
            best = "-" if r["best_length"] is None else _fmt(r["best_length"])
            lines.append(
                f"{r['backend']:>8} {r['facets']:>6} {r['dim']:>4} "
                f"{r['m']:>3} {r['tuples_m']:>8} {r['seconds_m']:>9.3f} "
                f"{best:>14}")
        text = "\n".join(lines)
    _emit(text, args.output)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polybilliards",
        description="shortest closed billiard trajectories in convex polytopes")
    sub = parser.add_subparsers(dest="command", required=True)

    sol = sub.add_parser("solve", help="search the shortest closed trajectory")
    src = sol.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", help="builtin table name, e.g. example_e:0.05")
    src.add_argument("--input", help="polytope JSON file")
    sol.add_argument("--max-bounces", type=int, default=0,
                     help="largest tuple size (default: dim + 1)")
    sol.add_argument("--tol-feas", type=float, default=None)
    sol.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sol.add_argument("--format", choices=("json", "text", "svg"),
                     default="json")
    sol.add_argument("--output", default=None, help="file path (default: stdout)")
    sol.set_defaults(func=cmd_solve)

    ver = sub.add_parser("verify", help="verify a candidate trajectory")
    pol = ver.add_mutually_exclusive_group(required=True)
    pol.add_argument("--fixture", help="builtin table name")
    pol.add_argument("--polytope", help="polytope JSON file")
    ver.add_argument("--input", help="trajectory JSON file")
    ver.add_argument("--reference", type=int, default=None,
                     help="verify the fixture's k-th reference trajectory")
    ver.add_argument("--tol-feas", type=float, default=None)
    ver.add_argument("--format", choices=("json", "text", "svg"),
                     default="json")
    ver.add_argument("--output", default=None)
    ver.set_defaults(func=cmd_verify)

    gen = sub.add_parser("gen", help="generate a random polytope JSON")
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--points", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--tol-feas", type=float, default=None)
    gen.add_argument("--output", default=None)
    gen.set_defaults(func=cmd_gen)

    ben = sub.add_parser("bench", help="time the pipeline on a random table")
    ben.add_argument("--dim", type=int, required=True)
    ben.add_argument("--facets", type=int, required=True)
    ben.add_argument("--seed", type=int, default=1)
    ben.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ben.add_argument("--backends", choices=("auto", "numpy", "numba", "both"),
                     default="auto")
    ben.add_argument("--tol-feas", type=float, default=None)
    ben.add_argument("--format", choices=("json", "text"), default="text")
    ben.add_argument("--output", default=None)
    ben.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, PreconditionViolation) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as err:
        print(f"error: numerical failure: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError, ValueError) as err:
        print(f"error: malformed input: {err!r}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
