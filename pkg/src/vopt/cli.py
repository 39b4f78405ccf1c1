"""Command-line front end: ``vopt solve``, ``vopt validate`` and ``vopt examples``.

Exit codes: 0 solved or iteration limit reached, 1 partial failure,
2 infeasible, 3 unbounded, 4 invalid input or options, 5 output error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .bounds import EnclosureState
from .cone import ConeError, cone_from_rays
from .engine import Algorithm, ConeNotSupported, SolveOptions, Status, solve
from .model import ParseError, ValidationError, load_problem, validate_convexity
from .scalar_backend import BackendOptions

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INFEASIBLE = 2
EXIT_UNBOUNDED = 3
EXIT_INVALID = 4
EXIT_IO = 5

EXAMPLES = ("disc", "ellipsoid", "triobjective", "portfolio")

_STATUS_EXIT = {
    Status.SOLVED: EXIT_OK,
    Status.MAX_ITER_REACHED: EXIT_OK,
    Status.PARTIAL_FAILURE: EXIT_PARTIAL,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.UNBOUNDED: EXIT_UNBOUNDED,
}

log = logging.getLogger("vopt")


class UsageError(Exception):
    pass


class UnsupportedDimension(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "infeasible"
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    input_path: str
    algorithm: Algorithm = Algorithm.MOVS
    eps_opt: float = 1e-2
    max_iter: int = 500
    threads: int = 1
    batch_size: int | None = None
    output_dir: str = "vopt_output"
    emit_plot: bool = False
    emit_bounds: bool = False
    cone_rays: tuple | None = None
    backend_tol: float | None = None
    verbose: bool = False

    def solve_options(self):
        backend = BackendOptions(verbose=self.verbose)
        if self.backend_tol is not None:
            backend = replace(backend, tolerance=self.backend_tol)
        return SolveOptions(
            algorithm=self.algorithm,
            eps_opt=self.eps_opt,
            max_iter=self.max_iter,
            scalarization_options=backend,
            vertex_selection_options=backend,
            thread_count=self.threads,
            batch_size=self.batch_size,
        )


def parse_cone_rays(text):
    """``"a,b;c,d"`` to a tuple of ray tuples."""
    try:
        rays = tuple(tuple(float(v) for v in part.split(",")) for part in text.split(";") if part.strip())
    except ValueError:
        raise UsageError(f"cannot parse cone rays {text!r}; expected e.g. \"1,2;2,1\"") from None
    if not rays or len({len(r) for r in rays}) != 1:
        raise UsageError(f"cone rays {text!r} must be a nonempty list of equal-length vectors")
    return rays


def build_parser():
    parser = _Parser(prog="vopt", description="Convex vector optimization solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("input_path", metavar="file.json")
    s.add_argument("--algorithm", choices=[a.value for a in Algorithm], default=Algorithm.MOVS.value)
    s.add_argument("--eps", type=float, default=1e-2, dest="eps_opt")
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--batch-size", type=int, default=None)
    s.add_argument("--cone-rays", default=None, help='ordering cone generators, e.g. "1,2;2,1"')
    s.add_argument("--output", default="vopt_output", dest="output_dir")
    s.add_argument("--plot", action="store_true", dest="emit_plot", help="write front.svg")
    s.add_argument("--emit-bounds", action="store_true", help="write bounds.json (AdEnA)")
    s.add_argument("--backend-tol", type=float, default=None, help="barrier duality-gap tolerance")
    s.add_argument("--verbose", action="store_true")

    v = sub.add_parser("validate", help="parse a problem file and check C-convexity")
    v.add_argument("input_path", metavar="file.json")

    e = sub.add_parser("examples", help="write the bundled example problems")
    e.add_argument("--output", default=".", dest="output_dir")
    return parser


def config_from_args(ns):
    cone = parse_cone_rays(ns.cone_rays) if ns.cone_rays else None
    config = RunConfig(
        input_path=ns.input_path,
        algorithm=Algorithm(ns.algorithm),
        eps_opt=ns.eps_opt,
        max_iter=ns.max_iter,
        threads=ns.threads,
        batch_size=ns.batch_size,
        output_dir=ns.output_dir,
        emit_plot=ns.emit_plot,
        emit_bounds=ns.emit_bounds,
        cone_rays=cone,
        backend_tol=ns.backend_tol,
        verbose=ns.verbose,
    )
    try:
        config.solve_options()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return config


# ---------------------------------------------------------------------------
# export


def _fmt(v):
    return format(float(v), ".17g")


def write_solutions_csv(result, path):
    X, F, W = result.solutions, result.images, result.weights
    n = X.shape[1] if X.ndim == 2 else 0
    q = F.shape[1] if F.ndim == 2 else 0
    header = [f"x{i + 1}" for i in range(n)] + [f"f{i + 1}" for i in range(q)] + [f"w{i + 1}" for i in range(q)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, f, wt in zip(X, F, W):
            w.writerow([_fmt(v) for v in (*x, *f, *wt)])


def read_solutions_csv(path):
    """``(header, rows)`` with rows as a float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def _json_number(v):
    v = float(v)
    return v if math.isfinite(v) else None


def result_document(result, problem, config):
    doc = result.to_dict()
    doc["initial_metric"] = _json_number(doc["initial_metric"])
    doc["threshold"] = _json_number(doc["threshold"])
    doc["metric_trace"] = [_json_number(m) for m in doc["metric_trace"]]
    doc["final_metric"] = _json_number(result.final_metric) if result.metric_trace else None
    doc["problem"] = {"name": problem.name, "n": problem.n, "q": problem.q, "input_path": config.input_path}
    doc["cone"] = problem.cone.to_dict()
    doc["run"] = {"emit_plot": config.emit_plot, "emit_bounds": config.emit_bounds, "output_dir": config.output_dir}
    return doc


def export_result(result, problem, config):
    """Write ``solutions.csv``, ``result.json`` and optionally ``bounds.json``.

    Returns the list of written paths.  Raises ``OSError`` on IO failure.
    """
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, "solutions.csv"), os.path.join(out, "result.json")]
    write_solutions_csv(result, paths[0])
    with open(paths[1], "w") as fh:
        json.dump(result_document(result, problem, config), fh, indent=2, allow_nan=False)
        fh.write("\n")
    if config.emit_bounds:
        if result.enclosure is None:
            log.warning("--emit-bounds has no effect for %s", config.algorithm.value)
        else:
            paths.append(os.path.join(out, "bounds.json"))
            result.enclosure.dump(paths[-1])
    return paths


# ---------------------------------------------------------------------------
# plotting

_SVG_SIZE = 480
_MARGIN = 40
# orthographic view for three objectives: azimuth -60 deg, elevation 30 deg
_AZIMUTH = math.radians(-60.0)
_ELEVATION = math.radians(30.0)


def _project3(points):
    ca, sa = math.cos(_AZIMUTH), math.sin(_AZIMUTH)
    ce, se = math.cos(_ELEVATION), math.sin(_ELEVATION)
    right = np.array([-sa, ca, 0.0])
    up = np.array([-se * ca, -se * sa, ce])
    return np.column_stack([points @ right, points @ up])


def _staircase(points, upper):
    """Polyline through a 2D antichain; corners turn outward from the region."""
    pts = points[np.argsort(points[:, 0])]
    path = []
    for a, b in zip(pts[:-1], pts[1:]):
        path.append(a)
        path.append((b[0], a[1]) if upper else (a[0], b[1]))
    if len(pts):
        path.append(pts[-1])
    return np.array(path).reshape(-1, 2)


def emit_plot(result, path, staircases=True):
    """Static SVG scatter of the images, with L/U staircases for AdEnA in 2D."""
    F = np.asarray(result.images, dtype=float)
    q = F.shape[1] if F.ndim == 2 else 0
    if q not in (2, 3):
        raise UnsupportedDimension(f"plots need 2 or 3 objectives, got {q}")
    pts = F if q == 2 else _project3(F)
    lines = []
    enc = result.enclosure if staircases and q == 2 else None
    if isinstance(enc, EnclosureState):
        lines = [("L", _staircase(enc.L, upper=False)), ("U", _staircase(enc.U, upper=True))]
    every = np.vstack([pts] + [ln for _, ln in lines if len(ln)]) if len(pts) else np.zeros((1, 2))
    lo, hi = every.min(axis=0), every.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    scale = (_SVG_SIZE - 2 * _MARGIN) / span.max()

    def xy(p):
        return _MARGIN + (p[0] - lo[0]) * scale, _SVG_SIZE - _MARGIN - (p[1] - lo[1]) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" height="{_SVG_SIZE}" '
        f'viewBox="0 0 {_SVG_SIZE} {_SVG_SIZE}">',
        f'<rect width="{_SVG_SIZE}" height="{_SVG_SIZE}" fill="white"/>',
    ]
    colors = {"L": "#1f77b4", "U": "#d62728"}
    for name, ln in lines:
        coords = " ".join("%.3f,%.3f" % xy(p) for p in ln)
        out.append(f'<polyline class="{name}" points="{coords}" fill="none" stroke="{colors[name]}" stroke-width="1"/>')
    for p in pts:
        cx, cy = xy(p)
        out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="2.5" fill="black"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path


# ---------------------------------------------------------------------------
# commands


def _load(config):
    if not os.path.isfile(config.input_path):
        raise UsageError(f"no such problem file: {config.input_path}")
    p = load_problem(config.input_path)
    if config.cone_rays is not None:
        if len(config.cone_rays[0]) != p.q:
            raise UsageError(f"cone rays have dimension {len(config.cone_rays[0])}, the problem has {p.q} objectives")
        p = p.with_cone(cone_from_rays(config.cone_rays))
        validate_convexity(p)
    return p


def cmd_solve(config):
    p = _load(config)
    result = solve(p, config.solve_options())
    print(
        f"{result.status.value}: {result.solutions.shape[0]} solutions, "
        f"{result.subproblem_count} subproblems, {result.failed_parameter_count} failed"
    )
    if result.message:
        print(result.message, file=sys.stderr)
    try:
        paths = export_result(result, p, config)
        if config.emit_plot:
            try:
                paths.append(emit_plot(result, os.path.join(config.output_dir, "front.svg")))
            except UnsupportedDimension as exc:
                print(f"vopt: no plot written: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"vopt: cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(f"wrote {path}")
    return _STATUS_EXIT[result.status]


def cmd_validate(path):
    if not os.path.isfile(path):
        raise UsageError(f"no such problem file: {path}")
    p = load_problem(path)
    cert = validate_convexity(p)
    print(f"{p.name}: n={p.n}, q={p.q}, {len(p.constraints)} constraints; C-convex (min eigenvalue {float(np.min(cert.min_eigenvalues)):.3g})")
    return EXIT_OK


def cmd_examples(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
        data = resources.files("vopt") / "data"
        for name in EXAMPLES:
            target = os.path.join(out_dir, f"{name}.json")
            with open(target, "w") as fh:
                fh.write((data / f"{name}.json").read_text())
            print(f"wrote {target}")
    except OSError as exc:
        print(f"vopt: cannot write examples: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None):
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if ns.command == "solve":
            return cmd_solve(config_from_args(ns))
        if ns.command == "validate":
            return cmd_validate(ns.input_path)
        return cmd_examples(ns.output_dir)
    except (UsageError, ParseError, ValidationError, ConeError, ConeNotSupported) as exc:
        print(f"vopt: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"vopt: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
