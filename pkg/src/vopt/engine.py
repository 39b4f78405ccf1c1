"""Solver drivers: MOVS, MONMO and AdEnA, plus the batch executor.

All drivers share the same loop shape: compute the stopping metric, test
``metric <= eps * max(1, initial metric)``, otherwise solve a batch of
scalarizations and refine the approximation.  Batches are solved
concurrently but their results are applied in sorted parameter-key order, so
a run is a deterministic function of its options.
"""
from __future__ import annotations

import enum
import heapq
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bd
from .model import evaluate_objectives, validate_convexity
from .polytope import (
    TAU_CMP,
    Polyhedron,
    add_halfspace,
    enumerate_vertices,
    remove_redundant,
)
from .scalar_backend import BackendOptions, BarrierBackend, SolveStatus
from .scalarize import FailureCache, Templates, build_cone_projection, parameter_key

log = logging.getLogger(__name__)

INFINITE_VALUE = 1e13


class Algorithm(str, enum.Enum):
    MOVS = "movs"
    MONMO = "monmo"
    ADENA = "adena"


class Status(str, enum.Enum):
    SOLVED = "solved"
    MAX_ITER_REACHED = "max_iter_reached"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    PARTIAL_FAILURE = "partial_failure"


class EngineError(Exception):
    pass


class Infeasible(EngineError):
    pass


class Unbounded(EngineError):
    pass


class ConeNotSupported(EngineError, ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    algorithm: Algorithm = Algorithm.MOVS
    eps_opt: float = 1e-2
    max_iter: int = 500
    scalarization_options: BackendOptions = field(default_factory=BackendOptions)
    vertex_selection_options: BackendOptions = field(default_factory=BackendOptions)
    thread_count: int = 1
    batch_size: int | None = None
    # alternative scalarization backend; any object with ``solve(ScalarProblem)``
    backend: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", self.thread_count)
        if not self.eps_opt > 0:
            raise ValueError("eps_opt must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.thread_count < 1 or self.batch_size < 1:
            raise ValueError("thread_count and batch_size must be at least 1")

    def to_dict(self):
        return {
            "algorithm": self.algorithm.value,
            "eps_opt": self.eps_opt,
            "max_iter": self.max_iter,
            "thread_count": self.thread_count,
            "batch_size": self.batch_size,
            "scalarization_options": self.scalarization_options.to_dict(),
            "vertex_selection_options": self.vertex_selection_options.to_dict(),
        }


@dataclass
class SolveResult:
    status: Status
    solutions: np.ndarray
    images: np.ndarray
    weights: np.ndarray
    metric_trace: list
    subproblem_count: int
    failed_parameter_count: int
    options: SolveOptions
    initial_metric: float = np.nan
    threshold: float = np.nan
    outer: Polyhedron | None = None
    enclosure: bd.EnclosureState | None = None
    elapsed: float = 0.0
    message: str = ""

    @property
    def final_metric(self):
        return self.metric_trace[-1] if self.metric_trace else np.nan

    def to_dict(self):
        return {
            "status": self.status.value,
            "message": self.message,
            "n_solutions": int(self.solutions.shape[0]),
            "metric_trace": [float(m) for m in self.metric_trace],
            "initial_metric": float(self.initial_metric),
            "threshold": float(self.threshold),
            "subproblem_count": self.subproblem_count,
            "failed_parameter_count": self.failed_parameter_count,
            "options": self.options.to_dict(),
            "elapsed_seconds": self.elapsed,
        }


def check_stopping(metric_now, metric_initial, eps_opt):
    return metric_now <= eps_opt * max(1.0, metric_initial)


class _Run:
    """Mutable bookkeeping shared by the drivers."""

    def __init__(self, p, opts, executor=None):
        validate_convexity(p)
        self.p = p
        self.opts = opts
        self.backend = opts.backend or BarrierBackend(opts.scalarization_options)
        self.projector = BarrierBackend(opts.vertex_selection_options)
        self.templates = Templates.for_problem(p)
        self.cache = FailureCache()
        self.executor = executor
        self.solutions = []
        self.images = []
        self.weights = []
        self._seen = set()
        self._submitted_ps = set()
        self.subproblems = 0
        self.trace = []

    def solve_many(self, problems):
        """Solve scalarizations; keys in the failure cache are skipped (``None``)."""
        todo = [sp for sp in problems if sp.key not in self.cache]
        self.subproblems += len(todo)
        if self.executor is not None and len(todo) > 1:
            sols = list(self.executor.map(self.backend.solve, todo))
        else:
            sols = [self.backend.solve(sp) for sp in todo]
        out = dict(zip((sp.key for sp in todo), sols))
        results = []
        for sp in problems:
            sol = out.get(sp.key)
            if sol is not None and sol.status is not SolveStatus.OPTIMAL:
                self.cache.record(sp.key)
                log.debug("subproblem %s failed: %s", sp.key[0], sol.status.value)
            results.append(sol)
        return results

    def add_solution(self, x, w):
        x = np.asarray(x, dtype=float)
        key = tuple(np.round(x, 9) + 0.0)
        if key in self._seen:
            return
        self._seen.add(key)
        w = np.asarray(w, dtype=float)
        self.solutions.append(x)
        self.images.append(evaluate_objectives(self.p, x))
        self.weights.append(w / np.linalg.norm(w))

    def initialize(self):
        """WS at every dual extreme ray; returns the first outer approximation."""
        normals = self.p.cone.dual_rays
        sps = [self.templates.ws.instantiate(w, key=parameter_key("WS", w)) for w in normals]
        sols = self.solve_many(sps)
        offsets = []
        for w, sol in zip(normals, sols):
            if sol is None or sol.status is SolveStatus.NUMERICAL_FAILURE:
                raise _Incomplete("weighted-sum initialisation failed")
            if sol.status is SolveStatus.INFEASIBLE:
                raise Infeasible("the feasible set is empty")
            if sol.status is SolveStatus.UNBOUNDED:
                raise Unbounded("a weighted-sum subproblem is unbounded below")
            fx = evaluate_objectives(self.p, sol.x)
            if not np.all(np.isfinite(fx)) or np.abs(fx).max() > INFINITE_VALUE:
                raise Unbounded("an objective value exceeds the infinity threshold")
            self.add_solution(sol.x, w)
            offsets.append(w @ fx)
        return Polyhedron(normals, np.array(offsets))

    def result(self, status, t0, message="", **extra):
        p = self.p
        return SolveResult(
            status=status,
            solutions=np.array(self.solutions).reshape(-1, p.n),
            images=np.array(self.images).reshape(-1, p.q),
            weights=np.array(self.weights).reshape(-1, p.q),
            metric_trace=list(self.trace),
            subproblem_count=self.subproblems,
            failed_parameter_count=len(self.cache),
            options=self.opts,
            elapsed=time.perf_counter() - t0,
            message=message,
            **extra,
        )


class _Incomplete(EngineError):
    pass


def initialize(p, opts=None):
    """Weighted-sum initialisation.

    Returns ``(X0, O0, status)``: the solutions, the first outer
    approximation and ``"ok"``.  Raises :class:`Infeasible` or
    :class:`Unbounded`.
    """
    run = _Run(p, opts or SolveOptions())
    outer = run.initialize()
    return np.array(run.solutions), outer, "ok"


def _vertex_key(v):
    return tuple(np.round(np.asarray(v, dtype=float), 9) + 0.0)


def _refine(outer, cuts):
    for h in cuts:
        outer = add_halfspace(outer, h)
        enumerate_vertices(outer)
    return remove_redundant(outer)


def _fallback_weight(outer, v):
    """Normal of the outer facet closest to ``v``; supports the upper image there."""
    slack = outer.normals @ v - outer.offsets
    return outer.normals[int(np.argmin(slack))]


def _guarded(driver):
    def run(p, opts=None, executor=None):
        opts = opts or SolveOptions()
        t0 = time.perf_counter()
        state = _Run(p, opts, executor)
        try:
            outer = state.initialize()
        except Infeasible as exc:
            return state.result(Status.INFEASIBLE, t0, str(exc))
        except Unbounded as exc:
            return state.result(Status.UNBOUNDED, t0, str(exc))
        except _Incomplete as exc:
            return state.result(Status.PARTIAL_FAILURE, t0, str(exc))
        return driver(state, outer, t0)

    run.__name__ = driver.__name__
    run.__doc__ = driver.__doc__
    return run


class _LazyDistances:
    """Distances from outer vertices to the inner approximation.

    Cached values are upper bounds once the inner set has grown, so only the
    candidates that reach the top of the heap are recomputed.
    """

    def __init__(self, run):
        self.run = run
        self.cache = {}
        self.count = 0

    def exact(self, v):
        images = np.array(self.run.images)
        if images.shape[0] == 0:
            return np.inf
        sp, _ = build_cone_projection(v, images, self.run.p.cone)
        sol = self.run.projector.solve(sp)
        self.count += 1
        if sol.status is not SolveStatus.OPTIMAL:
            raise EngineError(f"vertex-selection projection ended with status {sol.status.value}")
        return max(float(sol.objective_value), 0.0)

    def ranked(self, verts):
        """Yield ``(distance, index)`` in decreasing exact distance."""
        version = len(self.run.images)
        heap = []
        for i, v in enumerate(verts):
            hit = self.cache.get(_vertex_key(v))
            bound, ver = hit if hit is not None else (np.inf, -1)
            heap.append((-bound, i, ver == version))
        heapq.heapify(heap)
        while heap:
            neg, i, fresh = heapq.heappop(heap)
            if fresh:
                yield -neg, i
                continue
            d = self.exact(verts[i])
            self.cache[_vertex_key(verts[i])] = (d, version)
            heapq.heappush(heap, (-d, i, True))


@_guarded
def run_movs(run, outer, t0):
    """Vertex selection followed by a Pascoletti-Serafini step at the farthest vertices."""
    opts, p = run.opts, run.p
    direction = p.cone.interior_direction
    dist = _LazyDistances(run)
    metric0 = thr = None
    it = 0
    while True:
        verts = enumerate_vertices(outer)[0]
        ranked = dist.ranked(verts)
        metric, first = next(ranked)
        if metric0 is None:
            metric0 = metric
            thr = opts.eps_opt * max(1.0, metric0)
        run.trace.append(metric)
        if check_stopping(metric, metric0, opts.eps_opt):
            status = Status.SOLVED
            break
        if it >= opts.max_iter:
            status = Status.MAX_ITER_REACHED
            break
        batch = []
        for d, i in _chain([(metric, first)], ranked):
            if d <= thr or len(batch) >= opts.batch_size:
                break
            key = parameter_key("PS", verts[i], direction)
            if key in run.cache or key in run._submitted_ps:
                continue
            batch.append((key, verts[i]))
        if not batch:
            status = Status.PARTIAL_FAILURE
            break
        batch.sort(key=lambda kv: kv[0])
        sps = [run.templates.ps.instantiate(v, direction, key=key) for key, v in batch]
        run._submitted_ps.update(key for key, _ in batch)
        cuts = []
        for (key, v), sol in zip(batch, run.solve_many(sps)):
            if sol is None or sol.status is not SolveStatus.OPTIMAL:
                continue
            h = run.templates.ps.cut(sol, v, direction)
            x = sol.x[: p.n]
            run.add_solution(x, h.normal if h is not None else _fallback_weight(outer, v))
            if h is not None:
                cuts.append(h)
        outer = _refine(outer, cuts)
        it += 1
    return run.result(status, t0, initial_metric=metric0, threshold=thr, outer=outer)


def _chain(*iterables):
    for it in iterables:
        yield from it


@_guarded
def run_monmo(run, outer, t0):
    """Norm-minimising scalarization at every unresolved outer vertex."""
    opts = run.opts
    values = {}
    metric0 = thr = None
    it = 0
    while True:
        verts = enumerate_vertices(outer)[0]
        keys = [parameter_key("NM", v) for v in verts]
        todo = sorted({k: v for k, v in zip(keys, verts) if k not in values and k not in run.cache}.items())
        sps = [run.templates.nm.instantiate(v, key=k) for k, v in todo]
        pending = []
        for (k, v), sol in zip(todo, run.solve_many(sps)):
            if sol is None or sol.status is not SolveStatus.OPTIMAL:
                continue
            x, _ = run.templates.nm.split(sol)
            h = run.templates.nm.cut(sol, v)
            value = max(float(sol.objective_value), 0.0)
            weight = h.normal if h is not None and value > TAU_CMP else _fallback_weight(outer, v)
            pending.append((x, weight))
            values[k] = (value, h)
        known = [values[k][0] for k in keys if k in values]
        failed = [k for k in keys if k not in values]
        metric = max(known) if known else np.inf
        if metric0 is None:
            metric0 = metric
            thr = opts.eps_opt * max(1.0, metric0)
        run.trace.append(metric)
        if it >= opts.max_iter and not check_stopping(metric, metric0, opts.eps_opt):
            # this iteration's points only count once their cuts are applied
            status = Status.MAX_ITER_REACHED
            break
        for x, weight in pending:
            run.add_solution(x, weight)
        if check_stopping(metric, metric0, opts.eps_opt):
            status = Status.PARTIAL_FAILURE if failed else Status.SOLVED
            break
        cuts = [values[k][1] for k in sorted(set(keys)) if k in values and values[k][0] > thr and values[k][1] is not None]
        if not cuts:
            status = Status.PARTIAL_FAILURE
            break
        outer = _refine(outer, cuts)
        it += 1
    return run.result(status, t0, initial_metric=metric0, threshold=thr, outer=outer)


def _adena_zone(images):
    lo = images.min(axis=0)
    hi = images.max(axis=0)
    spread = float((hi - lo).max())
    delta = 1e-2 * spread if spread > 0 else 1e-2
    return lo - delta, hi + delta


def run_adena(p, opts=None, executor=None):
    """Enclosure refinement with Pascoletti-Serafini steps inside the widest box.

    Only the componentwise ordering is supported.
    """
    _check_adena(p)
    return _adena(p, opts, executor)


@_guarded
def _adena(run, outer, t0):
    opts, p = run.opts, run.p
    images = np.array(run.images)
    low, high = _adena_zone(images)
    e = bd.init_enclosure(low, high)
    for z in images:
        e = bd.insert_upper(e, z)
    skipped = set()
    metric0 = thr = None
    it = 0
    below_high = np.nextafter(high, -np.inf)
    while True:
        width, pair = _widest_unskipped(e, skipped)
        if metric0 is None:
            metric0 = width
            thr = opts.eps_opt * max(1.0, metric0)
        run.trace.append(width)
        if check_stopping(width, metric0, opts.eps_opt):
            status = Status.SOLVED
            break
        if it >= opts.max_iter:
            status = Status.MAX_ITER_REACHED
            break
        if pair is None:
            status = Status.PARTIAL_FAILURE
            break
        l, u = pair
        d = (u - l) / np.linalg.norm(u - l)
        key = parameter_key("PS", l, d)
        sol = None
        if key not in run.cache:
            sol = run.solve_many([run.templates.ps.instantiate(l, d, key=key)])[0]
        if sol is None or sol.status is not SolveStatus.OPTIMAL:
            skipped.add((tuple(l), tuple(u)))
            it += 1
            continue
        x = sol.x[: p.n]
        t = float(sol.x[-1])
        h = run.templates.ps.cut(sol, l, d)
        run.add_solution(x, h.normal if h is not None else np.ones(p.q))
        before = e
        fx = evaluate_objectives(p, x)
        if np.all(fx > low) and np.all(fx < high):
            e = bd.insert_upper(e, fx)
        lower = np.minimum(l + max(t, 0.0) * d, below_high)
        if np.all(lower > low):
            e = bd.insert_lower(e, lower)
        if np.array_equal(e.L, before.L) and np.array_equal(e.U, before.U):
            skipped.add((tuple(l), tuple(u)))
        it += 1
    return run.result(status, t0, initial_metric=metric0, threshold=thr, enclosure=e)


def _widest_unskipped(e, skipped):
    width, i, j = bd._kernels.widest_box(e.L, e.U)
    if i < 0:
        return -np.inf, None
    if (tuple(e.L[i]), tuple(e.U[j])) not in skipped:
        return width, (e.L[i].copy(), e.U[j].copy())
    # rare path: rank every compatible pair
    diff = e.U[None, :, :] - e.L[:, None, :]
    w = np.where(np.all(diff >= 0, axis=2), diff.min(axis=2), -np.inf)
    order = sorted(
        ((-w[a, b], tuple(e.L[a]), tuple(e.U[b])) for a, b in zip(*np.nonzero(np.isfinite(w)))),
    )
    for neg, lt, ut in order:
        if (lt, ut) not in skipped:
            return -neg, (np.array(lt), np.array(ut))
    return -order[0][0] if order else -np.inf, None


def _check_adena(p):
    if not p.cone.is_natural():
        raise ConeNotSupported("AdEnA is defined only for the componentwise ordering")


_DRIVERS = {Algorithm.MOVS: run_movs, Algorithm.MONMO: run_monmo, Algorithm.ADENA: run_adena}


def run_parallel(p, opts, driver=None):
    """Run MOVS or MONMO with batches of ``opts.batch_size`` solved on a thread pool."""
    algorithm = Algorithm(driver or opts.algorithm)
    if algorithm is Algorithm.ADENA:
        raise ValueError("the batch executor supports MOVS and MONMO only")
    with ThreadPoolExecutor(max_workers=opts.thread_count) as pool:
        return _DRIVERS[algorithm](p, opts, executor=pool)


def solve(p, opts=None):
    """Run the configured algorithm; batches above 1 go through :func:`run_parallel`."""
    opts = opts or SolveOptions()
    if opts.algorithm is Algorithm.ADENA:
        return run_adena(p, opts)
    if opts.batch_size > 1 or opts.thread_count > 1:
        return run_parallel(p, opts)
    return _DRIVERS[opts.algorithm](p, opts)


__all__ = [
    "Algorithm",
    "ConeNotSupported",
    "Infeasible",
    "SolveOptions",
    "SolveResult",
    "Status",
    "Unbounded",
    "check_stopping",
    "initialize",
    "run_adena",
    "run_monmo",
    "run_movs",
    "run_parallel",
    "solve",
]
