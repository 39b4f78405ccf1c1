"""Weighted-sum, Pascoletti-Serafini and norm-minimising subproblems.

A template is built once per problem; instantiating it with new parameters
only changes coefficient values, never the constraint structure.  Variables
are ordered ``x`` first, then the auxiliary ones (``t`` for PS; ``z, s`` for
NM).  Constraint order is the feasible set of the problem followed by one
row per cone normal, so cone multipliers sit at a fixed offset of the dual
vector.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .cone import TAU_CMP
from .model import LINEAR_EQ, Constraint, QuadraticFunction, evaluate_objectives
from .polytope import Halfspace
from .scalar_backend import BackendOptions, BarrierBackend, ScalarProblem

ROUND_DIGITS = 9


class ScalarizationError(ValueError):
    pass


class WeightNotInDualCone(ScalarizationError):
    pass


class DirectionNotInterior(ScalarizationError):
    pass


def _pad(fn, extra, last=()):
    """``fn`` lifted to ``n + extra`` variables with trailing linear coefficients."""
    n = fn.n
    c = np.zeros(n + extra)
    c[:n] = fn.c
    c[n:n + len(last)] = last
    Q = None
    if fn.Q is not None:
        Q = np.zeros((n + extra, n + extra))
        Q[:n, :n] = fn.Q
    return QuadraticFunction(c, Q, fn.d)


def _pad_constraint(con, extra):
    if extra == 0:
        return con
    if con.kind in ("linear_eq", "linear_ineq"):
        a = np.concatenate([con.a, np.zeros(extra)])
        return Constraint(con.kind, a=a, b=con.b)
    if con.kind == "quadratic_ineq":
        return Constraint(con.kind, fn=_pad(con.fn, extra))
    A = np.hstack([con.A, np.zeros((con.A.shape[0], extra))])
    return Constraint(con.kind, A=A, b=con.b, c=np.concatenate([con.c, np.zeros(extra)]), d=con.d)


def weighted_objective(p, w):
    """``x -> w' f(x)`` as a single quadratic."""
    w = np.asarray(w, dtype=float)
    Q = np.tensordot(w, p.hessians, axes=1)
    return QuadraticFunction(w @ p.linear_terms, Q, float(w @ p.constants))


def _cone_row(fn, extra, aux, rhs):
    """``fn(x) + aux . (trailing vars) <= rhs`` as a linear or quadratic row."""
    lifted = _pad(fn, extra, aux)
    if lifted.Q is None:
        return Constraint.linear_ineq(lifted.c, rhs - lifted.d)
    return Constraint(
        "quadratic_ineq", fn=QuadraticFunction(lifted.c, lifted.Q, lifted.d - rhs)
    )


def interior_point(p, backend_options=None):
    """A point well inside the feasible set, or ``None``.

    One centring step of the barrier method on a tiny proximal objective;
    good enough as a strictly feasible warm start.
    """
    opts = backend_options or BackendOptions()
    sp = ScalarProblem(p.n, QuadraticFunction(np.zeros(p.n), 1e-6 * np.eye(p.n)), p.constraints)
    sol = BarrierBackend(BackendOptions(tolerance=np.inf, max_iterations=opts.max_iterations)).solve(sp)
    if sol.x is None or not np.all(np.isfinite(sol.x)):
        return None
    if any(c.violation(sol.x) > 0 for c in p.constraints if c.kind != LINEAR_EQ):
        return None
    return sol.x


class _Template:
    kind = ""

    def __init__(self, p):
        self.problem = p
        self.normals = p.cone.halfspace_normals
        self.row_fns = [weighted_objective(p, w) for w in self.normals]
        self.n_feasible_ineq = sum(1 for c in p.constraints if c.kind != LINEAR_EQ)
        self._interior = None
        self._lock = threading.Lock()

    def interior(self):
        with self._lock:
            if self._interior is None:
                x = interior_point(self.problem)
                self._interior = (x, None if x is None else evaluate_objectives(self.problem, x))
            return self._interior

    def cone_duals(self, duals):
        k = self.n_feasible_ineq
        return np.asarray(duals[k:k + len(self.normals)])


class WSTemplate(_Template):
    kind = "WS"

    def instantiate(self, w, key=None):
        p = self.problem
        w = np.asarray(w, dtype=float)
        if w.shape != (p.q,) or not np.any(w) or not p.cone.in_dual(w):
            raise WeightNotInDualCone(f"weight {w.tolist()} is not a nonzero element of the dual cone")
        return ScalarProblem(p.n, weighted_objective(p, w), p.constraints, key=key)


class PSTemplate(_Template):
    """``min t`` s.t. ``w_j' f(x) - t w_j' d <= w_j' v`` for every cone normal."""

    kind = "PS"

    def __init__(self, p):
        super().__init__(p)
        self.base = tuple(_pad_constraint(c, 1) for c in p.constraints)
        self.objective = QuadraticFunction(np.eye(1, p.n + 1, p.n).ravel())

    def instantiate(self, v, d, key=None, warm=True):
        p = self.problem
        v = np.asarray(v, dtype=float)
        d = np.asarray(d, dtype=float)
        wd = self.normals @ d
        if wd.min() <= TAU_CMP:
            raise DirectionNotInterior(f"direction {d.tolist()} is not in the interior of the cone")
        wv = self.normals @ v
        rows = tuple(_cone_row(fn, 1, (-wd[j],), wv[j]) for j, fn in enumerate(self.row_fns))
        start = None
        if warm:
            x_hat, f_hat = self.interior()
            if x_hat is not None:
                t_hat = np.max((self.normals @ f_hat - wv) / wd) + 1.0
                start = np.append(x_hat, t_hat)
        return ScalarProblem(p.n + 1, self.objective, self.base + rows, warm_start=start, key=key)

    def cut(self, sol, v, d):
        """Supporting halfspace through ``v + t* d`` from the cone multipliers."""
        lam = np.maximum(self.cone_duals(sol.duals), 0.0)
        w = lam @ self.normals
        point = np.asarray(v, dtype=float) + sol.x[-1] * np.asarray(d, dtype=float)
        return _halfspace(w, point)


class NMTemplate(_Template):
    """``min s`` s.t. ``||z|| <= s`` and ``w_j' f(x) - w_j' z <= w_j' v``."""

    kind = "NM"

    def __init__(self, p):
        super().__init__(p)
        n, q = p.n, p.q
        extra = q + 1
        self.base = tuple(_pad_constraint(c, extra) for c in p.constraints)
        A = np.zeros((q, n + extra))
        A[:, n:n + q] = np.eye(q)
        self.norm_con = Constraint.soc(A, np.zeros(q), np.eye(1, n + extra, n + q).ravel(), 0.0)
        self.objective = QuadraticFunction(np.eye(1, n + extra, n + q).ravel())

    def instantiate(self, v, key=None, warm=True):
        p = self.problem
        v = np.asarray(v, dtype=float)
        wv = self.normals @ v
        rows = tuple(
            _cone_row(fn, p.q + 1, np.append(-self.normals[j], 0.0), wv[j]) for j, fn in enumerate(self.row_fns)
        )
        start = None
        if warm:
            x_hat, f_hat = self.interior()
            if x_hat is not None:
                z = f_hat - v + p.cone.interior_direction
                start = np.concatenate([x_hat, z, [np.linalg.norm(z) + 1.0]])
        n_vars = p.n + p.q + 1
        return ScalarProblem(n_vars, self.objective, self.base + rows + (self.norm_con,), warm_start=start, key=key)

    def split(self, sol):
        """``(x, z)`` from a solution vector."""
        n, q = self.problem.n, self.problem.q
        return sol.x[:n], sol.x[n:n + q]

    def cut(self, sol, v):
        lam = np.maximum(self.cone_duals(sol.duals), 0.0)
        w = lam @ self.normals
        return _halfspace(w, np.asarray(v, dtype=float) + self.split(sol)[1])


def _halfspace(w, point):
    norm = np.linalg.norm(w)
    if not np.isfinite(norm) or norm <= TAU_CMP:
        return None
    w = w / norm
    return Halfspace(w, float(w @ point))


def build_ws(p, w):
    return WSTemplate(p).instantiate(w)


def build_ps(p, v, d):
    return PSTemplate(p).instantiate(v, d, warm=False)


def build_nm(p, v):
    return NMTemplate(p).instantiate(v, warm=False)


def build_projection(z, vertices, rays=None):
    """Nearest point of ``conv(vertices) + cone(rays)`` to ``z`` as an SOC problem.

    Variables ``(lam, mu, tau)``: minimise ``tau`` subject to
    ``||V' lam + R' mu - z|| <= tau``, ``sum(lam) = 1``, ``lam, mu >= 0``.
    Returns the problem and a function mapping a solution vector to the point.
    """
    z = np.asarray(z, dtype=float)
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    R = np.zeros((0, z.size)) if rays is None else np.asarray(rays, dtype=float).reshape(-1, z.size)
    s, r = V.shape[0], R.shape[0]
    n = s + r + 1
    G = np.hstack([V.T, R.T, np.zeros((z.size, 1))])
    cons = [Constraint.soc(G, -z, np.eye(1, n, n - 1).ravel(), 0.0)]
    cons.append(Constraint.linear_eq(np.concatenate([np.ones(s), np.zeros(r + 1)]), 1.0))
    cons.extend(Constraint.linear_ineq(-np.eye(1, n, i).ravel(), 0.0) for i in range(s + r))
    start_lm = np.concatenate([np.full(s, 1.0 / s), np.ones(r)])
    start = np.append(start_lm, np.linalg.norm(G[:, :-1] @ start_lm - z) + 1.0)
    sp = ScalarProblem(n, QuadraticFunction(np.eye(1, n, n - 1).ravel()), cons, warm_start=start)

    def recover(x):
        return G[:, :-1] @ x[:-1]

    return sp, recover


def build_cone_projection(z, points, cone):
    """Nearest point of ``conv(points) + C`` to ``z``, with ``C`` given by its normals.

    Variables ``(lam, e, tau)`` where ``e`` is the offset from ``z`` to the
    nearest point: minimise ``tau`` subject to ``||e|| <= tau``,
    ``W (z + e - Y' lam) >= 0``, ``sum(lam) = 1``, ``lam >= 0``.  Solving for
    the offset keeps the problem well scaled when ``z`` lies far out along a
    recession direction.
    """
    z = np.asarray(z, dtype=float)
    Y = np.atleast_2d(np.asarray(points, dtype=float))
    W = cone.halfspace_normals
    s, q = Y.shape
    n = s + q + 1
    A = np.zeros((q, n))
    A[:, s:s + q] = np.eye(q)
    tau = np.eye(1, n, n - 1).ravel()
    cons = [Constraint.soc(A, np.zeros(q), tau, 0.0)]
    WY = W @ Y.T
    Wz = W @ z
    cons.extend(Constraint.linear_ineq(np.concatenate([WY[j], -W[j], [0.0]]), Wz[j]) for j in range(W.shape[0]))
    cons.append(Constraint.linear_eq(np.concatenate([np.ones(s), np.zeros(q + 1)]), 1.0))
    cons.extend(Constraint.linear_ineq(-np.eye(1, n, i).ravel(), 0.0) for i in range(s))
    lam = np.full(s, 1.0 / s)
    e = Y.T @ lam - z + cone.interior_direction
    start = np.concatenate([lam, e, [np.linalg.norm(e) + 1.0]])
    sp = ScalarProblem(n, QuadraticFunction(tau), cons, warm_start=start)

    def recover(x):
        return z + x[s:s + q]

    return sp, recover


def parameter_key(kind, *params, scale=1.0):
    """Kind tag followed by the parameters divided by ``scale`` and rounded."""
    flat = np.concatenate([np.ravel(np.asarray(a, dtype=float)) for a in params]) / scale
    return (kind,) + tuple(float(x) + 0.0 for x in np.round(flat, ROUND_DIGITS))


class FailureCache:
    """Rounded parameter keys that ended in a failed solve.

    Access is serialised by an internal lock, so the coordinator and worker
    threads may share one cache.
    """

    def __init__(self):
        self._failed = set()
        self._lock = threading.Lock()

    def __contains__(self, key):
        with self._lock:
            return key in self._failed

    def __len__(self):
        return len(self._failed)

    def record(self, key):
        with self._lock:
            self._failed.add(key)

    def keys(self):
        with self._lock:
            return sorted(self._failed, key=repr)


def cache_check_and_insert(fc, params):
    """True when ``params`` (already a key or a raw tuple) should be skipped."""
    key = params if isinstance(params, tuple) and params and isinstance(params[0], str) else parameter_key("", params)
    return key in fc


@dataclass(frozen=True)
class Templates:
    ws: WSTemplate
    ps: PSTemplate
    nm: NMTemplate

    @classmethod
    def for_problem(cls, p):
        return cls(WSTemplate(p), PSTemplate(p), NMTemplate(p))
