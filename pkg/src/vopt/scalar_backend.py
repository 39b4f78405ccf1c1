"""Single-objective convex subproblems and the built-in barrier solver.

The engine talks to backends only through ``backend.solve(ScalarProblem)``.
The reference backend is a primal log-barrier interior-point method:

* linear equalities are eliminated, ``x = x0 + N y`` with ``N`` a null-space
  basis;
* phase 1 minimises a common slack ``s`` over ``g_i(x) <= s`` and stops as
  soon as ``s < 0``;
* phase 2 follows the central path ``min f0/mu + barrier`` with
  ``mu <- mu/10`` and damped Newton steps.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import lsq_linear

from .model import LINEAR_EQ, LINEAR_INEQ, QUADRATIC_INEQ, SOC, Constraint, QuadraticFunction

log = logging.getLogger(__name__)

TAU_FEAS = 1e-7
TAU_KKT = 1e-7
UNBOUNDED_BELOW = -1e13
MU0 = 1.0
MU_FACTOR = 10.0
MAX_OUTER = 50
NEWTON_TOL = 1e-9
PHASE_ONE_GAP = 1e-10


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True, eq=False)
class ScalarProblem:
    """``min objective(x)`` subject to ``constraints``.

    ``key`` identifies the parameter combination that produced the instance;
    backends may ignore it.
    """

    n_vars: int
    objective: QuadraticFunction
    constraints: tuple = ()
    warm_start: np.ndarray | None = None
    key: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.objective.n != self.n_vars:
            raise ValueError("objective dimension does not match n_vars")
        for con in self.constraints:
            if con.n != self.n_vars:
                raise ValueError("constraint dimension does not match n_vars")

    @property
    def inequalities(self):
        return [c for c in self.constraints if c.kind != LINEAR_EQ]


@dataclass
class ScalarSolution:
    status: SolveStatus
    x: np.ndarray | None = None
    objective_value: float = np.nan
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = np.inf
    newton_steps: int = 0
    path: list = field(default_factory=list)


@dataclass(frozen=True)
class BackendOptions:
    """``tolerance`` bounds the barrier duality gap; ``max_iterations`` the
    Newton steps per centering."""

    tolerance: float = 1e-9
    max_iterations: int = 100
    verbose: bool = False

    def to_dict(self):
        return {"tolerance": self.tolerance, "max_iterations": self.max_iterations, "verbose": self.verbose}


class _Problem:
    """Objective and inequalities in reduced coordinates ``y``.

    ``lin``: ``A y <= b``; ``quad``: ``0.5 y'Qy + c'y + d <= 0``;
    ``soc``: ``||A y + b|| <= c'y + d``.
    """

    def __init__(self, k, obj, lin, quad, soc):
        self.k = k
        self.obj = obj
        self.lin = lin
        self.quad = quad
        self.soc = soc
        self.degree = lin[0].shape[0] + quad[0].shape[0] + 2 * len(soc)

    @classmethod
    def reduce(cls, sp, x0, N):
        k = N.shape[1]

        def quadratic(fn):
            Q = fn.hessian
            return (N.T @ Q @ N, N.T @ (Q @ x0 + fn.c), fn(x0))

        lin_a, lin_b, quads, socs = [], [], [], []
        for con in sp.constraints:
            if con.kind == LINEAR_INEQ:
                lin_a.append(N.T @ con.a)
                lin_b.append(con.b - con.a @ x0)
            elif con.kind == QUADRATIC_INEQ:
                quads.append(quadratic(con.fn))
            elif con.kind == SOC:
                socs.append((con.A @ N, con.A @ x0 + con.b, N.T @ con.c, con.c @ x0 + con.d))
        lin = (np.array(lin_a).reshape(-1, k), np.array(lin_b, dtype=float))
        if quads:
            quad = tuple(np.array(a) for a in zip(*quads))
        else:
            quad = (np.zeros((0, k, k)), np.zeros((0, k)), np.zeros(0))
        return cls(k, quadratic(sp.objective), lin, quad, socs)

    def phase_one(self, s_floor):
        """Same constraints relaxed by an extra last variable ``s``; objective ``s``."""
        k = self.k
        A, b = self.lin
        A1 = np.vstack([np.hstack([A, -np.ones((A.shape[0], 1))]), np.eye(1, k + 1, k) * -1.0])
        b1 = np.append(b, -s_floor)
        Q, c, d = self.quad
        Q1 = np.zeros((Q.shape[0], k + 1, k + 1))
        Q1[:, :k, :k] = Q
        c1 = np.hstack([c, -np.ones((c.shape[0], 1))])
        soc1 = [(np.hstack([Ai, np.zeros((Ai.shape[0], 1))]), bi, np.append(ci, 1.0), di) for Ai, bi, ci, di in self.soc]
        obj = (np.zeros((k + 1, k + 1)), np.eye(1, k + 1, k).ravel(), 0.0)
        return _Problem(k + 1, obj, (A1, b1), (Q1, c1, d.copy()), soc1)

    def objective(self, y):
        Q, c, d = self.obj
        return 0.5 * y @ Q @ y + c @ y + d

    def slacks(self, y):
        """Scalar slacks (linear then quadratic) and SOC pairs ``(u, ||v||)``."""
        A, b = self.lin
        Q, c, d = self.quad
        s_lin = b - A @ y
        s_quad = -(0.5 * np.einsum("i,kij,j->k", y, Q, y) + c @ y + d)
        soc = [(ci @ y + di, np.linalg.norm(Ai @ y + bi)) for Ai, bi, ci, di in self.soc]
        return s_lin, s_quad, soc

    def max_violation(self, y):
        s_lin, s_quad, soc = self.slacks(y)
        viol = [0.0]
        if s_lin.size:
            viol.append(-s_lin.min())
        if s_quad.size:
            viol.append(-s_quad.min())
        viol.extend(nv - u for u, nv in soc)
        return max(viol)

    def barrier_value(self, y):
        s_lin, s_quad, soc = self.slacks(y)
        if (s_lin.size and s_lin.min() <= 0) or (s_quad.size and s_quad.min() <= 0):
            return np.inf
        val = -np.log(s_lin).sum() - np.log(s_quad).sum()
        for u, nv in soc:
            if u <= 0 or u <= nv:
                return np.inf
            val -= np.log((u - nv) * (u + nv))
        return val

    def barrier_derivatives(self, y):
        k = self.k
        A, b = self.lin
        Q, c, d = self.quad
        s_lin = b - A @ y
        inv = 1.0 / s_lin
        grad = A.T @ inv
        hess = (A.T * inv**2) @ A
        if Q.shape[0]:
            gq = np.einsum("kij,j->ki", Q, y) + c
            s_quad = -(0.5 * gq @ y + 0.5 * c @ y + d)
            iq = 1.0 / s_quad
            grad += gq.T @ iq
            hess += np.einsum("k,kij->ij", iq, Q) + (gq.T * iq**2) @ gq
        for Ai, bi, ci, di in self.soc:
            u = ci @ y + di
            v = Ai @ y + bi
            psi = u * u - v @ v
            dpsi = 2.0 * (u * ci - Ai.T @ v)
            grad -= dpsi / psi
            hess += np.outer(dpsi, dpsi) / psi**2 - 2.0 * (np.outer(ci, ci) - Ai.T @ Ai) / psi
        return grad, hess + np.zeros((k, k))


def _newton_direction(H, g):
    reg = 1e-13 * max(1.0, np.abs(np.diag(H)).max(initial=0.0))
    H = H + reg * np.eye(H.shape[0])
    try:
        L = np.linalg.cholesky(H)
        z = np.linalg.solve(L, g)
        return -np.linalg.solve(L.T, z)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(H, g, rcond=None)[0]


class _Diverged(Exception):
    pass


def _center(prob, y, t, max_steps, stop=None):
    """Damped Newton on ``t f0 + barrier`` from a strictly feasible ``y``.

    Returns ``(y, steps, converged)``; ``stop(y)`` may end the run early.
    """
    Q, c, _ = prob.obj

    def value(z):
        return t * prob.objective(z) + prob.barrier_value(z)

    fy = value(y)
    for step in range(1, max_steps + 1):
        gb, Hb = prob.barrier_derivatives(y)
        g = t * (Q @ y + c) + gb
        dy = _newton_direction(t * Q + Hb, g)
        dec = -g @ dy
        if dec / 2.0 <= NEWTON_TOL:
            return y, step, True
        alpha = 1.0
        if dec < 0.0625:
            # quadratic region of a self-concordant function: full steps, domain only
            while not np.isfinite(fc := value(cand := y + alpha * dy)):
                alpha *= 0.5
                if alpha < 1e-14:
                    return y, step, False
        else:
            while True:
                cand = y + alpha * dy
                fc = value(cand)
                if fc <= fy - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
                if alpha < 1e-14:
                    return y, step, False
        y, fy = cand, fc
        if prob.objective(y) < UNBOUNDED_BELOW:
            raise _Diverged
        if stop is not None and stop(y):
            return y, step, True
    return y, max_steps, False


class BarrierBackend:
    """Reference primal barrier interior-point solver."""

    name = "barrier"

    def __init__(self, options=None):
        self.options = options or BackendOptions()

    def solve(self, sp):
        sol = self._attempt(sp)
        if sol.status is SolveStatus.NUMERICAL_FAILURE and sp.warm_start is not None:
            # a warm start far from the optimum can exhaust the Newton budget
            # of the first centring; phase 1 starts closer to the central path
            log.debug("warm start failed, retrying from phase 1")
            cold = self._attempt(replace(sp, warm_start=None))
            cold.newton_steps += sol.newton_steps
            return cold
        return sol

    def _attempt(self, sp):
        try:
            return self._solve(sp)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError, OverflowError) as exc:
            log.debug("barrier solve failed: %s", exc)
            return ScalarSolution(SolveStatus.NUMERICAL_FAILURE)

    def _solve(self, sp):
        opts = self.options
        n = sp.n_vars
        eqs = [c for c in sp.constraints if c.kind == LINEAR_EQ]
        if eqs:
            Aeq = np.array([c.a for c in eqs])
            beq = np.array([c.b for c in eqs])
            x0 = np.linalg.lstsq(Aeq, beq, rcond=None)[0]
            if np.abs(Aeq @ x0 - beq).max() > TAU_FEAS * (1.0 + np.abs(beq).max()):
                return ScalarSolution(SolveStatus.INFEASIBLE)
            _, sv, vt = np.linalg.svd(Aeq)
            rank = int((sv > 1e-12 * max(1.0, sv[0])).sum())
            N = vt[rank:].T
        else:
            x0, N = np.zeros(n), np.eye(n)
        if sp.warm_start is not None:
            warm = x0 + N @ (N.T @ (np.asarray(sp.warm_start, dtype=float) - x0))
            warm_prob = _Problem.reduce(sp, warm, N)
            # a warm start only pays off by skipping phase 1; phase 1 from a
            # distant infeasible point loses its slack to rounding
            if np.isfinite(warm_prob.barrier_value(np.zeros(warm_prob.k))):
                x0 = warm
        prob = _Problem.reduce(sp, x0, N)
        y = np.zeros(prob.k)
        steps = 0

        if not np.isfinite(prob.barrier_value(y)):
            y, s_end, steps = self._phase_one(prob, y)
            if y is None:
                status = SolveStatus.INFEASIBLE if s_end > TAU_FEAS else SolveStatus.NUMERICAL_FAILURE
                return ScalarSolution(status, newton_steps=steps)
            x0, prob, y = self._rebase(sp, x0, N, y)

        mu = MU0
        path = []
        degree = max(prob.degree, 1)
        try:
            for _ in range(MAX_OUTER):
                y, k, ok = _center(prob, y, 1.0 / mu, opts.max_iterations)
                steps += k
                path.append(float(prob.objective(y)))
                if opts.verbose:
                    log.info("mu=%.1e objective=%.12g newton=%d", mu, path[-1], k)
                if degree * mu <= opts.tolerance or prob.degree == 0 and ok:
                    break
                mu /= MU_FACTOR
                x0, prob, y = self._rebase(sp, x0, N, y)
        except _Diverged:
            return ScalarSolution(SolveStatus.UNBOUNDED, x0 + N @ y, -np.inf, newton_steps=steps, path=path)

        x = x0 + N @ y
        duals, kkt = self._kkt(sp, prob, y, N, mu)
        value = sp.objective(x)
        status = SolveStatus.OPTIMAL if kkt <= TAU_KKT else SolveStatus.NUMERICAL_FAILURE
        if status is SolveStatus.NUMERICAL_FAILURE:
            log.debug("barrier ended with KKT residual %.3g", kkt)
        return ScalarSolution(status, x, value, duals, kkt, steps, path)

    @staticmethod
    def _rebase(sp, x0, N, y):
        """Move the anchor of ``x = x0 + N y`` to the current iterate.

        Keeps Newton steps representable when the iterate travels far from
        the starting point.
        """
        x0 = x0 + N @ y
        return x0, _Problem.reduce(sp, x0, N), np.zeros_like(y)

    def _phase_one(self, prob, y):
        """Strictly feasible ``y`` or ``(None, final slack, steps)``."""
        s0 = prob.max_violation(y) + 1.0
        p1 = prob.phase_one(s_floor=-1.0)
        w = np.append(y, s0)
        steps = 0
        mu = MU0

        def strictly_feasible(z):
            return z[-1] < 0 and np.isfinite(prob.barrier_value(z[:-1]))

        for _ in range(MAX_OUTER):
            try:
                w, k, _ = _center(p1, w, 1.0 / mu, self.options.max_iterations, stop=strictly_feasible)
            except _Diverged:
                return None, np.inf, steps
            steps += k
            if strictly_feasible(w):
                return w[:-1], w[-1], steps
            if mu * max(p1.degree, 1) <= PHASE_ONE_GAP:
                break
            mu /= MU_FACTOR
        return None, prob.max_violation(w[:-1]), steps

    @staticmethod
    def _kkt(sp, prob, y, N, mu):
        """Multipliers and the scaled KKT residual.

        Barrier multipliers ``mu / slack`` lose digits once slacks approach
        rounding level, so they are refined by least squares on the
        near-active constraints, under a sign constraint, whenever that
        lowers the stationarity residual.
        """
        A, b = prob.lin
        Qs, cs, _ = prob.quad
        s_lin, s_quad, soc = prob.slacks(y)
        lam, cols, slack = [], [], []
        li = qi = si = 0
        for con in sp.inequalities:
            if con.kind == LINEAR_INEQ:
                s = s_lin[li]
                lam.append(mu / s)
                cols.append(A[li])
                li += 1
            elif con.kind == QUADRATIC_INEQ:
                s = s_quad[qi]
                lam.append(mu / s)
                cols.append(Qs[qi] @ y + cs[qi])
                qi += 1
            else:
                Ai, bi, ci, _ = prob.soc[si]
                u, nv = soc[si]
                s = u - nv
                lam.append(2.0 * mu * u / (s * (u + nv)))
                # conic multiplier pair (lam_u, lam_u v / u) taken from the barrier
                cols.append(Ai.T @ (Ai @ y + bi) / u - ci)
                si += 1
            slack.append(s)
        grad = prob.obj[0] @ y + prob.obj[1]
        lam = np.array(lam)
        slack = np.array(slack)
        G = np.array(cols).reshape(-1, prob.k).T

        def stationarity(m):
            # relative to the magnitude of the summed terms, which bounds the
            # rounding error of the sum itself
            scale = 1.0 + (np.abs(grad) + np.abs(G) @ np.abs(m)).max(initial=0.0)
            return np.abs(grad + G @ m).max(initial=0.0) / scale

        resid = stationarity(lam)
        active = np.flatnonzero(slack <= 1e-6 * max(1.0, np.abs(slack).max(initial=0.0)))
        if active.size and resid > 0:
            other = np.setdiff1d(np.arange(lam.size), active)
            rhs = -(grad + G[:, other] @ lam[other])
            refined = lam.copy()
            # bvls: scipy's nnls can stop at non-optimal points on ill-scaled columns
            refined[active] = lsq_linear(G[:, active], rhs, bounds=(0.0, np.inf), method="bvls").x
            if stationarity(refined) < resid:
                lam, resid = refined, stationarity(refined)
        comp = np.abs(lam * slack).max(initial=0.0)
        primal = max(prob.max_violation(y), 0.0)
        log.debug("kkt parts stat=%.3g primal=%.3g comp=%.3g", resid, primal, comp)
        return lam, max(resid, primal, comp)


def reference_backend(options=None):
    return BarrierBackend(options)


def solve_scalar(sp, opts=None):
    return BarrierBackend(opts).solve(sp)


__all__ = [
    "BackendOptions",
    "BarrierBackend",
    "Constraint",
    "ScalarProblem",
    "ScalarSolution",
    "SolveStatus",
    "reference_backend",
    "solve_scalar",
]
