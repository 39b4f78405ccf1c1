import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import active_set_qp, brute_force_vertices

from vopt.model import Constraint, QuadraticFunction
from vopt.scalar_backend import (
    TAU_FEAS,
    TAU_KKT,
    BackendOptions,
    BarrierBackend,
    ScalarProblem,
    SolveStatus,
    reference_backend,
    solve_scalar,
)

SQRT2 = np.sqrt(2.0)


def box_constraints(lo, hi):
    n = len(lo)
    eye = np.eye(n)
    return [Constraint.linear_ineq(eye[i], hi[i]) for i in range(n)] + [
        Constraint.linear_ineq(-eye[i], -lo[i]) for i in range(n)
    ]


def slack(con, x):
    if con.kind == "linear_ineq":
        return con.b - con.a @ x
    if con.kind == "quadratic_ineq":
        return -con.fn(x)
    return con.c @ x + con.d - np.linalg.norm(con.A @ x + con.b)


def check_optimal(sp, sol):
    assert sol.status is SolveStatus.OPTIMAL
    assert max(c.violation(sol.x) for c in sp.constraints) <= TAU_FEAS
    assert sol.kkt_residual <= TAU_KKT
    assert sol.duals.min(initial=0.0) >= -1e-9


def test_disc_min_x1(disc):
    sp = ScalarProblem(2, QuadraticFunction([1.0, 0.0]), disc.constraints)
    sol = solve_scalar(sp)
    check_optimal(sp, sol)
    assert np.allclose(sol.x, [0, 1], atol=1e-4)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-7)


def test_disc_min_sum(disc):
    sp = ScalarProblem(2, QuadraticFunction([1.0, 1.0]), disc.constraints)
    sol = solve_scalar(sp)
    check_optimal(sp, sol)
    assert sol.objective_value == pytest.approx(2 - SQRT2, abs=1e-7)
    assert np.allclose(sol.x, 1 - SQRT2 / 2, atol=1e-6)


def test_unbounded_halfline():
    sp = ScalarProblem(1, QuadraticFunction([1.0]), [Constraint.linear_ineq([1.0], 0.0)])
    assert solve_scalar(sp).status is SolveStatus.UNBOUNDED


def test_infeasible():
    cons = [Constraint.linear_ineq([1.0], -1.0), Constraint.linear_ineq([-1.0], -1.0)]
    assert solve_scalar(ScalarProblem(1, QuadraticFunction([1.0]), cons)).status is SolveStatus.INFEASIBLE


def test_inconsistent_equalities():
    cons = [Constraint.linear_eq([1.0, 0.0], 0.0), Constraint.linear_eq([1.0, 0.0], 1.0)]
    assert solve_scalar(ScalarProblem(2, QuadraticFunction([0.0, 1.0]), cons)).status is SolveStatus.INFEASIBLE


def test_equality_elimination():
    # min x1^2 + x2^2 on x1 + x2 = 1 with x >= 0
    cons = [Constraint.linear_eq([1.0, 1.0], 1.0)] + box_constraints([0, 0], [5, 5])
    sp = ScalarProblem(2, QuadraticFunction(np.zeros(2), 2 * np.eye(2)), cons)
    sol = solve_scalar(sp)
    check_optimal(sp, sol)
    assert np.allclose(sol.x, [0.5, 0.5], atol=1e-7)


def test_soc_constraint():
    # min x1 + x2 on the unit disc written as ||x|| <= 1
    soc = Constraint.soc(np.eye(2), np.zeros(2), np.zeros(2), 1.0)
    sp = ScalarProblem(2, QuadraticFunction([1.0, 1.0]), [soc])
    sol = solve_scalar(sp)
    check_optimal(sp, sol)
    assert sol.objective_value == pytest.approx(-SQRT2, abs=1e-7)


def test_reference_backend_uses_options():
    b = reference_backend(BackendOptions(max_iterations=7))
    assert isinstance(b, BarrierBackend)
    assert b.options.to_dict() == {"tolerance": 1e-9, "max_iterations": 7, "verbose": False}


def test_lp_over_boxes_matches_vertex_oracle():
    rng = np.random.default_rng(11)
    backend = BarrierBackend()
    for _ in range(50):
        n = int(rng.integers(1, 5))
        lo = rng.uniform(-3, 0, n)
        hi = lo + rng.uniform(0.5, 3, n)
        c = rng.normal(size=n)
        sp = ScalarProblem(n, QuadraticFunction(c), box_constraints(lo, hi))
        sol = backend.solve(sp)
        # a box LP is minimised at the corner picking lo or hi per sign of c
        best = c @ np.where(c > 0, lo, hi)
        assert sol.status is SolveStatus.OPTIMAL
        assert abs(sol.objective_value - best) <= 1e-6


def random_polytope(rng, n):
    lo, hi = -np.ones(n), np.ones(n)
    cons = box_constraints(lo, hi)
    A = rng.normal(size=(int(rng.integers(0, 4)), n))
    b = rng.uniform(0.1, 1.0, A.shape[0]) * np.linalg.norm(A, axis=1)
    cons += [Constraint.linear_ineq(a, bi) for a, bi in zip(A, b)]
    A_all = np.vstack([np.eye(n), -np.eye(n), A])
    b_all = np.concatenate([hi, -lo, b])
    return cons, A_all, b_all


@settings(max_examples=40)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_projection_qp_matches_active_set_oracle(n, seed):
    rng = np.random.default_rng(seed)
    cons, A, b = random_polytope(rng, n)
    z = rng.uniform(-3, 3, n)
    # ||x - z||^2 = x'x - 2 z'x + z'z
    sp = ScalarProblem(n, QuadraticFunction(-2 * z, 2 * np.eye(n), z @ z), cons)
    sol = solve_scalar(sp)
    val, x = active_set_qp(2 * np.eye(n), -2 * z, A, b)
    check_optimal(sp, sol)
    assert sol.objective_value == pytest.approx(val + z @ z, abs=1e-6)
    assert np.allclose(sol.x, x, atol=1e-4)


def test_vertex_oracle_agrees_on_lp_vertex():
    # cross-check the LP optimum against brute-force vertex enumeration in H-form
    cons, A, b = random_polytope(np.random.default_rng(5), 2)
    verts = brute_force_vertices(-A, -b)
    c = np.array([0.3, -1.1])
    sol = solve_scalar(ScalarProblem(2, QuadraticFunction(c), cons))
    assert sol.objective_value == pytest.approx((verts @ c).min(), abs=1e-6)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1))
def test_warm_start_matches_cold(seed):
    rng = np.random.default_rng(seed)
    n = 3
    cons, _, _ = random_polytope(rng, n)
    M = rng.normal(size=(n, n))
    obj = QuadraticFunction(rng.normal(size=n), M @ M.T)
    cold = solve_scalar(ScalarProblem(n, obj, cons))
    warm_x = rng.uniform(-0.05, 0.05, n)
    warm = solve_scalar(ScalarProblem(n, obj, cons, warm_start=warm_x))
    assert cold.status is SolveStatus.OPTIMAL and warm.status is SolveStatus.OPTIMAL
    assert abs(cold.objective_value - warm.objective_value) <= 1e-7


def test_far_infeasible_warm_start(disc):
    sp = ScalarProblem(2, QuadraticFunction([1.0, 1.0]), disc.constraints, warm_start=np.array([1e7, -1e7]))
    assert solve_scalar(sp).objective_value == pytest.approx(2 - SQRT2, abs=1e-7)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1))
def test_invariants_on_random_qcqp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    cons, _, _ = random_polytope(rng, n)
    center = rng.uniform(-0.3, 0.3, n)
    # ||x - center||^2 <= r^2
    r = rng.uniform(0.4, 1.2)
    cons.append(Constraint.quadratic_ineq(QuadraticFunction(-2 * center, 2 * np.eye(n), center @ center - r * r)))
    obj = QuadraticFunction(rng.normal(size=n), np.diag(rng.uniform(0, 1, n)))
    sp = ScalarProblem(n, obj, cons)
    sol = solve_scalar(sp)
    if sol.status is SolveStatus.INFEASIBLE:
        return
    check_optimal(sp, sol)
    slacks = np.array([slack(c, sol.x) for c in sp.inequalities])
    assert np.abs(sol.duals * slacks).max() <= 1e-6
    path = np.array(sol.path)
    assert np.all(np.diff(path) <= 1e-9 * (1 + np.abs(path[:-1])))
