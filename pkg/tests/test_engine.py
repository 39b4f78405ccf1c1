from collections import Counter

import numpy as np
import pytest
from oracles import same_point_sets

from vopt.cone import cone_from_rays
from vopt.engine import (
    Algorithm,
    ConeNotSupported,
    Infeasible,
    SolveOptions,
    Status,
    Unbounded,
    check_stopping,
    initialize,
    run_adena,
    run_monmo,
    run_movs,
    run_parallel,
    solve,
)
from vopt.model import Constraint, QuadraticFunction, VectorProblem, evaluate_objectives
from vopt.scalar_backend import TAU_FEAS, BarrierBackend

SQRT2 = np.sqrt(2.0)
C1_RAYS = ((1.0, 2.0), (2.0, 1.0))


def infeasible_problem():
    cons = [Constraint.linear_ineq([1.0, 0.0], -1.0), Constraint.linear_ineq([-1.0, 0.0], -1.0)]
    return VectorProblem(2, [QuadraticFunction([1.0, 0.0]), QuadraticFunction([0.0, 1.0])], cons)


def unbounded_problem():
    # x1 + x2 >= 0 leaves each objective unbounded below on its own
    cons = [Constraint.linear_ineq([-1.0, -1.0], 0.0)]
    return VectorProblem(2, [QuadraticFunction([1.0, 0.0]), QuadraticFunction([0.0, 1.0])], cons)


class CountingBackend:
    def __init__(self):
        self.inner = BarrierBackend()
        self.keys = Counter()

    def solve(self, sp):
        self.keys[sp.key] += 1
        return self.inner.solve(sp)


def test_check_stopping_examples():
    assert check_stopping(0.005, 10, 1e-2)
    assert check_stopping(0.005, 0.2, 1e-2)
    assert not check_stopping(0.02, 0.2, 1e-2)


def test_options_defaults():
    opts = SolveOptions()
    assert opts.algorithm is Algorithm.MOVS
    assert (opts.eps_opt, opts.max_iter, opts.batch_size) == (1e-2, 500, opts.thread_count)
    assert SolveOptions(thread_count=3).batch_size == 3
    for bad in ({"eps_opt": 0}, {"max_iter": -1}, {"batch_size": 0}, {"algorithm": "simplex"}):
        with pytest.raises(ValueError):
            SolveOptions(**bad)


def test_initialize_disc(disc):
    X0, O0, status = initialize(disc)
    assert status == "ok"
    assert same_point_sets(X0, [[0, 1], [1, 0]], tol=1e-4)
    assert same_point_sets(np.column_stack([O0.normals, O0.offsets]), [[1, 0, 0], [0, 1, 0]], tol=1e-7)


def test_initialize_disc_skewed_cone(disc):
    p = disc.with_cone(cone_from_rays(C1_RAYS))
    X0, O0, _ = initialize(p)
    assert X0.shape == (2, 2)
    # min of w.f over the disc is w.(1,1) - ||w|| for unit w
    for w, b in zip(O0.normals, O0.offsets):
        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert b == pytest.approx(w.sum() - 1.0, abs=1e-7)
    assert same_point_sets(O0.normals, np.array([[2, -1], [-1, 2]]) / np.sqrt(5), tol=1e-9)


def test_initialize_flags():
    with pytest.raises(Infeasible):
        initialize(infeasible_problem())
    with pytest.raises(Unbounded):
        initialize(unbounded_problem())


@pytest.mark.parametrize("algorithm", ["movs", "monmo", "adena"])
def test_status_flags(algorithm):
    for p, status in ((infeasible_problem(), Status.INFEASIBLE), (unbounded_problem(), Status.UNBOUNDED)):
        r = solve(p, SolveOptions(algorithm=algorithm))
        assert r.status is status
        assert r.metric_trace == []


@pytest.mark.parametrize("driver", [run_movs, run_monmo, run_adena])
def test_max_iter_zero_returns_initial_solutions(disc, driver):
    r = driver(disc, SolveOptions(max_iter=0))
    assert r.status is Status.MAX_ITER_REACHED
    assert same_point_sets(r.solutions, [[0, 1], [1, 0]], tol=1e-4)
    assert len(r.metric_trace) == 1


def test_monmo_first_vertex_and_refinement(disc):
    r = run_monmo(disc, SolveOptions(max_iter=1))
    assert r.metric_trace[0] == pytest.approx(SQRT2 - 1, abs=1e-7)
    assert r.metric_trace[1] < r.metric_trace[0]


def test_adena_refuses_general_cone(disc):
    with pytest.raises(ConeNotSupported):
        run_adena(disc.with_cone(cone_from_rays(C1_RAYS)))
    with pytest.raises(ValueError):
        run_parallel(disc, SolveOptions(), driver="adena")


@pytest.mark.parametrize("algorithm", ["movs", "monmo", "adena"])
def test_result_invariants(disc, run_solver, algorithm):
    r = run_solver("disc", algorithm)
    assert r.status is Status.SOLVED
    assert r.final_metric <= r.threshold
    for x, y in zip(r.solutions, r.images):
        assert np.allclose(evaluate_objectives(disc, x), y, atol=1e-8)
    assert np.all(disc.cone.halfspace_normals @ r.weights.T >= -1e-9)
    assert np.allclose(np.linalg.norm(r.weights, axis=1), 1.0)


@pytest.mark.parametrize("algorithm", ["movs", "monmo"])
def test_outer_approximation_contains_images(run_solver, algorithm):
    for name in ("disc", "ellipsoid"):
        r = run_solver(name, algorithm)
        slack = r.outer.normals @ r.images.T - r.outer.offsets[:, None]
        assert slack.min() >= -TAU_FEAS


def test_monmo_trace_nonincreasing(run_solver):
    for name in ("disc", "ellipsoid", "triobjective"):
        trace = np.array(run_solver(name, "monmo").metric_trace)
        assert np.all(np.diff(trace) <= 1e-12)


def test_ellipsoid_images_active(problems, run_solver):
    p = problems["ellipsoid"]
    (con,) = [c for c in p.constraints if c.kind == "quadratic_ineq"]
    r = run_solver("ellipsoid", "movs")
    assert r.status is Status.SOLVED
    assert max(abs(con.fn(x)) for x in r.solutions) <= 1e-3


@pytest.mark.parametrize("algorithm", ["movs", "monmo"])
def test_batch_of_one_matches_sequential(disc, algorithm):
    seq = solve(disc, SolveOptions(algorithm=algorithm))
    par = run_parallel(disc, SolveOptions(algorithm=algorithm, batch_size=1, thread_count=2))
    assert par.metric_trace == seq.metric_trace
    assert np.array_equal(par.images, seq.images)


@pytest.mark.parametrize("algorithm", ["movs", "monmo", "adena"])
def test_no_key_submitted_twice(disc, algorithm):
    backend = CountingBackend()
    r = solve(disc, SolveOptions(algorithm=algorithm, backend=backend))
    assert r.status is Status.SOLVED
    assert max(backend.keys.values()) == 1
    assert r.subproblem_count == sum(backend.keys.values())
