import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_force_vertices, same_point_sets
from scipy.optimize import linprog

from vopt.polytope import (
    EmptyPolyhedron,
    Halfspace,
    NotNested,
    Polyhedron,
    add_halfspace,
    distance_point_to_polyhedron,
    enumerate_vertices,
    hausdorff_nested,
    remove_redundant,
)

SQRT2 = np.sqrt(2.0)


def box(lo=0.0, hi=1.0, q=2):
    eye = np.eye(q)
    return Polyhedron(np.vstack([eye, -eye]), np.concatenate([np.full(q, lo), np.full(q, -hi)]))


def upper_set(corner):
    corner = np.asarray(corner, dtype=float)
    return Polyhedron(np.eye(corner.size), corner)


def test_unit_box_vertices():
    v, r = enumerate_vertices(box())
    assert same_point_sets(v, [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert r.shape[0] == 0


def test_orthant_translate():
    v, r = enumerate_vertices(upper_set([1, 2]))
    assert same_point_sets(v, [[1, 2]])
    assert same_point_sets(r, [[1, 0], [0, 1]])


def test_cut_orthant():
    p = Polyhedron([[1, 1], [1, 0], [0, 1]], [1, 0, 0])
    v, r = enumerate_vertices(p)
    assert same_point_sets(v, [[1, 0], [0, 1]])
    assert same_point_sets(r, [[1, 0], [0, 1]])


def test_empty_polyhedron():
    p = add_halfspace(box(), Halfspace(np.array([1.0, 0.0]), 2.0))
    with pytest.raises(EmptyPolyhedron):
        enumerate_vertices(p)


def test_add_halfspace_on_box():
    p = add_halfspace(box(), Halfspace(np.array([1.0, 1.0]), 1.0))
    assert not p.vrep_valid
    assert same_point_sets(enumerate_vertices(p)[0], [[1, 0], [0, 1], [1, 1]])


def test_implied_halfspace_keeps_vertices():
    p = add_halfspace(box(), Halfspace(np.array([1.0, 1.0]), -5.0))
    r = remove_redundant(p)
    assert r.normals.shape[0] == 4
    assert same_point_sets(enumerate_vertices(r)[0], enumerate_vertices(box())[0])


def test_dominated_constraint_removed():
    p = Polyhedron([[1, 0], [1, 0], [0, 1]], [0, -1, 0])
    r = remove_redundant(p)
    assert r.normals.shape[0] == 2
    assert same_point_sets(np.column_stack([r.normals, r.offsets]), [[1, 0, 0], [0, 1, 0]])


def test_duplicate_face_merged():
    p = Polyhedron([[1, 0], [0, 1], [-1, 0], [0, -1], [-1, 0]], [0, 0, -1, -1, -1])
    assert remove_redundant(p).normals.shape[0] == 4


def test_near_duplicates_keep_tighter():
    p = Polyhedron([[1, 0], [0, 1], [-1, 0], [0, -1], [-1, 0]], [0, 0, -1, -1, -1 + 5e-8])
    r = remove_redundant(p)
    assert r.normals.shape[0] == 4
    assert np.min(enumerate_vertices(r)[0][:, 0].max()) <= 1 - 5e-8 + 1e-12


def test_near_parallel_far_vertex_not_lost():
    # normals 1e-7 rad apart meet far from the origin; merging would move that vertex
    a = 1e-7
    p = Polyhedron([[1, 0], [np.cos(a), np.sin(a)], [0, 1]], [0, 0, -1e6])
    before = enumerate_vertices(p)[0]
    after = enumerate_vertices(remove_redundant(p))[0]
    assert (p.normals @ after.T - p.offsets[:, None]).min() >= -1e-7
    assert same_point_sets(before, after, tol=1e-6 * np.abs(before).max())


def _lp_redundant(normals, offsets, k):
    """Halfspace ``k`` is implied iff min over the others of ``n_k . z`` is >= its offset."""
    others = [i for i in range(len(offsets)) if i != k]
    res = linprog(normals[k], A_ub=-normals[others], b_ub=-offsets[others], bounds=[(None, None)] * normals.shape[1])
    return res.status == 0 and res.fun >= offsets[k] - 1e-9


def test_disc_supporting_plus_loose():
    rng = np.random.default_rng(3)
    ang = rng.uniform(0, 2 * np.pi, 20)
    normals = np.column_stack([np.cos(ang), np.sin(ang)])
    # z . n >= -1 supports the unit disc
    offsets = -np.ones(20)
    loose_ang = rng.uniform(0, 2 * np.pi, 5)
    loose = np.column_stack([np.cos(loose_ang), np.sin(loose_ang)])
    N = np.vstack([normals, loose])
    g = np.concatenate([offsets, -rng.uniform(1.5, 3.0, 5)])
    oracle = [k for k in range(25) if not _lp_redundant(N, g, k)]
    r = remove_redundant(Polyhedron(N, g))
    assert r.normals.shape[0] == len(oracle)
    assert same_point_sets(np.column_stack([r.normals, r.offsets]), np.column_stack([N[oracle], g[oracle]]))
    assert all(k < 20 for k in oracle)


def test_distance_examples():
    d, proj = distance_point_to_polyhedron([0, 0], upper_set([1, 1]))
    assert d == pytest.approx(SQRT2, abs=1e-6)
    assert np.allclose(proj, [1, 1], atol=1e-6)
    assert distance_point_to_polyhedron([2, 3], upper_set([1, 1]))[0] == 0.0
    # (0, 3) = (0, 1) + (0, 2) lies in conv{(1,0),(0,1)} + R^2_+
    p = Polyhedron([[1, 1], [1, 0], [0, 1]], [1, 0, 0])
    assert distance_point_to_polyhedron([0, 3], p)[0] == 0.0
    # a point below the segment projects onto it
    d, proj = distance_point_to_polyhedron([0, 0], p)
    assert d == pytest.approx(SQRT2 / 2, abs=1e-6)
    assert np.allclose(proj, [0.5, 0.5], atol=1e-6)


def test_distance_generators_only():
    p = Polyhedron.from_generators([[1, 0], [0, 1]], [[1, 0], [0, 1]])
    d, _ = distance_point_to_polyhedron([-1, 3], p)
    assert d == pytest.approx(1.0, abs=1e-6)


def test_hausdorff_examples():
    assert hausdorff_nested(upper_set([0, 0]), upper_set([1, 1])) == pytest.approx(SQRT2, abs=1e-6)
    assert hausdorff_nested(upper_set([1, 1]), upper_set([1, 1])) == 0.0
    outer = Polyhedron([[1, 1], [1, 0], [0, 1]], [2, 0, 0])
    assert hausdorff_nested(outer, upper_set([2, 2])) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(NotNested):
        hausdorff_nested(upper_set([1, 1]), upper_set([0, 0]))


def test_dump_format(tmp_path):
    p = box()
    enumerate_vertices(p)
    p.dump(tmp_path / "p.json")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert set(doc) == {"halfspaces", "vertices", "rays"}
    assert len(doc["halfspaces"]) == 4 and len(doc["vertices"]) == 4


def random_bounded(rng, q, m):
    """Random H-rep inside the box [-1, 1]^q plus ``m`` random cuts through the box."""
    eye = np.eye(q)
    normals = [eye, -eye]
    offsets = [-np.ones(q), -np.ones(q)]
    dirs = rng.normal(size=(m, q))
    normals.append(dirs)
    offsets.append(rng.uniform(-0.8, 0.2, m) * np.linalg.norm(dirs, axis=1))
    return np.vstack(normals), np.concatenate(offsets)


@given(st.integers(2, 3), st.integers(0, 6), st.integers(0, 2**31 - 1))
def test_enumeration_matches_brute_force(q, m, seed):
    N, g = random_bounded(np.random.default_rng(seed), q, m)
    p = Polyhedron(N, g)
    try:
        v, r = enumerate_vertices(p)
    except EmptyPolyhedron:
        assert brute_force_vertices(p.normals, p.offsets).shape[0] == 0
        return
    assert r.shape[0] == 0
    assert same_point_sets(v, brute_force_vertices(p.normals, p.offsets))


@given(st.integers(2, 3), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_add_halfspace_is_monotone_and_incremental(q, m, seed):
    rng = np.random.default_rng(seed)
    N, g = random_bounded(rng, q, m)
    p = Polyhedron(N[:-1], g[:-1])
    try:
        enumerate_vertices(p)
        v_inc = enumerate_vertices(add_halfspace(p, Halfspace(N[-1], g[-1])))[0]
    except EmptyPolyhedron:
        return
    full = Polyhedron(N, g)
    assert same_point_sets(v_inc, enumerate_vertices(full)[0])
    assert (p.normals @ v_inc.T - p.offsets[:, None]).min() >= -1e-7


@given(st.integers(2, 3), st.integers(0, 6), st.integers(0, 2**31 - 1))
def test_remove_redundant_preserves_set(q, m, seed):
    rng = np.random.default_rng(seed)
    N, g = random_bounded(rng, q, m)
    p = Polyhedron(N, g)
    try:
        v = enumerate_vertices(p)[0]
    except EmptyPolyhedron:
        return
    r = remove_redundant(p)
    assert same_point_sets(v, enumerate_vertices(r)[0])
    z = rng.uniform(-1.5, 1.5, size=(500, q))
    inside = lambda P: np.all(z @ P.normals.T >= P.offsets - 1e-9, axis=1)  # noqa: E731
    assert np.array_equal(inside(p), inside(r))
    # no remaining halfspace is implied by the others
    for k in range(r.normals.shape[0]):
        assert not _lp_redundant(r.normals, r.offsets, k)


@given(st.integers(0, 2**31 - 1))
def test_distance_zero_iff_inside(seed):
    rng = np.random.default_rng(seed)
    p = Polyhedron([[1, 1], [1, 0], [0, 1], [1, 3]], [1, 0, 0, 1.5])
    z = rng.uniform(-1, 2, 2)
    d, proj = distance_point_to_polyhedron(z, p)
    assert (d == 0.0) == (p.violation(z) <= 1e-7)
    assert p.violation(proj) <= 1e-6
