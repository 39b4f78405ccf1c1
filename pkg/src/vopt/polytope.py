"""Polyhedral computations in floating point.

A :class:`Polyhedron` is stored in H-representation ``{z : W z >= gamma}``
with unit-norm rows.  The V-representation (vertices and extreme rays) is
computed on demand with the double description method applied to the
homogenized cone ``{(z, s) : W z - gamma s >= 0, s >= 0}``.

Polyhedra obtained from :func:`add_halfspace` remember their parent's double
description state, so enumerating a refined outer approximation costs a
single incremental step instead of a full conversion.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels

TAU_CMP = 1e-9
TAU_FEAS = 1e-7
THETA_DUP = 1e-6
TAU_DUP = 1e-7


class PolytopeError(Exception):
    pass


class EmptyPolyhedron(PolytopeError):
    pass


class NumericalFailure(PolytopeError):
    pass


class NotNested(PolytopeError):
    pass


@dataclass(frozen=True)
class Halfspace:
    """The closed halfspace ``{z : normal . z >= offset}``.

    The normal is rescaled to unit length on construction (the offset with it).
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).ravel()
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("halfspace normal must be finite and nonzero")
        if not np.isfinite(self.offset):
            raise ValueError("halfspace offset must be finite")
        n = n / norm
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def contains(self, z, tol=TAU_FEAS):
        return float(self.normal @ np.asarray(z, dtype=float)) >= self.offset - tol


# ---------------------------------------------------------------------------
# double description core


def _nwords(nrows):
    return max(1, (nrows + 63) // 64)


def _set_bit(words, rows, k):
    words[rows, k // 64] |= np.uint64(1) << np.uint64(k % 64)


def _bit_column(words, k):
    return ((words[:, k // 64] >> np.uint64(k % 64)) & np.uint64(1)).astype(bool)


class _DDState:
    """Extreme rays of ``{y : A y >= 0}`` with their zero sets as bitsets."""

    __slots__ = ("rows", "rays", "zeros")

    def __init__(self, rows, rays, zeros):
        self.rows = rows
        self.rays = rays
        self.zeros = zeros

    @classmethod
    def initial(cls, rows, tol=TAU_CMP):
        """Simplicial start from a maximal independent subset of rows,
        followed by insertion of the remaining rows in order."""
        m, d = rows.shape
        basis = []
        for k in range(m):
            trial = rows[basis + [k]]
            if np.linalg.matrix_rank(trial, tol=1e-10) == len(basis) + 1:
                basis.append(k)
                if len(basis) == d:
                    break
        if len(basis) < d:
            raise NumericalFailure("constraint matrix is rank deficient: the cone is not pointed")
        inv = np.linalg.inv(rows[basis])
        rays = inv.T.copy()
        rays /= np.linalg.norm(rays, axis=1, keepdims=True)
        zeros = np.zeros((d, _nwords(m)), dtype=np.uint64)
        for j in range(d):
            for i, k in enumerate(basis):
                if i != j:
                    _set_bit(zeros, j, k)
        state = cls(rows[: 0], rays, zeros)
        state.rows = rows.copy()
        in_basis = set(basis)
        for k in range(m):
            if k not in in_basis:
                state._insert(k, tol)
        return state

    def copy(self):
        return _DDState(self.rows.copy(), self.rays.copy(), self.zeros.copy())

    def add_row(self, row, tol=TAU_CMP):
        k = self.rows.shape[0]
        self.rows = np.vstack([self.rows, row[None, :]])
        if _nwords(k + 1) > self.zeros.shape[1]:
            self.zeros = np.hstack([self.zeros, np.zeros((self.zeros.shape[0], 1), dtype=np.uint64)])
        self._insert(k, tol)

    def _insert(self, k, tol):
        row = self.rows[k]
        d = self.rows.shape[1]
        vals = self.rays @ row
        plus = np.flatnonzero(vals > tol)
        minus = np.flatnonzero(vals < -tol)
        zero = np.flatnonzero(np.abs(vals) <= tol)
        if minus.size == 0:
            _set_bit(self.zeros, zero, k)
            return
        pairs = _kernels.adjacent_pairs(self.zeros, plus, minus, d - 2)
        keep = np.concatenate([plus, zero])
        new_rays = self.rays[keep]
        new_zeros = self.zeros[keep]
        nz = zero.size
        if nz:
            _set_bit(new_zeros, np.arange(plus.size, plus.size + nz), k)
        if len(pairs):
            p, n = pairs[:, 0], pairs[:, 1]
            comb = vals[p, None] * self.rays[n] - vals[n, None] * self.rays[p]
            comb /= np.linalg.norm(comb, axis=1, keepdims=True)
            cz = self.zeros[p] & self.zeros[n]
            _set_bit(cz, np.arange(len(pairs)), k)
            new_rays = np.vstack([new_rays, comb])
            new_zeros = np.vstack([new_zeros, cz])
        self.rays = new_rays
        self.zeros = new_zeros

    def restrict_rows(self, keep):
        """Drop rows not in ``keep`` (sorted indices), remapping zero sets."""
        keep = np.asarray(keep, dtype=np.intp)
        words = np.zeros((self.rays.shape[0], _nwords(keep.size)), dtype=np.uint64)
        for new, old in enumerate(keep):
            col = np.flatnonzero(_bit_column(self.zeros, old))
            if col.size:
                _set_bit(words, col, new)
        return _DDState(self.rows[keep].copy(), self.rays.copy(), words)


def cone_extreme_rays(rows, tol=TAU_CMP):
    """Extreme rays (unit norm) of the pointed cone ``{y : rows @ y >= 0}``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    state = _DDState.initial(rows, tol)
    return _dedup(state.rays, 1e-8)


def _dedup(points, tol):
    if points.shape[0] <= 1:
        return points
    kept = []
    for p in points:
        if not any(np.max(np.abs(p - k)) <= tol for k in kept):
            kept.append(p)
    return np.asarray(kept)


def _lexsorted(a):
    if a.shape[0] <= 1:
        return a
    order = np.lexsort(a.T[::-1])
    return a[order]


# ---------------------------------------------------------------------------
# Polyhedron


class Polyhedron:
    """Convex polyhedron ``{z : normals @ z >= offsets}`` with lazy V-rep.

    Instances are treated as immutable: every operation returns a new
    polyhedron.  A polyhedron built with :meth:`from_generators` has only a
    V-representation (``halfspaces`` is ``None``); it supports distance
    queries but not enumeration.
    """

    def __init__(self, normals, offsets, *, _parent=None):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).ravel()
        if normals.shape[0] != offsets.shape[0]:
            raise ValueError("normals and offsets disagree in length")
        if normals.shape[0] == 0:
            raise ValueError("H-representation must contain at least one halfspace")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(normals)) or not np.all(np.isfinite(offsets)):
            raise ValueError("halfspace data must be finite with nonzero normals")
        self.normals = normals / norms[:, None]
        self.offsets = offsets / norms
        self.normals.flags.writeable = False
        self.offsets.flags.writeable = False
        self.dim = self.normals.shape[1]
        self._vertices = None
        self._rays = None
        self._dd = None
        self._parent = _parent

    @classmethod
    def from_halfspaces(cls, halfspaces):
        halfspaces = list(halfspaces)
        return cls(np.array([h.normal for h in halfspaces]), np.array([h.offset for h in halfspaces]))

    @classmethod
    def from_generators(cls, vertices, rays=None):
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        q = vertices.shape[1]
        rays = np.zeros((0, q)) if rays is None else np.asarray(rays, dtype=float).reshape(-1, q)
        obj = cls.__new__(cls)
        obj.normals = None
        obj.offsets = None
        obj.dim = q
        obj._vertices = vertices.copy()
        obj._rays = rays.copy()
        obj._dd = None
        obj._parent = None
        return obj

    @property
    def halfspaces(self):
        if self.normals is None:
            return None
        return [Halfspace(n, g) for n, g in zip(self.normals, self.offsets)]

    @property
    def has_hrep(self):
        return self.normals is not None

    @property
    def vrep_valid(self):
        return self._vertices is not None

    @property
    def vertices(self):
        return enumerate_vertices(self)[0]

    @property
    def rays(self):
        return enumerate_vertices(self)[1]

    def contains(self, z, tol=TAU_FEAS):
        if not self.has_hrep:
            raise ValueError("membership requires an H-representation")
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.normals @ z >= self.offsets - tol))

    def violation(self, z):
        """Largest amount by which ``z`` violates a halfspace (<= 0 inside)."""
        return float(np.max(self.offsets - self.normals @ np.asarray(z, dtype=float)))

    def _homogeneous_rows(self):
        rows = np.hstack([self.normals, -self.offsets[:, None]])
        rows = np.vstack([np.eye(self.dim + 1)[-1], rows])
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)

    def to_dict(self):
        out = {}
        if self.has_hrep:
            out["halfspaces"] = [
                {"normal": n.tolist(), "offset": float(g)} for n, g in zip(self.normals, self.offsets)
            ]
        if self.vrep_valid:
            out["vertices"] = self._vertices.tolist()
            out["rays"] = self._rays.tolist()
        return out

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def __repr__(self):
        m = None if self.normals is None else self.normals.shape[0]
        return f"Polyhedron(dim={self.dim}, halfspaces={m}, vrep_valid={self.vrep_valid})"


def _dd_state(p):
    if p._dd is not None:
        return p._dd
    rows = p._homogeneous_rows()
    parent = p._parent
    if (
        parent is not None
        and parent._dd is not None
        and parent._dd.rows.shape[0] == rows.shape[0] - 1
        and np.allclose(parent._dd.rows, rows[:-1], rtol=0.0, atol=1e-13)
    ):
        state = parent._dd.copy()
        state.add_row(rows[-1])
    else:
        state = _DDState.initial(rows)
    p._dd = state
    p._parent = None
    return state


def enumerate_vertices(p):
    """Return ``(vertices, rays)`` of ``p`` as lexicographically sorted arrays.

    Raises :class:`EmptyPolyhedron` when ``p`` has no points.
    """
    if p._vertices is not None:
        return p._vertices, p._rays
    state = _dd_state(p)
    gens = state.rays
    s = gens[:, -1]
    is_vertex = s > TAU_CMP
    if not np.any(is_vertex):
        raise EmptyPolyhedron("polyhedron has no points")
    verts = gens[is_vertex, :-1] / s[is_vertex, None]
    rays = gens[~is_vertex, :-1]
    if rays.size:
        norms = np.linalg.norm(rays, axis=1)
        rays = rays[norms > TAU_CMP] / norms[norms > TAU_CMP, None]
    scale = max(1.0, float(np.max(np.abs(verts))))
    verts = _lexsorted(_dedup(verts, 1e-9 * scale))
    rays = _lexsorted(_dedup(rays.reshape(-1, p.dim), 1e-9))
    verts.flags.writeable = False
    rays.flags.writeable = False
    p._vertices, p._rays = verts, rays
    return verts, rays


def add_halfspace(p, h):
    """Intersection of ``p`` with ``h``; the V-rep is not computed."""
    normals = np.vstack([p.normals, h.normal[None, :]])
    offsets = np.append(p.offsets, h.offset)
    return Polyhedron(normals, offsets, _parent=p)


def _merge_near_duplicates(p):
    n, g = p.normals, p.offsets
    m = n.shape[0]
    alive = np.ones(m, dtype=bool)
    cos_dup = np.cos(THETA_DUP)
    for i in range(m):
        if not alive[i]:
            continue
        for j in range(i + 1, m):
            if not alive[j]:
                continue
            if n[i] @ n[j] >= cos_dup and abs(g[i] - g[j]) < TAU_DUP:
                # keep the tighter constraint
                if g[j] > g[i]:
                    alive[i] = False
                    break
                alive[j] = False
    return alive


def remove_redundant(p):
    """Same point set, with near-duplicates merged and implied halfspaces dropped.

    A halfspace is kept iff it is a facet: the generators lying on it span a
    space of dimension ``dim`` in homogeneous coordinates.
    """
    alive = _merge_near_duplicates(p)
    base = p
    while not np.all(alive):
        # keep the incremental path when only the newest row was discarded
        if p._parent is not None and not alive[-1] and np.all(alive[:-1]):
            base = p._parent
        else:
            base = Polyhedron(p.normals[alive], p.offsets[alive])
        verts, _ = enumerate_vertices(base)
        # nearly parallel rows diverge far from the origin: undo merges that
        # would readmit points beyond the dropped row
        dropped = np.flatnonzero(~alive)
        gap = p.offsets[dropped, None] - p.normals[dropped] @ verts.T
        restore = dropped[gap.max(axis=1) > TAU_FEAS]
        if restore.size == 0:
            break
        alive[restore] = True
        base = p
    enumerate_vertices(base)
    state = base._dd
    rows = state.rows
    facets = []
    for k in range(1, rows.shape[0]):
        on = _bit_column(state.zeros, k)
        if np.count_nonzero(on) < base.dim:
            continue
        if np.linalg.matrix_rank(state.rays[on], tol=1e-8) >= base.dim:
            facets.append(k - 1)
    facets = np.asarray(facets, dtype=np.intp)
    if facets.size == base.normals.shape[0]:
        return base
    out = Polyhedron(base.normals[facets], base.offsets[facets])
    out._dd = state.restrict_rows(np.concatenate([[0], facets + 1]))
    out._vertices, out._rays = base._vertices, base._rays
    return out


# ---------------------------------------------------------------------------
# distances


def distance_point_to_polyhedron(z, p, backend=None):
    """Euclidean distance from ``z`` to ``p`` and the nearest point.

    Points inside the H-representation (within ``TAU_FEAS``) are at distance 0.
    Otherwise the projection is solved as a second-order-cone problem over the
    V-representation ``conv(V) + cone(R)`` through the scalar backend.
    """
    from .scalar_backend import SolveStatus, reference_backend
    from .scalarize import build_projection

    z = np.asarray(z, dtype=float)
    if p.has_hrep and p.violation(z) <= TAU_FEAS:
        return 0.0, z.copy()
    verts, rays = enumerate_vertices(p)
    backend = backend or reference_backend()
    sp, recover = build_projection(z, verts, rays)
    sol = backend.solve(sp)
    if sol.status is not SolveStatus.OPTIMAL:
        raise NumericalFailure(f"projection subproblem ended with status {sol.status.value}")
    proj = recover(sol.x)
    return float(np.linalg.norm(z - proj)), proj


def hausdorff_nested(outer, inner, backend=None):
    """Hausdorff distance between upper sets with ``inner`` contained in ``outer``.

    The supremum over ``outer`` of the distance to ``inner`` is attained at a
    vertex of ``outer``; the reverse supremum is zero.
    """
    verts = enumerate_vertices(outer)[0]
    inner_verts = enumerate_vertices(inner)[0]
    for v in inner_verts:
        if outer.violation(v) > TAU_FEAS:
            raise NotNested("inner approximation leaves the outer one")
    return max(distance_point_to_polyhedron(v, inner, backend)[0] for v in verts)
