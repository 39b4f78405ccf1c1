"""Polyhedral ordering cones ``C = {z : W z >= 0} = cone(d^1, ..., d^r)``.

Both representations are stored, irredundant and with unit-norm rows.  The
H-representation is canonical for order comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polytope import TAU_CMP, cone_extreme_rays


class ConeError(ValueError):
    pass


class NotPointed(ConeError):
    pass


class NotSolid(ConeError):
    pass


class Trivial(ConeError):
    pass


class Degenerate(ConeError):
    pass


class DimensionMismatch(ValueError):
    pass


def _sorted_rows(a):
    """Rows in descending lexicographic order, so the orthant gives e_1, e_2, ..."""
    order = np.lexsort((-a).T[::-1])
    return a[order]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class OrderingCone:
    dim: int
    halfspace_normals: np.ndarray
    generator_rays: np.ndarray

    @property
    def dual_rays(self):
        """Extreme rays of the dual cone; they coincide with the facet normals."""
        return self.halfspace_normals

    @property
    def interior_direction(self):
        """Unit vector ``sum(d^j) / ||sum(d^j)||``, interior by solidity."""
        s = self.generator_rays.sum(axis=0)
        return s / np.linalg.norm(s)

    def contains(self, z, tol=TAU_CMP):
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.halfspace_normals @ z >= -tol))

    def in_dual(self, w, tol=TAU_CMP):
        w = np.asarray(w, dtype=float)
        return bool(np.all(self.generator_rays @ w >= -tol))

    def is_natural(self, tol=1e-12):
        return (
            self.halfspace_normals.shape[0] == self.dim
            and np.allclose(self.halfspace_normals, np.eye(self.dim), atol=tol)
        )

    def to_dict(self):
        return {"rays": self.generator_rays.tolist()}

    def __repr__(self):
        return f"OrderingCone(dim={self.dim}, rays={self.generator_rays.tolist()})"


def _check_rows(mat, what):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise Degenerate(f"need at least one {what}")
    if mat.shape[1] < 2:
        raise DimensionMismatch("ordering cones need dimension q >= 2")
    if not np.all(np.isfinite(mat)):
        raise Degenerate(f"{what} must be finite")
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise Degenerate(f"zero {what} given")
    return mat / norms[:, None]


def _build(rays, normals):
    q = rays.shape[1]
    return OrderingCone(q, _frozen(_sorted_rows(normals)), _frozen(_sorted_rows(rays)))


def cone_from_rays(rays):
    """Cone generated by the rows of ``rays``; redundant rays are dropped."""
    rays = _check_rows(rays, "ray")
    q = rays.shape[1]
    k = np.linalg.matrix_rank(rays, tol=1e-10)
    # dual cone restricted to the row space, where it is pointed
    basis = np.linalg.svd(rays)[2][:k]
    y = cone_extreme_rays(rays @ basis.T) if k else np.zeros((0, 0))
    if y.shape[0] == 0:
        if k == q:
            raise Trivial("the rays generate the whole space")
        raise NotPointed("the rays generate a cone containing a line")
    if np.linalg.matrix_rank(y, tol=1e-10) < k:
        raise NotPointed("the rays generate a cone containing a line")
    if k < q:
        raise NotSolid("the rays do not span the objective space")
    normals = cone_extreme_rays(rays)
    extreme = cone_extreme_rays(normals)
    return _build(extreme, normals)


def cone_from_halfspaces(normals):
    """Cone ``{z : normals @ z >= 0}``."""
    normals = _check_rows(normals, "normal")
    q = normals.shape[1]
    if np.linalg.matrix_rank(normals, tol=1e-10) < q:
        raise NotPointed("halfspace normals do not have full rank")
    rays = cone_extreme_rays(normals)
    if rays.shape[0] == 0:
        raise Trivial("the halfspaces only admit the origin")
    if np.linalg.matrix_rank(rays, tol=1e-10) < q:
        raise NotSolid("the cone has empty interior")
    return _build(rays, cone_extreme_rays(rays))


def natural_cone(q):
    """The non-negative orthant of dimension ``q``."""
    eye = np.eye(q)
    return OrderingCone(q, _frozen(eye), _frozen(eye))


def dual_cone(c):
    return OrderingCone(c.dim, c.generator_rays, c.halfspace_normals)


def cone_leq(c, z1, z2, tol=TAU_CMP):
    """``z1 <=_C z2``, i.e. ``W (z2 - z1) >= -tol`` componentwise."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if z1.shape != (c.dim,) or z2.shape != (c.dim,):
        raise DimensionMismatch(f"expected vectors of length {c.dim}")
    return bool(np.all(c.halfspace_normals @ (z2 - z1) >= -tol))
