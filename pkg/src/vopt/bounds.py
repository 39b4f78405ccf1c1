"""Local lower and upper bound sets for the componentwise order.

``U`` holds local upper bounds: the search region of a stable set ``N``
inside the zone ``[low, high]`` is the union of the open shadows
``{y : y < u}``.  ``L`` mirrors this with reversed order.  An update replaces
every bound strictly beyond the new point by its ``q`` projections and drops
projections whose shadow is contained in another bound's shadow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels


class BoundsError(ValueError):
    pass


class DegenerateBox(BoundsError):
    pass


class OutOfZone(BoundsError):
    pass


class NoCompatiblePair(BoundsError):
    pass


def _frozen(a, q):
    a = np.array(a, dtype=float).reshape(-1, q)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EnclosureState:
    low: np.ndarray
    high: np.ndarray
    N: np.ndarray
    L: np.ndarray
    U: np.ndarray

    @property
    def q(self):
        return self.low.size

    def to_dict(self):
        return {
            "zone": {"low": self.low.tolist(), "high": self.high.tolist()},
            "N": self.N.tolist(),
            "L": self.L.tolist(),
            "U": self.U.tolist(),
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def init_enclosure(l0, u0):
    l0 = np.asarray(l0, dtype=float).ravel()
    u0 = np.asarray(u0, dtype=float).ravel()
    if l0.shape != u0.shape or l0.size < 2:
        raise DegenerateBox("l0 and u0 must be vectors of the same length q >= 2")
    if not np.all(np.isfinite(l0)) or not np.all(np.isfinite(u0)) or np.any(l0 >= u0):
        raise DegenerateBox(f"need l0 < u0 componentwise, got {l0.tolist()} and {u0.tolist()}")
    q = l0.size
    low, high = _frozen(l0, q)[0], _frozen(u0, q)[0]
    return EnclosureState(low, high, _frozen([], q), _frozen([l0], q), _frozen([u0], q))


def _dedup_rows(a):
    if a.shape[0] < 2:
        return a
    _, idx = np.unique(a, axis=0, return_index=True)
    return a[np.sort(idx)]


def update_upper(U, z):
    """Split every ``u > z`` into its projections and filter the result."""
    z = np.asarray(z, dtype=float)
    hit = np.all(z < U, axis=1)
    if not hit.any():
        return U
    q = z.size
    parents = U[hit]
    cand = np.repeat(parents, q, axis=0)
    cols = np.tile(np.arange(q), parents.shape[0])
    cand[np.arange(cand.shape[0]), cols] = z[cols]
    keep = U[~hit]
    cand = _dedup_rows(cand)
    cand = cand[~_kernels.dominated_mask(cand, np.vstack([keep, cand]))]
    return np.vstack([keep, cand])


def update_lower(L, z):
    return -update_upper(-L, -np.asarray(z, dtype=float))


def _check_zone(e, z):
    z = np.asarray(z, dtype=float).ravel()
    if z.shape != (e.q,):
        raise OutOfZone(f"point has length {z.size}, expected {e.q}")
    if not (np.all(z > e.low) and np.all(z < e.high)):
        raise OutOfZone(f"point {z.tolist()} is not strictly inside the zone")
    return z


def _stable_insert(N, z):
    """``N`` with ``z`` added, or ``None`` when ``z`` is weakly dominated by ``N``."""
    if N.shape[0] and np.any(np.all(N <= z, axis=1)):
        return None
    dominated = np.all(z <= N, axis=1)
    return np.vstack([N[~dominated], z])


def insert_upper(e, z):
    """Add an image point: updates ``N`` and ``U``."""
    z = _check_zone(e, z)
    N = _stable_insert(e.N, z)
    if N is None:
        return e
    return EnclosureState(e.low, e.high, _frozen(N, e.q), e.L, _frozen(update_upper(e.U, z), e.q))


def insert_lower(e, z):
    """Add a lower point: updates ``L`` only."""
    z = _check_zone(e, z)
    return EnclosureState(e.low, e.high, e.N, _frozen(update_lower(e.L, z), e.q), e.U)


def insert_point(e, z):
    """Add ``z`` to ``N`` and update both bound sets.

    A point weakly dominated by ``N`` leaves the state unchanged.
    """
    z = _check_zone(e, z)
    N = _stable_insert(e.N, z)
    if N is None:
        return e
    if N.shape[0] == e.N.shape[0] + 1:
        L = update_lower(e.L, z)
    else:
        # dropped points still shape L: rebuild it from the surviving set
        L = e.low[None, :]
        for n in N:
            L = update_lower(L, n)
    return EnclosureState(e.low, e.high, _frozen(N, e.q), _frozen(L, e.q), _frozen(update_upper(e.U, z), e.q))


def enclosure_width(e):
    """Largest shortest edge over boxes ``[l, u]`` with ``l <= u``; ``-inf`` if none."""
    return _kernels.widest_box(e.L, e.U)[0]


def widest_pair(e):
    """The ``(l, u)`` attaining the width; ties go to the lexicographically smaller pair."""
    width, i, j = _kernels.widest_box(e.L, e.U)
    if i < 0:
        raise NoCompatiblePair("no lower bound lies below an upper bound")
    return e.L[i].copy(), e.U[j].copy()
