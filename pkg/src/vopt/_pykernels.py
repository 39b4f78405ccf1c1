"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
here with identical semantics and is preferred when it has been compiled.
"""
from __future__ import annotations

import numpy as np


def adjacent_pairs(zero_words, plus, minus, min_common):
    """Combinatorial adjacency test of the double description method.

    ``zero_words`` holds one bitset row per ray (bit k set when the ray lies
    on constraint k).  A pair ``(p, n)`` is adjacent when the common zero set
    has at least ``min_common`` members and no third ray's zero set contains
    it.  Returns an ``(k, 2)`` intp array of ``(p, n)`` pairs in row-major
    order of ``plus`` then ``minus``.
    """
    zero_words = np.ascontiguousarray(zero_words, dtype=np.uint64)
    plus = np.asarray(plus, dtype=np.intp)
    minus = np.asarray(minus, dtype=np.intp)
    out = []
    if plus.size == 0 or minus.size == 0:
        return np.empty((0, 2), dtype=np.intp)
    zm = zero_words[minus]
    for p in plus:
        common = zero_words[p] & zm
        counts = np.bitwise_count(common).sum(axis=1)
        for k in np.flatnonzero(counts >= min_common):
            c = common[k]
            contained = np.all((zero_words & c) == c, axis=1)
            # p and n always contain their own intersection
            if np.count_nonzero(contained) == 2:
                out.append((p, minus[k]))
    if not out:
        return np.empty((0, 2), dtype=np.intp)
    return np.asarray(out, dtype=np.intp)


def dominated_mask(a, b):
    """``mask[i]`` is True when some row of ``b`` is >= ``a[i]`` componentwise
    and differs from it in at least one component."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    mask = np.zeros(a.shape[0], dtype=bool)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return mask
    chunk = max(1, 2_000_000 // max(1, b.size))
    for start in range(0, a.shape[0], chunk):
        blk = a[start:start + chunk, None, :]
        le = np.all(blk <= b[None], axis=2)
        lt = np.any(blk < b[None], axis=2)
        mask[start:start + chunk] = np.any(le & lt, axis=1)
    return mask


def widest_box(lower, upper):
    """Largest shortest edge over compatible pairs ``lower[i] <= upper[j]``.

    Ties are broken by the lexicographic order of ``(lower[i], upper[j])``.
    Returns ``(width, i, j)``; ``(-inf, -1, -1)`` if no pair is compatible.
    """
    lower = np.ascontiguousarray(lower, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    best, bi, bj = -np.inf, -1, -1
    if lower.shape[0] == 0 or upper.shape[0] == 0:
        return best, bi, bj
    chunk = max(1, 2_000_000 // max(1, upper.size))
    for start in range(0, lower.shape[0], chunk):
        diff = upper[None, :, :] - lower[start:start + chunk, None, :]
        width = diff.min(axis=2)
        width[width < 0] = -np.inf
        m = width.max()
        if m == -np.inf or m < best:
            continue
        for i, j in zip(*np.nonzero(width == m)):
            i += start
            if m > best or _lex_less(lower[i], upper[j], lower[bi], upper[bj]):
                best, bi, bj = m, int(i), int(j)
    return float(best), bi, bj


def _lex_less(l1, u1, l2, u2):
    k1 = np.concatenate([l1, u1])
    k2 = np.concatenate([l2, u2])
    for x, y in zip(k1, k2):
        if x != y:
            return x < y
    return False
