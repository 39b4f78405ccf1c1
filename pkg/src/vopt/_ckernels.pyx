# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same contracts."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t
from libc.math cimport INFINITY

cnp.import_array()


cdef inline int _popcount(uint64_t x) nogil:
    return __builtin_popcountll(x)

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def adjacent_pairs(zero_words, plus, minus, int min_common):
    cdef const uint64_t[:, ::1] z = np.ascontiguousarray(zero_words, dtype=np.uint64)
    cdef const Py_ssize_t[::1] pl = np.ascontiguousarray(plus, dtype=np.intp)
    cdef const Py_ssize_t[::1] mi = np.ascontiguousarray(minus, dtype=np.intp)
    cdef Py_ssize_t nrays = z.shape[0], nw = z.shape[1]
    cdef Py_ssize_t a, b, r, w, p, n, count, holders
    cdef uint64_t c
    cdef uint64_t[::1] common = np.empty(max(nw, 1), dtype=np.uint64)
    out = []
    for a in range(pl.shape[0]):
        p = pl[a]
        for b in range(mi.shape[0]):
            n = mi[b]
            count = 0
            for w in range(nw):
                c = z[p, w] & z[n, w]
                common[w] = c
                count += _popcount(c)
            if count < min_common:
                continue
            holders = 0
            for r in range(nrays):
                if r == p or r == n:
                    continue
                for w in range(nw):
                    if (z[r, w] & common[w]) != common[w]:
                        break
                else:
                    holders = 1
                    break
            if holders == 0:
                out.append((p, n))
    if not out:
        return np.empty((0, 2), dtype=np.intp)
    return np.asarray(out, dtype=np.intp)


def dominated_mask(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=float)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=float)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], q = av.shape[1]
    cdef Py_ssize_t i, j, k
    cdef bint le, lt
    mask = np.zeros(na, dtype=bool)
    cdef cnp.npy_bool[::1] m = mask
    if na == 0 or nb == 0:
        return mask
    for i in range(na):
        for j in range(nb):
            le = True
            lt = False
            for k in range(q):
                if av[i, k] > bv[j, k]:
                    le = False
                    break
                if av[i, k] < bv[j, k]:
                    lt = True
            if le and lt:
                m[i] = True
                break
    return mask


cdef bint _lex_less(const double[:, ::1] lo, const double[:, ::1] up, Py_ssize_t i1,
                    Py_ssize_t j1, Py_ssize_t i2, Py_ssize_t j2):
    cdef Py_ssize_t k, q = lo.shape[1]
    for k in range(q):
        if lo[i1, k] != lo[i2, k]:
            return lo[i1, k] < lo[i2, k]
    for k in range(q):
        if up[j1, k] != up[j2, k]:
            return up[j1, k] < up[j2, k]
    return False


def widest_box(lower, upper):
    cdef const double[:, ::1] lo = np.ascontiguousarray(lower, dtype=float)
    cdef const double[:, ::1] up = np.ascontiguousarray(upper, dtype=float)
    cdef Py_ssize_t nl = lo.shape[0], nu = up.shape[0], q = lo.shape[1]
    cdef Py_ssize_t i, j, k, bi = -1, bj = -1
    cdef double best = -INFINITY, w, d
    for i in range(nl):
        for j in range(nu):
            w = INFINITY
            for k in range(q):
                d = up[j, k] - lo[i, k]
                if d < 0:
                    w = -INFINITY
                    break
                if d < w:
                    w = d
            if w == -INFINITY:
                continue
            if w > best or (w == best and _lex_less(lo, up, i, j, bi, bj)):
                best = w
                bi = i
                bj = j
    return float(best), bi, bj
