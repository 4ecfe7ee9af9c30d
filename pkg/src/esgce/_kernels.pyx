# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kNN kernels for the supremum-norm CMI estimator.

Every function here has a numpy twin in ``_kernels_py`` with an identical
signature; ``esgce.kernels`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp

from libc.math cimport fabs, INFINITY

cnp.import_array()


cdef inline double _fmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef inline void _push_smallest(double* best, int k, double value) noexcept nogil:
    # best[0..k-1] kept ascending; caller guarantees value < best[k-1]
    cdef int pos = k - 1
    while pos > 0 and best[pos - 1] > value:
        best[pos] = best[pos - 1]
        pos -= 1
    best[pos] = value


def sup_distances(const double[:, ::1] x):
    """Pairwise supremum-norm distances between the rows of ``x``."""
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double dist, diff
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dist = 0.0
                for c in range(m):
                    diff = fabs(x[i, c] - x[j, c])
                    if diff > dist:
                        dist = diff
                out[i, j] = dist
                out[j, i] = dist
    return out_arr


cdef inline double _rowdist(const double[:, ::1] a, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t c
    cdef double dist = 0.0, diff
    for c in range(a.shape[1]):
        diff = fabs(a[i, c] - a[j, c])
        if diff > dist:
            dist = diff
    return dist


def ksg_from_points(const double[:, ::1] x, const double[:, ::1] y,
                    const double[:, ::1] z, int k, const double[::1] psi):
    """CMI estimate computed directly from sample blocks, O(n) memory.

    ``psi[m]`` must hold digamma(m) for m in 0..n. ``z`` may have zero columns.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, dj, eps, total = 0.0
    cdef long n_xz, n_yz, n_z
    buf = np.empty(3 * n + k, dtype=np.float64)
    cdef double[::1] b = buf
    cdef double* rx = &b[0]
    cdef double* ry = &b[n]
    cdef double* rz = &b[2 * n]
    cdef double* best = &b[3 * n]
    with nogil:
        for i in range(n):
            for j in range(k):
                best[j] = INFINITY
            for j in range(n):
                dx = _rowdist(x, i, j)
                dy = _rowdist(y, i, j)
                dz = _rowdist(z, i, j)
                rx[j] = dx
                ry[j] = dy
                rz[j] = dz
                if j == i:
                    continue
                dj = _fmax(_fmax(dx, dy), dz)
                if dj < best[k - 1]:
                    _push_smallest(best, k, dj)
            eps = best[k - 1]
            n_xz = 0
            n_yz = 0
            n_z = 0
            for j in range(n):
                if rz[j] < eps:
                    n_z += 1
                    if rx[j] < eps:
                        n_xz += 1
                    if ry[j] < eps:
                        n_yz += 1
            total += psi[n_z] - psi[n_xz] - psi[n_yz]
    return psi[k] + total / n


def ksg_from_distances(const double[:, ::1] d_cause, const double[:, ::1] d_effect_cond,
                       d_cond, const int[::1] perm, int k, const double[::1] psi):
    """CMI estimate from precomputed distance matrices.

    ``d_effect_cond`` is the elementwise max of the effect and conditioning
    distances; ``d_cond`` is the conditioning distance matrix or ``None`` for
    an empty conditioning set. Cause rows are read through ``perm``.
    """
    cdef Py_ssize_t n = d_cause.shape[0]
    cdef Py_ssize_t i, j, pi
    cdef double dj, dc, eps, total = 0.0
    cdef long n_cz, n_ez, n_z
    cdef bint has_cond = d_cond is not None
    cdef const double[:, ::1] dz
    if has_cond:
        dz = d_cond
    else:
        dz = d_effect_cond
    buf = np.empty(n + k, dtype=np.float64)
    cdef double[::1] b = buf
    cdef double* rowc = &b[0]
    cdef double* best = &b[n]
    cdef const double* rowez
    cdef const double* rowz
    with nogil:
        for i in range(n):
            pi = perm[i]
            rowez = &d_effect_cond[i, 0]
            for j in range(n):
                rowc[j] = d_cause[pi, perm[j]]
            for j in range(k):
                best[j] = INFINITY
            for j in range(n):
                dj = _fmax(rowc[j], rowez[j])
                if dj < best[k - 1] and j != i:
                    _push_smallest(best, k, dj)
            eps = best[k - 1]
            n_cz = 0
            n_ez = 0
            if has_cond:
                rowz = &dz[i, 0]
                n_z = 0
                for j in range(n):
                    if rowez[j] < eps:
                        n_ez += 1
                    if rowz[j] < eps:
                        n_z += 1
                        if rowc[j] < eps:
                            n_cz += 1
            else:
                n_z = n
                for j in range(n):
                    if rowez[j] < eps:
                        n_ez += 1
                    if rowc[j] < eps:
                        n_cz += 1
            total += psi[n_z] - psi[n_cz] - psi[n_ez]
    return psi[k] + total / n


def restricted_permutation(const int[:, ::1] neighbors, const int[::1] order):
    """Draw a permutation that maps each row to one of its (shuffled) neighbors.

    Rows are visited in ``order``; each takes its first neighbor not yet used,
    falling back to its last candidate when all are taken.
    """
    cdef Py_ssize_t n = neighbors.shape[0], m = neighbors.shape[1]
    cdef Py_ssize_t i, idx, c
    cdef int use
    perm_arr = np.empty(n, dtype=np.intc)
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef int[::1] perm = perm_arr
    cdef unsigned char[::1] used = used_arr
    with nogil:
        for i in range(n):
            idx = order[i]
            c = 0
            use = neighbors[idx, 0]
            while used[use] and c < m - 1:
                c += 1
                use = neighbors[idx, c]
            perm[idx] = use
            used[use] = 1
    return perm_arr


cdef inline Py_ssize_t _count_below(const double* row, Py_ssize_t n, double eps) noexcept nogil:
    # number of entries < eps in an ascending row
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if row[mid] < eps:
            lo = mid + 1
        else:
            hi = mid
    return lo


def ksg_sorted(const double[:, ::1] d_cause, const double[:, ::1] cause_vals,
               const int[:, ::1] cause_idx, const double[:, ::1] d_effect_cond,
               const double[:, ::1] ez_vals, const int[:, ::1] ez_idx,
               d_cond, z_vals, z_idx, const int[::1] perm, bint walk_cause,
               int k, const double[::1] psi):
    """Same estimate as ``ksg_from_distances`` using row-sorted distances.

    ``*_vals``/``*_idx`` hold each row of a distance matrix in ascending
    order with the matching column indices; the conditioning triple
    ``d_cond``/``z_vals``/``z_idx`` is ``None`` without conditioning.
    The neighbour search walks either the cause rows (through the inverse
    of ``perm``, which need not be a bijection) or the effect-and-conditioning
    rows, and stops as soon as no later point can enter the k nearest.
    """
    cdef Py_ssize_t n = d_cause.shape[0]
    cdef Py_ssize_t i, j, m, idx, pi, r, n_cm
    cdef double v, dj, eps, total = 0.0
    cdef long n_cz, n_ez, n_z
    cdef bint has_cond = d_cond is not None
    cdef const double[:, ::1] dz
    cdef const double[:, ::1] zv
    cdef const int[:, ::1] zi
    if has_cond:
        dz = d_cond
        zv = z_vals
        zi = z_idx
    # inverse of perm as lists: rows inv[start[m]:start[m+1]] map onto m
    start_arr = np.zeros(n + 1, dtype=np.intc)
    inv_arr = np.empty(n, dtype=np.intc)
    cdef int[::1] start = start_arr
    cdef int[::1] inv = inv_arr
    for i in range(n):
        start[perm[i] + 1] += 1
    for m in range(n):
        start[m + 1] += start[m]
    fill_arr = np.array(start_arr[:n], dtype=np.intc)
    cdef int[::1] fill = fill_arr
    for i in range(n):
        inv[fill[perm[i]]] = <int>i
        fill[perm[i]] += 1
    buf = np.empty(k, dtype=np.float64)
    cdef double[::1] b = buf
    cdef double* best = &b[0]
    cdef const double* crow
    cdef const double* ezrow
    cdef const double* zrow
    with nogil:
        for i in range(n):
            pi = perm[i]
            crow = &d_cause[pi, 0]
            ezrow = &d_effect_cond[i, 0]
            for j in range(k):
                best[j] = INFINITY
            if walk_cause:
                for idx in range(n):
                    v = cause_vals[pi, idx]
                    if v >= best[k - 1]:
                        break
                    m = cause_idx[pi, idx]
                    for r in range(start[m], start[m + 1]):
                        j = inv[r]
                        if j == i:
                            continue
                        dj = _fmax(v, ezrow[j])
                        if dj < best[k - 1]:
                            _push_smallest(best, k, dj)
            else:
                for idx in range(n):
                    v = ez_vals[i, idx]
                    if v >= best[k - 1]:
                        break
                    j = ez_idx[i, idx]
                    if j == i:
                        continue
                    dj = _fmax(crow[perm[j]], v)
                    if dj < best[k - 1]:
                        _push_smallest(best, k, dj)
            eps = best[k - 1]
            n_ez = _count_below(&ez_vals[i, 0], n, eps)
            n_cm = _count_below(&cause_vals[pi, 0], n, eps)
            n_cz = 0
            if has_cond:
                n_z = _count_below(&zv[i, 0], n, eps)
                if n_cm < n_z:
                    zrow = &dz[i, 0]
                    for idx in range(n_cm):
                        m = cause_idx[pi, idx]
                        for r in range(start[m], start[m + 1]):
                            if zrow[inv[r]] < eps:
                                n_cz += 1
                else:
                    for idx in range(n_z):
                        if crow[perm[zi[i, idx]]] < eps:
                            n_cz += 1
            else:
                n_z = n
                for idx in range(n_cm):
                    m = cause_idx[pi, idx]
                    n_cz += start[m + 1] - start[m]
            total += psi[n_z] - psi[n_cz] - psi[n_ez]
    return psi[k] + total / n
