"""Pure numpy implementations of the kNN kernels.

Same signatures and results as the compiled ``_kernels`` module. Row-chunked
so that memory stays bounded for large samples.
"""

import numpy as np

_CHUNK = 256


def _block_dist(a, rows):
    # supremum distance from a[rows] to every row of a
    if a.shape[1] == 0:
        return np.zeros((len(rows), a.shape[0]))
    out = np.abs(a[rows, None, 0] - a[None, :, 0])
    for c in range(1, a.shape[1]):
        np.maximum(out, np.abs(a[rows, None, c] - a[None, :, c]), out=out)
    return out


def sup_distances(x):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        out[rows] = _block_dist(x, rows)
    return out


def _kth_excluding_self(joint, rows, k):
    joint[np.arange(len(rows)), rows] = np.inf
    return np.partition(joint, k - 1, axis=1)[:, k - 1]


def ksg_from_points(x, y, z, k, psi):
    x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    psi = np.asarray(psi)
    n = x.shape[0]
    total = 0.0
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        dx, dy, dz = _block_dist(x, rows), _block_dist(y, rows), _block_dist(z, rows)
        joint = np.maximum(np.maximum(dx, dy), dz)
        eps = _kth_excluding_self(joint, rows, k)[:, None]
        in_z = dz < eps
        n_z = in_z.sum(axis=1)
        n_xz = (in_z & (dx < eps)).sum(axis=1)
        n_yz = (in_z & (dy < eps)).sum(axis=1)
        total += float(np.sum(psi[n_z] - psi[n_xz] - psi[n_yz]))
    return psi[k] + total / n


def ksg_from_distances(d_cause, d_effect_cond, d_cond, perm, k, psi):
    psi = np.asarray(psi)
    perm = np.asarray(perm, dtype=np.intp)
    n = d_cause.shape[0]
    total = 0.0
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        dc = d_cause[perm[rows]][:, perm]
        dez = d_effect_cond[rows]
        joint = np.maximum(dc, dez)
        eps = _kth_excluding_self(joint, rows, k)[:, None]
        n_ez = (dez < eps).sum(axis=1)
        if d_cond is None:
            n_z = np.full(len(rows), n)
            n_cz = (dc < eps).sum(axis=1)
        else:
            in_z = d_cond[rows] < eps
            n_z = in_z.sum(axis=1)
            n_cz = (in_z & (dc < eps)).sum(axis=1)
        total += float(np.sum(psi[n_z] - psi[n_cz] - psi[n_ez]))
    return psi[k] + total / n


def restricted_permutation(neighbors, order):
    n, m = neighbors.shape
    perm = np.empty(n, dtype=np.intc)
    used = np.zeros(n, dtype=bool)
    for idx in order:
        c = 0
        use = neighbors[idx, 0]
        while used[use] and c < m - 1:
            c += 1
            use = neighbors[idx, c]
        perm[idx] = use
        used[use] = True
    return perm


def ksg_sorted(d_cause, cause_vals, cause_idx, d_effect_cond, ez_vals, ez_idx,
               d_cond, z_vals, z_idx, perm, walk_cause, k, psi):
    # the sorted views only accelerate the compiled kernel
    return ksg_from_distances(d_cause, d_effect_cond, d_cond, perm, k, psi)
