import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgce import _kernels_py, kernels
from esgce.estimator import _psi_table, _sort_rows

compiled = pytest.importorskip("esgce._kernels")


def _blocks(n, dims, seed, ties=False):
    rng = np.random.default_rng(seed)
    out = []
    for dim in dims:
        b = rng.standard_normal((n, dim))
        if ties:
            b = np.round(b, 1)
        out.append(np.ascontiguousarray(b))
    return out


@settings(max_examples=40, deadline=None)
@given(n=st.integers(12, 80), dx=st.integers(1, 4), dy=st.integers(1, 2), dz=st.integers(0, 3),
       k=st.integers(1, 6), seed=st.integers(0, 10_000), ties=st.booleans())
def test_distance_and_point_kernels_agree(n, dx, dy, dz, k, seed, ties):
    x, y, z = _blocks(n, (dx, dy, dz), seed, ties)
    np.testing.assert_array_equal(compiled.sup_distances(x), _kernels_py.sup_distances(x))
    psi = _psi_table(n)
    a = compiled.ksg_from_points(x, y, z, k, psi)
    b = _kernels_py.ksg_from_points(x, y, z, k, psi)
    assert a == pytest.approx(b, abs=1e-12)


def _restricted(d_z, k_perm, rng):
    n = d_z.shape[0]
    nbrs = np.argsort(d_z, axis=1)[:, :k_perm].astype(np.intc)
    nbrs = np.ascontiguousarray(rng.permuted(nbrs, axis=1))
    order = rng.permutation(n).astype(np.intc)
    return nbrs, order


@settings(max_examples=40, deadline=None)
@given(n=st.integers(12, 80), dx=st.integers(1, 4), dz=st.integers(0, 3), k=st.integers(1, 6),
       seed=st.integers(0, 10_000), ties=st.booleans(), k_perm=st.integers(1, 5))
def test_distance_kernels_agree_under_permutations(n, dx, dz, k, seed, ties, k_perm):
    x, y, z = _blocks(n, (dx, 1, dz), seed, ties)
    rng = np.random.default_rng(seed)
    d_x = _kernels_py.sup_distances(x)
    d_y = _kernels_py.sup_distances(y)
    d_z = _kernels_py.sup_distances(z) if dz else None
    d_yz = d_y if d_z is None else np.maximum(d_y, d_z)
    psi = _psi_table(n)

    perms = [np.arange(n, dtype=np.intc), rng.permutation(n).astype(np.intc)]
    if d_z is not None:
        nbrs, order = _restricted(d_z, k_perm, rng)
        p_c = compiled.restricted_permutation(nbrs, order)
        p_py = _kernels_py.restricted_permutation(nbrs, order)
        np.testing.assert_array_equal(p_c, p_py)
        perms.append(p_c)  # may repeat indices when neighbourhoods are exhausted

    sx, ix = _sort_rows(d_x)
    syz, iyz = _sort_rows(d_yz)
    sz, iz = _sort_rows(d_z) if d_z is not None else (None, None)
    for perm in perms:
        ref = _kernels_py.ksg_from_distances(d_x, d_yz, d_z, perm, k, psi)
        assert compiled.ksg_from_distances(d_x, d_yz, d_z, perm, k, psi) == pytest.approx(ref, abs=1e-12)
        for walk_cause in (True, False):
            got = compiled.ksg_sorted(d_x, sx, ix, d_yz, syz, iyz, d_z, sz, iz, perm, walk_cause, k, psi)
            assert got == pytest.approx(ref, abs=1e-12)


def test_restricted_permutation_is_bijective_when_possible():
    rng = np.random.default_rng(0)
    n = 50
    nbrs = np.ascontiguousarray(np.tile(rng.permutation(n).astype(np.intc), (n, 1)))
    perm = compiled.restricted_permutation(nbrs, rng.permutation(n).astype(np.intc))
    assert sorted(perm.tolist()) == list(range(n))


def test_backend_selection():
    assert kernels.BACKEND == "compiled"
    code = "from esgce.kernels import BACKEND, USE_SORTED; print(BACKEND, USE_SORTED)"
    env = dict(os.environ, ESGCE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "False"]


def test_pipeline_results_match_across_backends():
    code = ("from esgce import generate, run_pcgce, EstimatorConfig;"
            "d, _ = generate('fourts_tpos', 150, seed=4);"
            "r = run_pcgce(d, EstimatorConfig(n_perm=20));"
            "print(r.graph.to_json()); print(r.log.to_csv())")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, ESGCE_PURE_PYTHON=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]
