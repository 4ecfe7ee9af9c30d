"""Compare the compiled kNN kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 1000] [--repeat 5]

Kernel timings import both backends side by side. The end-to-end row runs
one conditional permutation test in a subprocess per backend, selected with
ESGCE_PURE_PYTHON.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from esgce import _kernels_py
from esgce.estimator import _psi_table, _sort_rows

try:
    from esgce import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

_END_TO_END = """
import time
from esgce import EstimatorConfig, PermutationCITester, generate, past, present
from esgce.kernels import BACKEND
data, _ = generate("ring4ts_tpos", T={n}, seed=1)
tester = PermutationCITester(data, EstimatorConfig(n_perm=100))
start = time.perf_counter()
tester.test(past(0), present(1), [past(1), present(2)])
print(BACKEND, time.perf_counter() - start)
"""


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _cases(n: int, rng: np.random.Generator):
    x, y, z = rng.standard_normal((n, 5)), rng.standard_normal((n, 1)), rng.standard_normal((n, 6))
    yz = np.hstack([y, z])
    psi = _psi_table(n)
    ident = np.arange(n, dtype=np.intc)
    d_x = _kernels_py.sup_distances(x)
    d_yz = _kernels_py.sup_distances(yz)
    d_z = _kernels_py.sup_distances(z)
    neighbours = np.argsort(d_z, axis=1)[:, :5].astype(np.intc)
    order = rng.permutation(n).astype(np.intc)
    sorted_views = (*_sort_rows(d_x), *_sort_rows(d_yz), *_sort_rows(d_z))

    def cases(mod):
        out = {
            "sup_distances": lambda: mod.sup_distances(yz),
            "ksg_from_points": lambda: mod.ksg_from_points(x, y, z, 10, psi),
            "ksg_from_distances": lambda: mod.ksg_from_distances(d_x, d_yz, d_z, ident, 10, psi),
            "restricted_permutation": lambda: mod.restricted_permutation(neighbours, order),
        }
        cx, ix, cyz, iyz, cz, iz = sorted_views
        out["ksg_sorted"] = lambda: mod.ksg_sorted(d_x, cx, ix, d_yz, cyz, iyz, d_z, cz, iz,
                                                   ident, True, 10, psi)
        return out

    return cases


def _end_to_end(n: int, pure: bool) -> float:
    env = dict(os.environ, ESGCE_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", _END_TO_END.format(n=n)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return float(out[1])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000, help="sample size")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if _compiled is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    cases = _cases(args.n, np.random.default_rng(0))
    py, c = cases(_kernels_py), cases(_compiled)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<24}{'compiled ms':>12}{'python ms':>12}{'speedup':>9}")
    for name in py:
        tc, tp = _time(c[name], args.repeat), _time(py[name], args.repeat)
        print(f"{name:<24}{tc * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tc:>8.1f}x")
    if not args.skip_end_to_end:
        tc, tp = _end_to_end(args.n, False), _end_to_end(args.n, True)
        print(f"{'CI test (100 perms)':<24}{tc * 1e3:>12.0f}{tp * 1e3:>12.0f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
