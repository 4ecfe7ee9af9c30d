"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set ``ESGCE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from esgce import _kernels_py

if os.environ.get("ESGCE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from esgce import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

sup_distances = _impl.sup_distances
ksg_from_points = _impl.ksg_from_points
ksg_from_distances = _impl.ksg_from_distances
restricted_permutation = _impl.restricted_permutation
ksg_sorted = _impl.ksg_sorted

# the sorted-row kernel only pays off when compiled
USE_SORTED = BACKEND == "compiled"
