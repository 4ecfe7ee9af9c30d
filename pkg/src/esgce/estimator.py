"""kNN information estimators and the local permutation independence test.

All statistics are in nats. Distances use the supremum norm over every
column of every block involved, counts are strict (``< eps``) and include
the point itself, which gives the ``psi(n_z) - psi(n_xz) - psi(n_yz)`` form of
the Frenzel-Pompe conditional estimator and, for an empty conditioning set,
the usual ``psi(k) + psi(n) - <psi(n_x) + psi(n_y)>`` mutual information.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import digamma

from esgce import kernels
from esgce.dataset import TimeSeriesDataset
from esgce.errors import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidConditionerError,
    InvalidDimensionError,
)
from esgce.graph import Slice, SliceNode, past, present

DEFAULT_ALPHA = {"pcgce": 0.05, "fcigce": 0.1}
_JITTER_SCALE = 1e-10


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator and test settings.

    gamma
        Maximum lag; past windows span ``t-gamma .. t-1``.
    k
        Neighbour count of the kNN estimator.
    k_perm
        Neighbourhood size of the local permutation scheme.
    n_perm
        Number of permutation surrogates per test.
    alpha
        Significance level; a test reports independence when ``p > alpha``.
    seed
        Master seed; every random draw is derived from it.
    """

    gamma: int = 5
    k: int = 10
    k_perm: int = 5
    n_perm: int = 100
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma", "k", "k_perm", "n_perm"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    def replace(self, **changes) -> "EstimatorConfig":
        return replace(self, **changes)

    @classmethod
    def for_algorithm(cls, algorithm: str, **changes) -> "EstimatorConfig":
        changes.setdefault("alpha", DEFAULT_ALPHA[algorithm])
        return cls(**changes)


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    independent: bool
    n_used: int


# -- embedding and raw estimation ----------------------------------------------

def lag_embed(data, p: int, window: Slice | str, gamma: int) -> np.ndarray:
    """Rows ``t = gamma .. T-1`` of series ``p``.

    ``window="past"`` gives columns ``(x[t-gamma], ..., x[t-1])``;
    ``window="present"`` gives the single column ``x[t]``.
    """
    values = data.values if isinstance(data, TimeSeriesDataset) else np.asarray(data, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    T, d = values.shape
    if not 0 <= p < d:
        raise InvalidDimensionError(f"series index {p} out of range for d={d}")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if T <= gamma:
        raise InsufficientDataError(f"need T > gamma, got T={T}, gamma={gamma}")
    x = values[:, p]
    if Slice(window) == Slice.PRESENT:
        return np.ascontiguousarray(x[gamma:, None])
    cols = [x[gamma - lag: T - lag] for lag in range(gamma, 0, -1)]
    return np.ascontiguousarray(np.column_stack(cols))


@lru_cache(maxsize=16)
def _psi_table(n: int) -> np.ndarray:
    table = digamma(np.arange(n + 1, dtype=np.float64))
    table[0] = 0.0  # counts include the point itself, so index 0 is never read
    table.flags.writeable = False
    return table


def _as_block(a, n: int | None = None) -> np.ndarray:
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return np.ascontiguousarray(a)


def _standardise(block: np.ndarray) -> np.ndarray:
    if not block.size:
        return block
    return np.ascontiguousarray((block - block.mean(axis=0)) / block.std(axis=0))


def ksg_cmi(x, y, z=None, k: int = 10) -> float:
    """kNN estimate of I(x; y | z) in nats (z may be ``None`` or empty).

    Columns are standardised first so that no column dominates the
    supremum norm; mutual information is unchanged by this rescaling.
    """
    x = _as_block(x)
    n = x.shape[0]
    y, z = _as_block(y, n), _as_block(z, n)
    if y.shape[0] != n or z.shape[0] != n:
        raise InvalidDimensionError("all blocks must share the same number of rows")
    if n <= k:
        raise InsufficientDataError(f"need more than k={k} samples, got {n}")
    for name, block in (("x", x), ("y", y), ("z", z)):
        if block.size and np.any(np.ptp(block, axis=0) == 0):
            raise DegenerateDataError(f"block {name} has a zero-variance column")
    x, y, z = (_standardise(b) for b in (x, y, z))
    return float(kernels.ksg_from_points(x, y, z, k, _psi_table(n)))


# -- dataset-bound estimator -----------------------------------------------------

def _digest(*parts) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(part if isinstance(part, bytes) else repr(part).encode())
        h.update(b"|")
    return h.digest()


def _sort_rows(dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.argsort(dist, axis=1).astype(np.intc)
    return np.take_along_axis(dist, idx, axis=1), idx


class PermutationCITester:
    """kNN CMI statistic plus local permutation test on one dataset.

    Each series is standardised and jittered once; block embeddings and
    their pairwise distance matrices are cached per node. Random streams are
    derived from the data content of the blocks involved rather than from
    series indices, so relabelling the series never changes a decision.

    Parameters
    ----------
    dataset : TimeSeriesDataset
    cfg : EstimatorConfig
    """

    def __init__(self, dataset: TimeSeriesDataset, cfg: EstimatorConfig | None = None):
        self.cfg = cfg or EstimatorConfig()
        if dataset.T <= self.cfg.gamma:
            raise InsufficientDataError(f"need T > gamma, got T={dataset.T}, gamma={self.cfg.gamma}")
        self.names = list(dataset.names)
        self.d = dataset.d
        self.n = dataset.T - self.cfg.gamma
        if self.n <= self.cfg.k:
            raise InsufficientDataError(f"need more than k={self.cfg.k} samples, got {self.n}")
        self.n_tests = 0
        self._psi = _psi_table(self.n)
        self._values, self._degenerate, self._series_digest = self._prepare(dataset.values)
        self._blocks: dict[SliceNode, np.ndarray] = {}
        self._dist: dict[SliceNode, np.ndarray] = {}
        self._sorted: dict[SliceNode, tuple[np.ndarray, np.ndarray]] = {}
        self._cache: dict[tuple, CITestResult] = {}

    def _prepare(self, raw: np.ndarray):
        values = np.empty_like(raw)
        degenerate, digests = [], []
        for p in range(raw.shape[1]):
            col = raw[:, p]
            digest = _digest(self.cfg.seed, col.tobytes())
            std = col.std()
            if std == 0 or not np.isfinite(std):
                degenerate.append(True)
                values[:, p] = 0.0
            else:
                degenerate.append(False)
                rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
                values[:, p] = (col - col.mean()) / std + _JITTER_SCALE * rng.standard_normal(len(col))
            digests.append(digest)
        return values, degenerate, digests

    # -- per-node caches ------------------------------------------------------
    def block(self, node: SliceNode) -> np.ndarray:
        if node not in self._blocks:
            self._blocks[node] = lag_embed(self._values, node.series, node.slice, self.cfg.gamma)
        return self._blocks[node]

    def distances(self, node: SliceNode) -> np.ndarray:
        if node not in self._dist:
            self._dist[node] = kernels.sup_distances(self.block(node))
        return self._dist[node]

    def sorted_distances(self, node: SliceNode) -> tuple[np.ndarray, np.ndarray]:
        if node not in self._sorted:
            self._sorted[node] = _sort_rows(self.distances(node))
        return self._sorted[node]

    def node_digest(self, node: SliceNode) -> bytes:
        return _digest(self._series_digest[node.series], Slice(node.slice).value)

    def clear_cache(self) -> None:
        self._blocks.clear()
        self._dist.clear()
        self._sorted.clear()

    # -- core -------------------------------------------------------------
    def _validate(self, cause: SliceNode, effect: SliceNode, conditioners) -> tuple[SliceNode, ...]:
        for node in (cause, effect, *conditioners):
            if not 0 <= node.series < self.d:
                raise InvalidDimensionError(f"series {node.series} out of range for d={self.d}")
        if effect.slice != Slice.PRESENT:
            raise InvalidConditionerError("the effect must be a present-slice node")
        if cause == effect:
            raise InvalidConditionerError("cause and effect coincide")
        conds = tuple(sorted(set(conditioners), key=self.node_digest))
        if cause in conds or effect in conds:
            raise InvalidConditionerError("a conditioner coincides with the tested cause or effect block")
        return conds

    def _orient(self, cause: SliceNode, effect: SliceNode) -> tuple[SliceNode, SliceNode]:
        # present-present tests are symmetric; permute the block with the smaller digest
        if cause.slice == Slice.PRESENT and self.node_digest(effect) < self.node_digest(cause):
            return effect, cause
        return cause, effect

    def _distance_parts(self, effect, conds):
        d_e = self.distances(effect)
        if not conds:
            return d_e, None
        d_z = self.distances(conds[0]).copy()
        for c in conds[1:]:
            np.maximum(d_z, self.distances(c), out=d_z)
        return np.maximum(d_e, d_z), d_z

    def _estimator(self, cause, effect, conds, d_c, d_ez, d_z):
        # returns perm -> CMI estimate with the cause rows permuted
        k, psi = self.cfg.k, self._psi
        if not kernels.USE_SORTED:
            return lambda perm: kernels.ksg_from_distances(d_c, d_ez, d_z, perm, k, psi)
        c_vals, c_idx = self.sorted_distances(cause)
        if d_z is None:
            ez_vals, ez_idx = self.sorted_distances(effect)
            z_vals = z_idx = None
        else:
            ez_vals, ez_idx = _sort_rows(d_ez)
            z_vals, z_idx = _sort_rows(d_z)
        # the block with more columns has the sparser neighbourhoods
        ez_dim = sum(self.block(node).shape[1] for node in (effect, *conds))
        walk_cause = self.block(cause).shape[1] >= ez_dim
        return lambda perm: kernels.ksg_sorted(d_c, c_vals, c_idx, d_ez, ez_vals, ez_idx,
                                               d_z, z_vals, z_idx, perm, walk_cause, k, psi)

    def _is_degenerate(self, nodes) -> bool:
        return any(self._degenerate[n.series] for n in nodes)

    def statistic(self, cause: SliceNode, effect: SliceNode, conditioners: Iterable[SliceNode] = ()) -> float:
        """I(effect; cause | conditioners) on the standardised data."""
        conds = self._validate(cause, effect, tuple(conditioners))
        cause, effect = self._orient(cause, effect)
        if self._is_degenerate((cause, effect, *conds)):
            return 0.0
        d_ez, d_z = self._distance_parts(effect, conds)
        ident = np.arange(self.n, dtype=np.intc)
        return float(kernels.ksg_from_distances(self.distances(cause), d_ez, d_z, ident, self.cfg.k, self._psi))

    def test(self, cause: SliceNode, effect: SliceNode, conditioners: Iterable[SliceNode] = ()) -> CITestResult:
        """Local permutation test of ``cause`` independent of ``effect`` given ``conditioners``."""
        conds = self._validate(cause, effect, tuple(conditioners))
        cause, effect = self._orient(cause, effect)
        key = (cause, effect, frozenset(conds))
        if key in self._cache:
            return self._cache[key]
        if self._is_degenerate((cause, effect, *conds)):
            result = CITestResult(0.0, 1.0, True, self.n)
            self._cache[key] = result
            return result
        cfg = self.cfg
        d_c = self.distances(cause)
        d_ez, d_z = self._distance_parts(effect, conds)
        estimate = self._estimator(cause, effect, conds, d_c, d_ez, d_z)
        observed = estimate(np.arange(self.n, dtype=np.intc))

        seed = _digest(cfg.seed, self.node_digest(cause), self.node_digest(effect),
                       *sorted(self.node_digest(c) for c in conds))
        rng = np.random.default_rng(int.from_bytes(seed[:8], "little"))
        neighbors = None
        if d_z is not None and cfg.k_perm < self.n:
            neighbors = np.argpartition(d_z, cfg.k_perm - 1, axis=1)[:, :cfg.k_perm].astype(np.intc)
        exceed = 0
        for _ in range(cfg.n_perm):
            if neighbors is None:
                perm = rng.permutation(self.n).astype(np.intc)
            else:
                order = rng.permutation(self.n).astype(np.intc)
                shuffled = np.ascontiguousarray(rng.permuted(neighbors, axis=1))
                perm = kernels.restricted_permutation(shuffled, order)
            exceed += estimate(perm) >= observed
        p_value = (1 + exceed) / (1 + cfg.n_perm)
        result = CITestResult(float(observed), p_value, p_value > cfg.alpha, self.n)
        self.n_tests += 1
        self._cache[key] = result
        return result


# -- functional API --------------------------------------------------------------

Conditioners = Sequence[tuple[int, Slice | str]]


def _nodes(conditioners: Conditioners) -> list[SliceNode]:
    return [SliceNode(int(s), Slice(tag)) for s, tag in conditioners]


def gce(dataset: TimeSeriesDataset, p: int, q: int, cfg: EstimatorConfig | None = None,
        tester: PermutationCITester | None = None) -> float:
    """Greedy causation entropy I(X^q_t ; X^p_{t-gamma:t-1})."""
    tester = tester or PermutationCITester(dataset, cfg)
    return tester.statistic(past(p), present(q))


def conditional_gce(dataset: TimeSeriesDataset, p: int, q: int, conditioners: Conditioners,
                    cfg: EstimatorConfig | None = None, tester: PermutationCITester | None = None) -> float:
    """I(X^q_t ; X^p_{t-gamma:t-1} | conditioners); each conditioner is ``(series, slice)``."""
    tester = tester or PermutationCITester(dataset, cfg)
    return tester.statistic(past(p), present(q), _nodes(conditioners))


def instantaneous_cmi(dataset: TimeSeriesDataset, p: int, q: int, conditioners: Conditioners = (),
                      cfg: EstimatorConfig | None = None, tester: PermutationCITester | None = None) -> float:
    """I(X^q_t ; X^p_t | conditioners)."""
    if p == q:
        raise InvalidConditionerError("instantaneous CMI needs two distinct series")
    tester = tester or PermutationCITester(dataset, cfg)
    return tester.statistic(present(p), present(q), _nodes(conditioners))


def local_permutation_test(dataset: TimeSeriesDataset, cause: SliceNode, effect: SliceNode,
                           conditioners: Iterable[SliceNode] = (), cfg: EstimatorConfig | None = None,
                           tester: PermutationCITester | None = None) -> CITestResult:
    tester = tester or PermutationCITester(dataset, cfg)
    return tester.test(cause, effect, conditioners)
