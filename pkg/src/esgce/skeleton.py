"""PC-stable skeleton search over the extended summary graph.

Level 0 tests every lagged edge with its unconditional causation entropy and
every instantaneous edge with the plain mutual information. Level ``l`` then
conditions on size-``l`` subsets of the neighbours both endpoints had when
the level started. Removals are applied in one batch per level, so the
result does not depend on the order in which series or edges are visited.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Protocol, Sequence

from esgce.dataset import TimeSeriesDataset
from esgce.estimator import CITestResult, EstimatorConfig, PermutationCITester
from esgce.graph import ExtendedSummaryGraph, SepsetTable, SliceNode, new_full_graph

Pair = tuple[SliceNode, SliceNode]


class CITester(Protocol):
    d: int
    names: list[str]
    n_tests: int

    def test(self, cause: SliceNode, effect: SliceNode, conditioners: Iterable[SliceNode] = ()) -> CITestResult: ...


@dataclass(frozen=True)
class TestRecord:
    stage: str
    edge: Pair
    level: int
    conditioning: tuple[SliceNode, ...]
    statistic: float
    p_value: float
    independent: bool


@dataclass
class TestLog:
    """Every independence test issued, in deterministic order.

    ``total_tests`` counts tests actually evaluated; a query answered from
    the tester's cache is listed in ``entries`` but not counted again.
    """

    entries: list[TestRecord] = field(default_factory=list)
    total_tests: int = 0
    # level-0 statistic per edge, used to rank conditioners
    scores: dict[Pair, float] = field(default_factory=dict)

    def levels(self, stage: str = "skeleton") -> int:
        """Number of conditioning levels that issued at least one test."""
        used = {r.level for r in self.entries if r.stage == stage}
        return max(used) + 1 if used else 0

    @property
    def kappa(self) -> int:
        return max(self.levels("skeleton"), 1)

    def to_csv(self, names: Sequence[str] | None = None) -> str:
        def lab(n: SliceNode) -> str:
            return n.label(list(names)) if names else repr(n)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stage", "edge", "level", "conditioning_set", "statistic", "p_value", "decision"])
        for r in self.entries:
            writer.writerow([
                r.stage,
                f"{lab(r.edge[0])} - {lab(r.edge[1])}",
                r.level,
                " ".join(lab(n) for n in r.conditioning),
                f"{r.statistic:.6g}",
                f"{r.p_value:.6g}",
                "independent" if r.independent else "dependent",
            ])
        return buf.getvalue()


def complexity_bound(d: int, kappa: int) -> float:
    """Worst-case test count ``4 d^2 (2d-1)^(kappa-1) / (kappa-1)!`` for ``kappa >= 1``."""
    kappa = max(int(kappa), 1)
    return 4 * d * d * (2 * d - 1) ** (kappa - 1) / math.factorial(kappa - 1)


# -- shared level-wise machinery -------------------------------------------------

def _score(scores: dict[Pair, float], node: SliceNode, other: SliceNode) -> float:
    key = (node, other) if (node, other) in scores else (other, node)
    return scores.get(key, 0.0)


def rank_conditioners(candidates: Iterable[SliceNode], edge: Pair, scores: dict[Pair, float]) -> list[SliceNode]:
    """Order candidates by decreasing level-0 dependence with the tested edge.

    A lagged edge is scored against its present endpoint; an instantaneous
    edge takes the larger score against either endpoint. Ties fall back to
    (series, slice) order.
    """
    a, b = edge
    targets = (b,) if a.is_past else (a, b)

    def key(c: SliceNode):
        return (-max(_score(scores, c, t) for t in targets), c.series, c.is_past is False)

    return sorted(candidates, key=key)


def _search_edge(tester: CITester, edge: Pair, ranked: list[SliceNode], level: int, stage: str):
    records = []
    for subset in combinations(ranked, level):
        res = tester.test(edge[0], edge[1], subset)
        records.append(TestRecord(stage, edge, level, tuple(subset), res.statistic, res.p_value, res.independent))
        if res.independent:
            return subset, records
    return None, records


def prune_levelwise(
    tester: CITester,
    graph: ExtendedSummaryGraph,
    sepsets: SepsetTable,
    log: TestLog,
    candidates: Callable[[ExtendedSummaryGraph, Pair], set[SliceNode]],
    *,
    start_level: int = 1,
    max_level: int | None = None,
    threads: int | None = None,
    stage: str = "skeleton",
) -> None:
    """Remove edges level by level, conditioning on ranked candidate subsets.

    ``candidates(snapshot, edge)`` is evaluated against the graph as it stood
    at the start of each level; all removals of a level are applied together.
    """
    level = start_level
    pool = ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else None
    try:
        while max_level is None or level <= max_level:
            snapshot = graph.copy()
            work = []
            for e in snapshot.edges():
                edge = (e.a, e.b)
                cands = candidates(snapshot, edge) - {e.a, e.b}
                if len(cands) >= level:
                    work.append((edge, rank_conditioners(cands, edge, log.scores)))
            if not work:
                break

            def run(item):
                return _search_edge(tester, item[0], item[1], level, stage)

            results = list(pool.map(run, work)) if pool else [run(item) for item in work]
            for (edge, _), (sepset, records) in zip(work, results):
                log.entries.extend(records)
                if sepset is not None:
                    graph.remove_edge(*edge)
                    sepsets.set(edge[0], edge[1], sepset)
            level += 1
    finally:
        if pool:
            pool.shutdown()


def _neighbour_union(graph: ExtendedSummaryGraph, edge: Pair) -> set[SliceNode]:
    return set(graph.neighbors(edge[0])) | set(graph.neighbors(edge[1]))


def make_tester(source, cfg: EstimatorConfig | None = None) -> CITester:
    if isinstance(source, TimeSeriesDataset):
        return PermutationCITester(source, cfg)
    return source


def build_skeleton(
    source: TimeSeriesDataset | CITester,
    cfg: EstimatorConfig | None = None,
    *,
    max_level: int | None = None,
    threads: int | None = None,
) -> tuple[ExtendedSummaryGraph, SepsetTable, TestLog]:
    """Skeleton, separating sets and test log for a dataset or a CI tester.

    Parameters
    ----------
    source
        A ``TimeSeriesDataset`` (tested with ``PermutationCITester``) or any
        object exposing ``d``, ``names``, ``n_tests`` and ``test``.
    cfg
        Estimator settings, used only when ``source`` is a dataset.
    max_level
        Largest conditioning-set size to try; ``None`` means unlimited.
    threads
        Worker threads for tests within one level.
    """
    tester = make_tester(source, cfg)
    before = tester.n_tests
    graph = new_full_graph(tester.d, tester.names)
    sepsets = SepsetTable()
    log = TestLog()

    level0 = [(e.a, e.b) for e in graph.edges()]

    def run0(edge):
        return tester.test(edge[0], edge[1], ())

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run0, level0))
    else:
        results = [run0(edge) for edge in level0]
    for edge, res in zip(level0, results):
        log.scores[edge] = res.statistic
        log.entries.append(TestRecord("skeleton", edge, 0, (), res.statistic, res.p_value, res.independent))
        if res.independent:
            graph.remove_edge(*edge)
            sepsets.set(edge[0], edge[1], ())

    if max_level is None or max_level >= 1:
        prune_levelwise(tester, graph, sepsets, log, _neighbour_union,
                        start_level=1, max_level=max_level, threads=threads)
    log.total_tests = tester.n_tests - before
    return graph, sepsets, log
