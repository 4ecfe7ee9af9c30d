"""Orientation under causal sufficiency and the full PC-style pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations

from esgce.dataset import TimeSeriesDataset
from esgce.errors import InvariantViolationError
from esgce.estimator import EstimatorConfig
from esgce.graph import ExtendedSummaryGraph, Mark, SepsetTable, SliceNode, edge_symbol
from esgce.skeleton import CITester, TestLog, build_skeleton, make_tester


def orient_temporal(graph: ExtendedSummaryGraph) -> ExtendedSummaryGraph:
    """Copy of ``graph`` with every lagged edge oriented past -> present."""
    g = graph.copy()
    for e in g.lagged_edges():
        g.set_endpoint_mark(e.a, e.b, Mark.TAIL, Mark.ARROW)
    return g


def _undirected(g: ExtendedSummaryGraph, a: SliceNode, b: SliceNode) -> bool:
    return g.has_edge(a, b) and g.marks(a, b) in ((Mark.CIRCLE, Mark.CIRCLE), (Mark.TAIL, Mark.TAIL))


def _reaches(g: ExtendedSummaryGraph, src: SliceNode, dst: SliceNode) -> bool:
    """Directed path ``src ~> dst`` of length >= 1."""
    stack, seen = list(g.children(src)), set()
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        if u not in seen:
            seen.add(u)
            stack.extend(g.children(u))
    return False


class _Orienter:
    def __init__(self, graph: ExtendedSummaryGraph, sepsets: SepsetTable, conflicts: list[str]):
        self.g = graph
        self.sepsets = sepsets
        self.conflicts = conflicts

    def lab(self, n: SliceNode) -> str:
        return n.label(self.g.names)

    def orient(self, a: SliceNode, b: SliceNode, rule: str) -> bool:
        """Try to set ``a -> b``; refuse when it contradicts an earlier mark or closes a cycle."""
        ma, mb = self.g.marks(a, b)
        if (ma, mb) == (Mark.TAIL, Mark.ARROW):
            return False
        if ma == Mark.ARROW or _reaches(self.g, b, a):
            self.conflicts.append(f"{rule}: kept {self.lab(a)} {edge_symbol(ma, mb)} {self.lab(b)}, "
                                  f"rejected {self.lab(a)} -> {self.lab(b)}")
            return False
        self.g.set_endpoint_mark(a, b, Mark.TAIL, Mark.ARROW)
        return True

    def sepset(self, a: SliceNode, b: SliceNode) -> frozenset[SliceNode]:
        s = self.sepsets.get(a, b)
        return frozenset() if s is None else s

    # -- colliders --------------------------------------------------------
    def colliders(self) -> None:
        g = self.g
        present = g.present_nodes()
        found = []
        # rule 1(i): X^p_t - X^r_t - X^q_t
        for r in present:
            inst = [n for n in g.neighbors(r) if not n.is_past and _undirected(g, n, r)]
            for p, q in combinations(inst, 2):
                if not g.has_edge(p, q) and r not in self.sepset(p, q):
                    found.append(("rule 1(i)", p, r, q))
        # rule 1(ii): X^s_{t-} -> X^q_t - X^p_t
        for q in present:
            lagged = [n for n in g.parents(q) if n.is_past]
            inst = [n for n in g.neighbors(q) if not n.is_past and _undirected(g, n, q)]
            for s in lagged:
                for p in inst:
                    if not g.has_edge(s, p) and q not in self.sepset(s, p):
                        found.append(("rule 1(ii)", None, q, p))
        for rule, p, r, q in found:
            if p is not None:
                self.orient(p, r, rule)
            self.orient(q, r, rule)

    # -- propagation ----------------------------------------------------------
    def rule2(self) -> bool:
        g, changed = self.g, False
        for r in g.present_nodes():
            for p in g.parents(r):
                for q in g.neighbors(r):
                    if q == p or q.is_past or not _undirected(g, r, q) or g.has_edge(p, q):
                        continue
                    if r in self.sepset(p, q):
                        changed |= self.orient(r, q, "rule 2")
        return changed

    def rule3(self) -> bool:
        g, changed = self.g, False
        for e in g.instantaneous_edges():
            if not _undirected(g, e.a, e.b):
                continue
            if _reaches(g, e.a, e.b):
                changed |= self.orient(e.a, e.b, "rule 3")
            elif _reaches(g, e.b, e.a):
                changed |= self.orient(e.b, e.a, "rule 3")
        return changed

    def rule4(self) -> bool:
        g, changed = self.g, False
        for e in g.instantaneous_edges():
            for p, q in ((e.a, e.b), (e.b, e.a)):
                if not _undirected(g, p, q):
                    continue
                mids = [r for r in g.parents(q)
                        if not r.is_past and _undirected(g, p, r)]
                if any(not g.has_edge(r, s) for r, s in combinations(mids, 2)):
                    changed |= self.orient(p, q, "rule 4")
        return changed


def apply_pc_rules(graph: ExtendedSummaryGraph, sepsets: SepsetTable,
                   conflicts: list[str] | None = None) -> ExtendedSummaryGraph:
    """Orient instantaneous edges of a temporally oriented skeleton.

    Colliders are found once on the input and applied first; propagation
    rules then run until nothing changes. Edges left unoriented come back as
    undirected ``(Tail, Tail)``. Refused orientations are appended to
    ``conflicts`` when a list is given.
    """
    o = _Orienter(graph.copy(), sepsets, conflicts if conflicts is not None else [])
    o.colliders()
    while o.rule2() | o.rule3() | o.rule4():
        pass
    for e in o.g.instantaneous_edges():
        if e.mark_a == Mark.CIRCLE and e.mark_b == Mark.CIRCLE:
            o.g.set_endpoint_mark(e.a, e.b, Mark.TAIL, Mark.TAIL)
    return o.g


@dataclass
class DiscoveryResult:
    graph: ExtendedSummaryGraph
    skeleton: ExtendedSummaryGraph
    sepsets: SepsetTable
    log: TestLog
    conflicts: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def total_tests(self) -> int:
        return self.log.total_tests


def run_pcgce(source: TimeSeriesDataset | CITester, cfg: EstimatorConfig | None = None, *,
              max_level: int | None = None, threads: int | None = None) -> DiscoveryResult:
    """Skeleton, temporal orientation and rule propagation, with diagnostics."""
    start = time.perf_counter()
    tester = make_tester(source, cfg or EstimatorConfig.for_algorithm("pcgce"))
    skeleton, sepsets, log = build_skeleton(tester, max_level=max_level, threads=threads)
    conflicts: list[str] = []
    graph = apply_pc_rules(orient_temporal(skeleton), sepsets, conflicts)
    if not graph.is_acyclic():
        raise InvariantViolationError("orientation produced a directed cycle")
    return DiscoveryResult(graph, skeleton, sepsets, log, conflicts, time.perf_counter() - start)


def pcgce(source: TimeSeriesDataset | CITester, cfg: EstimatorConfig | None = None, *,
          max_level: int | None = None, threads: int | None = None) -> ExtendedSummaryGraph:
    """CPDAG-like extended summary graph under causal sufficiency."""
    return run_pcgce(source, cfg, max_level=max_level, threads=threads).graph
