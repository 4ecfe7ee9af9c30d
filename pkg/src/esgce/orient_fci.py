"""Discovery with hidden common causes: collider detection, Possible-Dsep
pruning and the tail/arrowhead rules of the FCI family (no selection bias).

Rule statements follow the canonical formulation, with ``*`` for any mark:

R1  a *-> b o-* c, a and c non-adjacent               =>  b -> c
R2  a -> b *-> c  or  a *-> b -> c, and a *-o c          =>  a *-> c
R3  a *-> b <-* c, a *-o t o-* c, a and c non-adjacent,
    t *-o b                                              =>  t *-> b
R4  discriminating path <t, ..., a, b, c> for b, b o-* c:
    b in Sepset(t, c)  =>  b -> c,  otherwise  a <-> b <-> c
R8  a -> b -> c  or  a -o b -> c, and a o-> c             =>  a -> c
R9  a o-> c and an uncovered potentially directed path
    <a, b, t, ..., c> with b and c non-adjacent           =>  a -> c
R10 a o-> c, b -> c <- t, uncovered potentially directed
    paths from a to b and from a to t whose second
    vertices are distinct and non-adjacent               =>  a -> c
"""

from __future__ import annotations

import time
from collections import deque
from itertools import combinations
from typing import Callable, Sequence

from esgce.dataset import TimeSeriesDataset
from esgce.estimator import EstimatorConfig
from esgce.graph import ExtendedSummaryGraph, Mark, SepsetTable, SliceNode
from esgce.orient_pc import DiscoveryResult
from esgce.skeleton import CITester, build_skeleton, make_tester, prune_levelwise

A, T, C = Mark.ARROW, Mark.TAIL, Mark.CIRCLE


class _PAG:
    """Mark access helpers; ``at(x, y)`` is the mark at ``x`` on edge ``x - y``."""

    def __init__(self, graph: ExtendedSummaryGraph, sepsets: SepsetTable | None = None):
        self.g = graph
        self.sepsets = sepsets or SepsetTable()

    def adj(self, x: SliceNode, y: SliceNode) -> bool:
        return self.g.has_edge(x, y)

    def at(self, x: SliceNode, y: SliceNode) -> Mark:
        return self.g.mark_at(x, y)

    def nbrs(self, x: SliceNode) -> list[SliceNode]:
        return self.g.neighbors(x)

    def set_at(self, x: SliceNode, y: SliceNode, mark: Mark) -> bool:
        # only circles are ever refined, and never into an arrowhead at a past node
        if self.at(x, y) != C or (mark == A and x.is_past):
            return False
        self.g.set_mark(x, y, mark)
        return True

    def directed(self, x: SliceNode, y: SliceNode) -> bool:
        return self.adj(x, y) and self.at(x, y) == T and self.at(y, x) == A

    def pd_edge(self, x: SliceNode, y: SliceNode) -> bool:
        # edge can be traversed x ~> y on a potentially directed path
        return self.at(x, y) != A and self.at(y, x) != T

    def uncovered_pd_paths(self, start: SliceNode, end: SliceNode, max_len: int):
        """Yield uncovered potentially directed simple paths from ``start`` to ``end``."""
        stack = [[start]]
        while stack:
            path = stack.pop()
            last = path[-1]
            for w in self.nbrs(last):
                if w in path or not self.pd_edge(last, w):
                    continue
                if len(path) >= 2 and self.adj(path[-2], w):
                    continue
                if w == end:
                    yield path + [w]
                elif len(path) < max_len:
                    stack.append(path + [w])


# -- colliders ------------------------------------------------------------------

def _sepset(sepsets: SepsetTable, a: SliceNode, b: SliceNode) -> frozenset[SliceNode] | None:
    return sepsets.get(a, b)


def fci_colliders(graph: ExtendedSummaryGraph, sepsets: SepsetTable) -> ExtendedSummaryGraph:
    """Arrowheads at unshielded colliders; other undetermined marks stay Circle.

    Lagged edges first receive their arrowhead at the present end, which
    time order implies. A present node ``X^q_t`` then becomes a collider of
    two non-adjacent present neighbours outside their separating set, or of
    a past parent and a present neighbour when it is outside the lagged
    separating set of that pair.
    """
    g = graph.copy()
    for e in g.lagged_edges():
        if e.mark_b == C:
            g.set_mark(e.b, e.a, A)
    pag = _PAG(g, sepsets)
    found: list[tuple[SliceNode, SliceNode]] = []  # (neighbour, collider)
    for r in g.present_nodes():
        inst = [n for n in g.neighbors(r) if not n.is_past]
        for p, q in combinations(inst, 2):
            s = _sepset(sepsets, p, q)
            if not g.has_edge(p, q) and s is not None and r not in s:
                found += [(p, r), (q, r)]
        for s_node in (n for n in g.neighbors(r) if n.is_past and pag.at(r, n) == A):
            for p in inst:
                s = _sepset(sepsets, s_node, p)
                if not g.has_edge(s_node, p) and s is not None and r not in s:
                    found.append((p, r))
    for nbr, collider in found:
        pag.set_at(collider, nbr, A)
    return g


# -- Possible-Dsep ----------------------------------------------------------------

def possible_dsep(graph: ExtendedSummaryGraph, pair: tuple[SliceNode, SliceNode]) -> set[SliceNode]:
    """Nodes reachable from either endpoint along paths whose inner vertices
    are colliders and ancestors of an endpoint.

    Breadth-first over (previous, current) edge states, so each edge is
    expanded at most once in each direction.
    """
    a, b = pair
    pag = _PAG(graph)
    anc = graph.ancestors({a, b})
    found: set[SliceNode] = set()
    seen: set[tuple[SliceNode, SliceNode]] = set()
    queue: deque[tuple[SliceNode, SliceNode]] = deque()
    for s in (a, b):
        for v in pag.nbrs(s):
            if (s, v) not in seen:
                seen.add((s, v))
                queue.append((s, v))
    while queue:
        u, v = queue.popleft()
        found.add(v)
        if v not in anc or pag.at(v, u) != A:
            continue
        for w in pag.nbrs(v):
            if w != u and pag.at(v, w) == A and (v, w) not in seen:
                seen.add((v, w))
                queue.append((v, w))
    return found - {a, b}


# -- orientation rules --------------------------------------------------------------

def _rule1(p: _PAG) -> bool:
    changed = False
    for b in p.g.present_nodes():
        for a in p.nbrs(b):
            if p.at(b, a) != A:
                continue
            for c in p.nbrs(b):
                if c != a and p.at(b, c) == C and not p.adj(a, c):
                    changed |= p.set_at(b, c, T)
                    changed |= p.set_at(c, b, A)
    return changed


def _rule2(p: _PAG) -> bool:
    changed = False
    for e in p.g.edges():
        for a, c in ((e.a, e.b), (e.b, e.a)):
            if p.at(c, a) != C:
                continue
            for b in p.nbrs(a):
                if b == c or not p.adj(b, c):
                    continue
                if (p.directed(a, b) and p.at(c, b) == A) or (p.at(b, a) == A and p.directed(b, c)):
                    changed |= p.set_at(c, a, A)
                    break
    return changed


def _rule3(p: _PAG) -> bool:
    changed = False
    for b in p.g.present_nodes():
        into = [n for n in p.nbrs(b) if p.at(b, n) == A]
        for a, c in combinations(into, 2):
            if p.adj(a, c):
                continue
            for t in p.nbrs(b):
                if t in (a, c) or p.at(b, t) != C:
                    continue
                if p.adj(a, t) and p.adj(c, t) and p.at(t, a) == C and p.at(t, c) == C:
                    changed |= p.set_at(b, t, A)
    return changed


def _rule4(p: _PAG, max_len: int) -> bool:
    changed = False
    for b in p.g.present_nodes():
        for c in p.nbrs(b):
            if p.at(b, c) != C:
                continue
            for a in p.nbrs(b):
                if a == c or p.at(a, b) != A or not p.directed(a, c):
                    continue
                changed |= _discriminate(p, b, c, [b, a], max_len)
                if p.at(b, c) != C:
                    break
    return changed


def _discriminate(p: _PAG, b: SliceNode, c: SliceNode, path: list[SliceNode], max_len: int) -> bool:
    # path = [b, a, ...]; every vertex after b is a collider on the path and a parent of c
    last = path[-1]
    for w in p.nbrs(last):
        if w in path or w == c or p.at(last, w) != A:
            continue
        if not p.adj(w, c):
            sep = p.sepsets.get(w, c)
            if sep is None:
                continue
            if b in sep:
                return p.set_at(b, c, T) | p.set_at(c, b, A)
            a = path[1]
            return p.set_at(b, a, A) | p.set_at(b, c, A) | p.set_at(c, b, A)
        if p.directed(w, c) and p.at(w, last) == A and len(path) + 2 <= max_len:
            if _discriminate(p, b, c, path + [w], max_len):
                return True
    return False


def _circle_arrow_edges(p: _PAG):
    for e in p.g.edges():
        for a, c in ((e.a, e.b), (e.b, e.a)):
            if p.at(a, c) == C and p.at(c, a) == A:
                yield a, c


def _rule8(p: _PAG) -> bool:
    changed = False
    for a, c in list(_circle_arrow_edges(p)):
        for b in p.nbrs(a):
            if b != c and p.adj(b, c) and p.at(a, b) == T and p.at(b, a) in (A, C) and p.directed(b, c):
                changed |= p.set_at(a, c, T)
                break
    return changed


def _rule9(p: _PAG, max_len: int) -> bool:
    changed = False
    for a, c in list(_circle_arrow_edges(p)):
        for path in p.uncovered_pd_paths(a, c, max_len):
            if len(path) >= 3 and not p.adj(path[1], c):
                changed |= p.set_at(a, c, T)
                break
    return changed


def _rule10(p: _PAG, max_len: int) -> bool:
    changed = False
    for a, c in list(_circle_arrow_edges(p)):
        parents = [n for n in p.nbrs(c) if n != a and p.directed(n, c)]
        firsts = {}
        for n in parents:
            firsts[n] = {path[1] for path in p.uncovered_pd_paths(a, n, max_len)}
        done = False
        for b, t in combinations(parents, 2):
            for mu in firsts[b]:
                if any(mu != om and not p.adj(mu, om) for om in firsts[t]):
                    changed |= p.set_at(a, c, T)
                    done = True
                    break
            if done:
                break
    return changed


RULES = ("R1", "R2", "R3", "R4", "R8", "R9", "R10")


def apply_fci_rules(graph: ExtendedSummaryGraph, sepsets: SepsetTable,
                    order: Sequence[str] = RULES) -> ExtendedSummaryGraph:
    """Apply the rules in ``order`` repeatedly until none changes a mark.

    Discriminating paths are searched up to ``d + 2`` edges; other path
    searches are bounded by the node count.
    """
    unknown = set(order) - set(RULES)
    if unknown:
        raise ValueError(f"unknown rules {sorted(unknown)}; valid: {RULES}")
    p = _PAG(graph.copy(), sepsets)
    n_nodes = 2 * graph.d
    table: dict[str, Callable[[], bool]] = {
        "R1": lambda: _rule1(p),
        "R2": lambda: _rule2(p),
        "R3": lambda: _rule3(p),
        "R4": lambda: _rule4(p, graph.d + 2),
        "R8": lambda: _rule8(p),
        "R9": lambda: _rule9(p, n_nodes),
        "R10": lambda: _rule10(p, n_nodes),
    }
    changed = True
    while changed:
        changed = False
        for name in order:
            changed |= table[name]()
    return p.g


def reset_marks(graph: ExtendedSummaryGraph) -> ExtendedSummaryGraph:
    """Lagged edges to ``(Tail, Circle)``, instantaneous edges to ``(Circle, Circle)``."""
    g = graph.copy()
    for e in g.edges():
        g.set_endpoint_mark(e.a, e.b, T if e.is_lagged else C, C)
    return g


def run_fcigce(source: TimeSeriesDataset | CITester, cfg: EstimatorConfig | None = None, *,
               max_level: int | None = None, threads: int | None = None,
               order: Sequence[str] = RULES) -> DiscoveryResult:
    """Skeleton, colliders, Possible-Dsep pruning, re-orientation and rules."""
    start = time.perf_counter()
    tester = make_tester(source, cfg or EstimatorConfig.for_algorithm("fcigce"))
    skeleton, sepsets, log = build_skeleton(tester, max_level=max_level, threads=threads)
    oriented = fci_colliders(skeleton, sepsets)
    pds = {(e.a, e.b): possible_dsep(oriented, (e.a, e.b)) for e in oriented.edges()}
    pruned = skeleton.copy()
    before = tester.n_tests
    prune_levelwise(tester, pruned, sepsets, log, lambda _snap, edge: pds[edge],
                    start_level=1, max_level=max_level, threads=threads, stage="possible-dsep")
    log.total_tests += tester.n_tests - before
    graph = apply_fci_rules(fci_colliders(reset_marks(pruned), sepsets), sepsets, order)
    return DiscoveryResult(graph, pruned, sepsets, log, [], time.perf_counter() - start)


def fcigce(source: TimeSeriesDataset | CITester, cfg: EstimatorConfig | None = None, *,
           max_level: int | None = None, threads: int | None = None,
           order: Sequence[str] = RULES) -> ExtendedSummaryGraph:
    """Partial ancestral extended summary graph allowing hidden common causes."""
    return run_fcigce(source, cfg, max_level=max_level, threads=threads, order=order).graph
