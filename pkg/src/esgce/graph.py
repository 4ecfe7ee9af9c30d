"""Extended summary causal graphs.

A graph over ``d`` time series has ``2d`` nodes: one past-slice node
``X^p_{t-}`` and one present-slice node ``X^p_t`` per series. Edges are
unordered node pairs carrying one endpoint mark at each end, so the same
object represents a skeleton, a CPDAG or a PAG.

Node ``i`` of the internal mark matrix is the past node of series ``i`` for
``i < d`` and the present node of series ``i - d`` otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from esgce.errors import InvalidDimensionError, InvariantViolationError, MissingEdgeError


class Slice(str, Enum):
    PAST = "past"
    PRESENT = "present"


class Mark(IntEnum):
    TAIL = 1
    ARROW = 2
    CIRCLE = 3

    @property
    def label(self) -> str:
        return self.name.lower()


class SliceNode(NamedTuple):
    series: int
    slice: Slice

    @property
    def is_past(self) -> bool:
        return self.slice == Slice.PAST

    def label(self, names: list[str] | None = None) -> str:
        name = names[self.series] if names else f"X{self.series + 1}"
        return f"{name}_t-" if self.is_past else f"{name}_t"

    def __repr__(self) -> str:
        return self.label()


def past(series: int) -> SliceNode:
    return SliceNode(series, Slice.PAST)


def present(series: int) -> SliceNode:
    return SliceNode(series, Slice.PRESENT)


class Edge(NamedTuple):
    a: SliceNode
    b: SliceNode
    mark_a: Mark
    mark_b: Mark

    @property
    def is_lagged(self) -> bool:
        return self.a.is_past != self.b.is_past

    @property
    def is_self(self) -> bool:
        return self.a.series == self.b.series


_MARK_SYMBOL_LEFT = {Mark.TAIL: "-", Mark.ARROW: "<", Mark.CIRCLE: "o"}
_MARK_SYMBOL_RIGHT = {Mark.TAIL: "-", Mark.ARROW: ">", Mark.CIRCLE: "o"}
_DOT_ARROW = {Mark.TAIL: "none", Mark.ARROW: "normal", Mark.CIRCLE: "odot"}


def edge_symbol(mark_a: Mark, mark_b: Mark) -> str:
    return f"{_MARK_SYMBOL_LEFT[mark_a]}-{_MARK_SYMBOL_RIGHT[mark_b]}"


class ExtendedSummaryGraph:
    """Two-slice graph with typed endpoint marks.

    Invariants enforced on every mutation: no edge between two past nodes,
    no arrowhead at a past endpoint, no present self-adjacency.

    Parameters
    ----------
    d : int
        Number of time series.
    names : list of str, optional
        Series names; defaults to ``X1..Xd``.
    """

    def __init__(self, d: int, names: Iterable[str] | None = None):
        if d < 1:
            raise InvalidDimensionError(f"a graph needs at least one series, got d={d}")
        self.d = int(d)
        self.names = list(names) if names is not None else [f"X{i + 1}" for i in range(d)]
        if len(self.names) != self.d:
            raise InvalidDimensionError(f"{len(self.names)} names for {d} series")
        # _marks[i, j] is the mark at node j on edge i-j, 0 when absent
        self._marks = np.zeros((2 * d, 2 * d), dtype=np.int8)

    # -- node helpers -------------------------------------------------------
    def index(self, node: SliceNode) -> int:
        if not 0 <= node.series < self.d:
            raise InvalidDimensionError(f"series {node.series} out of range for d={self.d}")
        return node.series + (self.d if node.slice == Slice.PRESENT else 0)

    def node(self, index: int) -> SliceNode:
        if index < self.d:
            return SliceNode(index, Slice.PAST)
        return SliceNode(index - self.d, Slice.PRESENT)

    @property
    def nodes(self) -> list[SliceNode]:
        return [self.node(i) for i in range(2 * self.d)]

    def past_nodes(self) -> list[SliceNode]:
        return [past(i) for i in range(self.d)]

    def present_nodes(self) -> list[SliceNode]:
        return [present(i) for i in range(self.d)]

    # -- edge queries -------------------------------------------------------
    def has_edge(self, a: SliceNode, b: SliceNode) -> bool:
        return bool(self._marks[self.index(a), self.index(b)])

    def marks(self, a: SliceNode, b: SliceNode) -> tuple[Mark, Mark]:
        ia, ib = self.index(a), self.index(b)
        if not self._marks[ia, ib]:
            raise MissingEdgeError(f"no edge {a!r} - {b!r}")
        return Mark(self._marks[ib, ia]), Mark(self._marks[ia, ib])

    def mark_at(self, node: SliceNode, other: SliceNode) -> Mark:
        """Mark at ``node`` on the edge ``node - other``."""
        return self.marks(node, other)[0]

    def neighbors(self, node: SliceNode) -> list[SliceNode]:
        row = self._marks[self.index(node)]
        return [self.node(j) for j in np.flatnonzero(row)]

    def edges(self) -> Iterator[Edge]:
        n = 2 * self.d
        for i in range(n):
            for j in range(i + 1, n):
                if self._marks[i, j]:
                    yield Edge(self.node(i), self.node(j),
                               Mark(self._marks[j, i]), Mark(self._marks[i, j]))

    def lagged_edges(self) -> list[Edge]:
        return [e for e in self.edges() if e.is_lagged]

    def instantaneous_edges(self) -> list[Edge]:
        return [e for e in self.edges() if not e.is_lagged]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self._marks)))

    def is_directed(self, a: SliceNode, b: SliceNode) -> bool:
        """True when the edge is ``a -> b``."""
        return self.has_edge(a, b) and self.marks(a, b) == (Mark.TAIL, Mark.ARROW)

    def parents(self, node: SliceNode) -> list[SliceNode]:
        return [u for u in self.neighbors(node) if self.is_directed(u, node)]

    def children(self, node: SliceNode) -> list[SliceNode]:
        return [v for v in self.neighbors(node) if self.is_directed(node, v)]

    def ancestors(self, nodes: Iterable[SliceNode]) -> set[SliceNode]:
        """Nodes with a directed path into ``nodes``; every node is its own ancestor."""
        found = set(nodes)
        stack = list(found)
        while stack:
            for u in self.parents(stack.pop()):
                if u not in found:
                    found.add(u)
                    stack.append(u)
        return found

    def is_acyclic(self) -> bool:
        directed = (self._marks == Mark.ARROW) & (self._marks.T == Mark.TAIL)
        indegree = directed.sum(axis=0)
        queue = [i for i in range(2 * self.d) if indegree[i] == 0]
        seen = 0
        while queue:
            i = queue.pop()
            seen += 1
            for j in np.flatnonzero(directed[i]):
                indegree[j] -= 1
                if indegree[j] == 0:
                    queue.append(j)
        return seen == 2 * self.d

    # -- mutation -----------------------------------------------------------
    def _check_pair(self, a: SliceNode, b: SliceNode) -> None:
        if a == b:
            raise InvariantViolationError(f"self-adjacency on {a!r}")
        if a.is_past and b.is_past:
            raise InvariantViolationError(f"past-past edge {a!r} - {b!r}")

    def _check_mark(self, node: SliceNode, mark: Mark) -> None:
        if node.is_past and mark is Mark.ARROW:
            raise InvariantViolationError(f"arrowhead into past node {node!r}")

    def add_edge(self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) -> "ExtendedSummaryGraph":
        self._check_pair(a, b)
        mark_a, mark_b = Mark(mark_a), Mark(mark_b)
        self._check_mark(a, mark_a)
        self._check_mark(b, mark_b)
        ia, ib = self.index(a), self.index(b)
        self._marks[ib, ia] = mark_a
        self._marks[ia, ib] = mark_b
        return self

    def set_endpoint_mark(self, a: SliceNode, b: SliceNode, mark_a: Mark, mark_b: Mark) -> "ExtendedSummaryGraph":
        """Replace both marks of an existing edge."""
        if not self.has_edge(a, b):
            raise MissingEdgeError(f"no edge {a!r} - {b!r}")
        return self.add_edge(a, b, mark_a, mark_b)

    def set_mark(self, at: SliceNode, other: SliceNode, mark: Mark) -> "ExtendedSummaryGraph":
        """Replace the mark at ``at`` on the edge ``at - other``."""
        if not self.has_edge(at, other):
            raise MissingEdgeError(f"no edge {at!r} - {other!r}")
        mark = Mark(mark)
        self._check_mark(at, mark)
        self._marks[self.index(other), self.index(at)] = mark
        return self

    def remove_edge(self, a: SliceNode, b: SliceNode) -> "ExtendedSummaryGraph":
        if not self.has_edge(a, b):
            raise MissingEdgeError(f"no edge {a!r} - {b!r}")
        ia, ib = self.index(a), self.index(b)
        self._marks[ia, ib] = 0
        self._marks[ib, ia] = 0
        return self

    def copy(self) -> "ExtendedSummaryGraph":
        g = ExtendedSummaryGraph(self.d, self.names)
        g._marks = self._marks.copy()
        return g

    def relabel(self, order: list[int]) -> "ExtendedSummaryGraph":
        """Return a copy where old series ``order[i]`` becomes series ``i``."""
        g = ExtendedSummaryGraph(self.d, [self.names[o] for o in order])
        new_of = {old: new for new, old in enumerate(order)}
        for e in self.edges():
            g.add_edge(SliceNode(new_of[e.a.series], e.a.slice),
                       SliceNode(new_of[e.b.series], e.b.slice), e.mark_a, e.mark_b)
        return g

    def skeleton_pairs(self) -> set[frozenset[SliceNode]]:
        return {frozenset((e.a, e.b)) for e in self.edges()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExtendedSummaryGraph):
            return NotImplemented
        return self.d == other.d and np.array_equal(self._marks, other._marks)

    def __repr__(self) -> str:
        body = ", ".join(
            f"{e.a.label(self.names)} {edge_symbol(e.mark_a, e.mark_b)} {e.b.label(self.names)}"
            for e in self.edges()
        )
        return f"ExtendedSummaryGraph(d={self.d}, [{body}])"

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        def node(n: SliceNode) -> dict:
            return {"series": n.series, "slice": n.slice.value}

        return {
            "d": self.d,
            "series": list(self.names),
            "edges": [
                {"a": node(e.a), "b": node(e.b), "mark_a": e.mark_a.label, "mark_b": e.mark_b.label}
                for e in self.edges()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExtendedSummaryGraph":
        g = cls(int(data["d"]), data.get("series"))
        for e in data["edges"]:
            a = SliceNode(int(e["a"]["series"]), Slice(e["a"]["slice"]))
            b = SliceNode(int(e["b"]["series"]), Slice(e["b"]["slice"]))
            g.add_edge(a, b, Mark[e["mark_a"].upper()], Mark[e["mark_b"].upper()])
        return g

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExtendedSummaryGraph":
        return cls.from_dict(json.loads(text))

    def to_dot(self, name: str = "G") -> str:
        def ident(n: SliceNode) -> str:
            return f'"{self.names[n.series]}_past"' if n.is_past else f'"{self.names[n.series]}"'

        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for n in self.nodes:
            style = ', style=dashed' if n.is_past else ""
            lines.append(f'  {ident(n)} [label="{n.label(self.names)}"{style}];')
        for e in self.edges():
            lines.append(
                f"  {ident(e.a)} -> {ident(e.b)} "
                f"[dir=both, arrowtail={_DOT_ARROW[e.mark_a]}, arrowhead={_DOT_ARROW[e.mark_b]}];"
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def new_full_graph(d: int, names: Iterable[str] | None = None) -> ExtendedSummaryGraph:
    """Complete starting graph: every past node to every present node (tail, circle)
    and every present pair (circle, circle)."""
    g = ExtendedSummaryGraph(d, names)
    for p in range(d):
        for q in range(d):
            g.add_edge(past(p), present(q), Mark.TAIL, Mark.CIRCLE)
    for p in range(d):
        for q in range(p + 1, d):
            g.add_edge(present(p), present(q), Mark.CIRCLE, Mark.CIRCLE)
    return g


# -- sepsets ------------------------------------------------------------------

@dataclass
class SepsetTable:
    """Separating sets recorded when edges are removed.

    ``lagged`` is keyed by ``(cause series, effect series)`` for past-present
    edges, ``instantaneous`` by the sorted series pair of present-present edges.
    """

    lagged: dict[tuple[int, int], frozenset[SliceNode]] = field(default_factory=dict)
    instantaneous: dict[tuple[int, int], frozenset[SliceNode]] = field(default_factory=dict)

    @staticmethod
    def _key(a: SliceNode, b: SliceNode) -> tuple[str, tuple[int, int]]:
        if a.is_past and b.is_past:
            raise InvariantViolationError("past-past pairs have no separating set")
        if a.is_past:
            return "lagged", (a.series, b.series)
        if b.is_past:
            return "lagged", (b.series, a.series)
        return "instantaneous", (min(a.series, b.series), max(a.series, b.series))

    def set(self, a: SliceNode, b: SliceNode, conditioners: Iterable[SliceNode]) -> None:
        table, key = self._key(a, b)
        getattr(self, table)[key] = frozenset(conditioners)

    def get(self, a: SliceNode, b: SliceNode) -> frozenset[SliceNode] | None:
        if a.is_past and b.is_past:
            return None
        table, key = self._key(a, b)
        return getattr(self, table).get(key)

    def __contains__(self, pair: tuple[SliceNode, SliceNode]) -> bool:
        return self.get(*pair) is not None

    def __len__(self) -> int:
        return len(self.lagged) + len(self.instantaneous)

    def copy(self) -> "SepsetTable":
        return SepsetTable(dict(self.lagged), dict(self.instantaneous))

    def to_dict(self) -> dict:
        def enc(s: frozenset[SliceNode]) -> list:
            return sorted([n.series, n.slice.value] for n in s)

        return {
            "lagged": [{"cause": p, "effect": q, "set": enc(s)} for (p, q), s in sorted(self.lagged.items())],
            "instantaneous": [{"a": p, "b": q, "set": enc(s)} for (p, q), s in sorted(self.instantaneous.items())],
        }


# -- summary graphs -------------------------------------------------------------

_MARK_PRIORITY = {Mark.ARROW: 2, Mark.TAIL: 1, Mark.CIRCLE: 0}


def _merge_mark(m1: Mark, m2: Mark) -> Mark:
    return m1 if _MARK_PRIORITY[m1] >= _MARK_PRIORITY[m2] else m2


@dataclass
class SummaryGraph:
    """One node per series. ``edges[(p, q)] = (mark at p, mark at q)``.

    A key ``(p, q)`` orders the pair as "from p towards q"; a lagged relation
    in each direction yields two entries. Self-loops use key ``(p, p)``.
    """

    d: int
    names: list[str]
    edges: dict[tuple[int, int], tuple[Mark, Mark]] = field(default_factory=dict)

    def add(self, p: int, q: int, mark_p: Mark, mark_q: Mark) -> None:
        """Merge a relation into the graph; the arrow mark wins at each endpoint.

        An unoriented relation concerns both directions of the pair, so it is
        merged into every existing entry for ``{p, q}``.
        """
        keys = [k for k in dict.fromkeys(((p, q), (q, p))) if k in self.edges]
        if _is_oriented(mark_p, mark_q):
            # merges with its own direction, else with an unoriented entry
            keys = [k for k in keys if k == (p, q) or not _is_oriented(*self.edges[k])][:1]
        if not keys:
            self.edges[(p, q)] = (mark_p, mark_q)
            return
        for k in keys:
            new = (mark_p, mark_q) if k == (p, q) else (mark_q, mark_p)
            self.edges[k] = tuple(_merge_mark(old, m) for old, m in zip(self.edges[k], new))
        fwd, back = self.edges.get((p, q)), self.edges.get((q, p))
        if p != q and fwd and back and not _is_oriented(*fwd) and fwd == back[::-1]:
            del self.edges[(q, p)]

    def directed_edges(self) -> set[tuple[int, int]]:
        return {k for k, v in self.edges.items() if v == (Mark.TAIL, Mark.ARROW)}

    def self_loops(self) -> set[int]:
        return {p for (p, q) in self.edges if p == q}

    def to_extended(self) -> ExtendedSummaryGraph:
        """Re-encode: oriented and self edges become lagged edges, the rest instantaneous."""
        g = ExtendedSummaryGraph(self.d, self.names)
        for (p, q), (mp, mq) in self.edges.items():
            if p == q or (_is_oriented(mp, mq) and mp is not Mark.ARROW):
                g.add_edge(past(p), present(q), Mark.TAIL if mp is Mark.ARROW else mp, mq)
            else:
                g.add_edge(present(p), present(q), mp, mq)
        return g

    def canonical_edges(self) -> dict[tuple[int, int], tuple[Mark, Mark]]:
        """Edges keyed so that oriented entries point p -> q and the rest use p <= q."""
        out = {}
        for (p, q), (mp, mq) in self.edges.items():
            if (mp is Mark.ARROW and mq is not Mark.ARROW) or (not _is_oriented(mp, mq) and p > q):
                p, q, mp, mq = q, p, mq, mp
            out[(p, q)] = (mp, mq)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SummaryGraph):
            return NotImplemented
        return self.d == other.d and self.canonical_edges() == other.canonical_edges()


def _is_oriented(mark_p: Mark, mark_q: Mark) -> bool:
    return (mark_p is Mark.ARROW) != (mark_q is Mark.ARROW)


def collapse_to_summary(graph: ExtendedSummaryGraph) -> SummaryGraph:
    """Collapse slices: one node per series, lagged and instantaneous relations merged."""
    s = SummaryGraph(graph.d, list(graph.names))
    # lagged first, so instantaneous marks merge into an existing oriented entry
    for e in graph.lagged_edges():
        s.add(e.a.series, e.b.series, e.mark_a, e.mark_b)
    for e in graph.instantaneous_edges():
        p, q, mp, mq = e.a.series, e.b.series, e.mark_a, e.mark_b
        if mp is Mark.ARROW and mq is not Mark.ARROW:
            p, q, mp, mq = q, p, mq, mp
        s.add(p, q, mp, mq)
    return s
