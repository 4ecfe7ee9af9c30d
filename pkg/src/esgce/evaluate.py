"""Scoring against ground truth, an exact d-separation tester, and the benchmark harness."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from esgce.errors import InvalidDimensionError
from esgce.estimator import CITestResult, EstimatorConfig
from esgce.graph import ExtendedSummaryGraph, Mark, SliceNode
from esgce.simulate import LAYOUTS, GroundTruth, StructureId, generate
from esgce.skeleton import complexity_bound

SCORING_MODES = ("compatible", "strict")


# -- F1 scores -------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class ScoreReport:
    """F1 over edges between distinct series (``cross``) and over self edges.

    ``self_counts`` and ``f1_self`` are ``None`` when the truth has no self edges.
    """

    cross: MeasureCounts
    self_counts: MeasureCounts | None

    @property
    def f1_cross(self) -> float:
        return self.cross.f1

    @property
    def f1_self(self) -> float | None:
        return None if self.self_counts is None else self.self_counts.f1


def _compatible(pred: tuple[Mark, Mark], true: tuple[Mark, Mark], mode: str, undirected_hits: bool) -> bool:
    if mode == "strict":
        return pred == true
    if undirected_hits and pred == (Mark.TAIL, Mark.TAIL):
        # an unoriented edge commits to no direction
        return true != (Mark.ARROW, Mark.ARROW)
    return all(p == Mark.CIRCLE or p == t for p, t in zip(pred, true))


def f1_scores(predicted: ExtendedSummaryGraph, truth: ExtendedSummaryGraph, *,
              mode: str = "compatible", undirected_hits: bool = True) -> ScoreReport:
    """Score ``predicted`` against ``truth`` edge by edge.

    In ``compatible`` mode a Circle matches any mark and, with
    ``undirected_hits``, an undirected ``(Tail, Tail)`` edge matches any
    non-bidirected truth edge. ``strict`` mode requires identical marks.
    """
    if mode not in SCORING_MODES:
        raise ValueError(f"mode must be one of {SCORING_MODES}, got {mode!r}")
    if predicted.d != truth.d:
        raise InvalidDimensionError(f"predicted graph has d={predicted.d}, truth has d={truth.d}")
    counts = {True: [0, 0, 0], False: [0, 0, 0]}  # is_self -> tp, fp, fn
    matched = set()
    for e in predicted.edges():
        c = counts[e.is_self]
        if truth.has_edge(e.a, e.b) and _compatible((e.mark_a, e.mark_b), truth.marks(e.a, e.b),
                                                    mode, undirected_hits):
            c[0] += 1
            matched.add((e.a, e.b))
        else:
            c[1] += 1
    has_self = False
    for e in truth.edges():
        has_self |= e.is_self
        if (e.a, e.b) not in matched:
            counts[e.is_self][2] += 1
    return ScoreReport(MeasureCounts(*counts[False]), MeasureCounts(*counts[True]) if has_self else None)


# -- d-separation oracle ---------------------------------------------------------------

def latent_dag(graph: ExtendedSummaryGraph) -> nx.DiGraph:
    """DAG over the 2d slice nodes with one latent node per bidirected edge.

    Raises ``ValueError`` when the graph has endpoints other than a directed
    or bidirected edge.
    """
    dag = nx.DiGraph()
    dag.add_nodes_from(graph.nodes)
    for e in graph.edges():
        marks = (e.mark_a, e.mark_b)
        if marks == (Mark.TAIL, Mark.ARROW):
            dag.add_edge(e.a, e.b)
        elif marks == (Mark.ARROW, Mark.TAIL):
            dag.add_edge(e.b, e.a)
        elif marks == (Mark.ARROW, Mark.ARROW):
            latent = ("latent", e.a, e.b)
            dag.add_edge(latent, e.a)
            dag.add_edge(latent, e.b)
        else:
            raise ValueError(f"edge {e} is neither directed nor bidirected")
    return dag


def _truth_graph(truth: GroundTruth | ExtendedSummaryGraph) -> ExtendedSummaryGraph:
    return truth.graph if isinstance(truth, GroundTruth) else truth


def dsep_oracle(truth: GroundTruth | ExtendedSummaryGraph, a: SliceNode, b: SliceNode,
                conditioners: Iterable[SliceNode] = ()) -> bool:
    """True when ``a`` and ``b`` are d-separated given ``conditioners`` in the truth."""
    return nx.is_d_separator(latent_dag(_truth_graph(truth)), {a}, {b}, set(conditioners))


class OracleCITester:
    """Drop-in replacement for ``PermutationCITester`` answering by d-separation.

    Statistics are 1.0 for dependence and 0.0 for independence, with p-values
    0.0 and 1.0 respectively.
    """

    def __init__(self, truth: GroundTruth | ExtendedSummaryGraph):
        graph = _truth_graph(truth)
        self.d = graph.d
        self.names = list(graph.names)
        self.n_tests = 0
        self._dag = latent_dag(graph)
        self._cache: dict[tuple, CITestResult] = {}

    def test(self, cause: SliceNode, effect: SliceNode, conditioners: Iterable[SliceNode] = ()) -> CITestResult:
        conds = frozenset(conditioners)
        key = (frozenset((cause, effect)), conds)
        if key not in self._cache:
            self.n_tests += 1
            sep = nx.is_d_separator(self._dag, {cause}, {effect}, set(conds))
            self._cache[key] = CITestResult(0.0 if sep else 1.0, 1.0 if sep else 0.0, sep, 0)
        return self._cache[key]

    def statistic(self, cause: SliceNode, effect: SliceNode, conditioners: Iterable[SliceNode] = ()) -> float:
        return self.test(cause, effect, conditioners).statistic


# -- benchmark -------------------------------------------------------------------------

def default_algorithm(structure: StructureId | str) -> str:
    return "fcigce" if LAYOUTS[StructureId.parse(structure)].confounded else "pcgce"


@dataclass(frozen=True)
class RunRecord:
    structure: str
    dataset: int
    seed: int
    algorithm: str
    f1_cross: float
    f1_self: float | None
    total_tests: int
    kappa: int
    test_bound: float
    seconds: float


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


@dataclass
class BenchmarkReport:
    runs: list[RunRecord] = field(default_factory=list)

    def structures(self) -> list[str]:
        return list(dict.fromkeys(r.structure for r in self.runs))

    def summary(self) -> list[dict]:
        rows = []
        for s in self.structures():
            runs = [r for r in self.runs if r.structure == s]
            cross = _mean_std([r.f1_cross for r in runs])
            selfs = [r.f1_self for r in runs if r.f1_self is not None]
            rows.append({
                "structure": s,
                "algorithm": runs[0].algorithm,
                "n": len(runs),
                "f1_cross_mean": cross[0],
                "f1_cross_std": cross[1],
                "f1_self_mean": _mean_std(selfs)[0] if selfs else None,
                "f1_self_std": _mean_std(selfs)[1] if selfs else None,
                "tests_total": sum(r.total_tests for r in runs),
                "seconds_total": sum(r.seconds for r in runs),
            })
        return rows

    def to_markdown(self) -> str:
        def pm(mean, std):
            return "-" if mean is None else f"{mean:.2f} ± {std:.2f}"

        lines = ["| structure | algorithm | n | F(p≠q) | F(p=q) | tests | seconds |",
                 "|---|---|---|---|---|---|---|"]
        for row in self.summary():
            lines.append(
                f"| {row['structure']} | {row['algorithm']} | {row['n']} | "
                f"{pm(row['f1_cross_mean'], row['f1_cross_std'])} | "
                f"{pm(row['f1_self_mean'], row['f1_self_std'])} | "
                f"{row['tests_total']} | {row['seconds_total']:.1f} |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = list(RunRecord.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in self.runs:
            writer.writerow({k: getattr(r, k) for k in fields})
        return buf.getvalue()


def dataset_seeds(master_seed: int, structure: StructureId | str, n_datasets: int) -> list[int]:
    """Per-dataset simulation seeds; they depend on the structure, not on its position in a list."""
    sid = StructureId.parse(structure)
    seq = np.random.SeedSequence([master_seed, list(StructureId).index(sid)])
    return [int(s.generate_state(1)[0]) for s in seq.spawn(n_datasets)]


def benchmark(structures: Iterable[StructureId | str], n_datasets: int = 10, T: int = 1000,
              cfg: EstimatorConfig | None = None, *, seed: int = 0, algorithm: str | None = None,
              max_level: int | None = None, threads: int | None = None, mode: str = "compatible",
              progress=None) -> BenchmarkReport:
    """Simulate ``n_datasets`` per structure, run discovery and score each run.

    The algorithm defaults to the PC variant for causally sufficient
    structures and to the FCI variant otherwise; when ``cfg`` is omitted,
    alpha follows the algorithm.
    """
    from esgce.orient_fci import run_fcigce
    from esgce.orient_pc import run_pcgce

    if n_datasets < 1:
        raise ValueError("n_datasets must be >= 1")
    report = BenchmarkReport()
    for structure in (StructureId.parse(s) for s in structures):
        alg = algorithm or default_algorithm(structure)
        run_cfg = cfg or EstimatorConfig.for_algorithm(alg)
        runner = run_fcigce if alg == "fcigce" else run_pcgce
        for i, ds_seed in enumerate(dataset_seeds(seed, structure, n_datasets)):
            data, truth = generate(structure, T, ds_seed)
            start = time.perf_counter()
            result = runner(data, run_cfg, max_level=max_level, threads=threads)
            seconds = time.perf_counter() - start
            score = f1_scores(result.graph, truth.graph, mode=mode)
            kappa = result.log.kappa
            record = RunRecord(structure.value, i, ds_seed, alg, score.f1_cross, score.f1_self,
                               result.log.total_tests, kappa, complexity_bound(truth.d, kappa), seconds)
            report.runs.append(record)
            if progress is not None:
                progress(record)
    return report
