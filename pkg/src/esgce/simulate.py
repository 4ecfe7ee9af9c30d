"""Synthetic benchmark series with known extended summary graphs.

Each series follows

    X^q_t = a_qq X^q_{t-1} + sum_p a_pq f_pq(X^p_{t-lag}) + 0.1 xi^q_t

with cross coefficients drawn from U([-1, -0.1] U [0.1, 1]), ``f_pq`` drawn
from {abs, tanh, sin, cos} and standard normal ``xi``. Self coefficients
exist only in the ring structures and are drawn from U[0.1, 0.9].
Structures with hidden causes simulate two extra white-noise series that
drive one observed pair each at lag 1 and are dropped from the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from esgce.dataset import TimeSeriesDataset
from esgce.errors import TooShortError, UnknownStructureError
from esgce.graph import ExtendedSummaryGraph, Mark, past, present

BURN_IN = 100
MIN_LENGTH = 50
NOISE_SCALE = 0.1
DIVERGENCE_LIMIT = 1e6
_MAX_RESEEDS = 100

FUNCTIONS = {
    "abs": np.abs,
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
}


class StructureId(str, Enum):
    RING4TS_T0 = "ring4ts_t0"
    FOURTS_TPOS = "fourts_tpos"
    RING4TS_TPOS = "ring4ts_tpos"
    SEVEN2H_TPOS = "seven2h_tpos"
    RING7T2H_TPOS = "ring7t2h_tpos"

    @classmethod
    def parse(cls, value) -> "StructureId":
        try:
            return cls(value)
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise UnknownStructureError(f"unknown structure {value!r}; valid ids: {valid}") from None


@dataclass(frozen=True)
class _Layout:
    d: int
    cross: tuple[tuple[int, int], ...]  # 0-based (cause, effect)
    instantaneous: bool
    ring: bool
    confounded: tuple[tuple[int, int], ...] = ()


_FOUR = ((0, 1), (0, 2), (1, 3), (2, 3))
_SEVEN = ((1, 0), (2, 1), (3, 2), (3, 4), (4, 5), (5, 6))
_SEVEN_HIDDEN = ((6, 1), (0, 5))

LAYOUTS = {
    StructureId.RING4TS_T0: _Layout(4, _FOUR, instantaneous=True, ring=True),
    StructureId.FOURTS_TPOS: _Layout(4, _FOUR, instantaneous=False, ring=False),
    StructureId.RING4TS_TPOS: _Layout(4, _FOUR, instantaneous=False, ring=True),
    StructureId.SEVEN2H_TPOS: _Layout(7, _SEVEN, instantaneous=False, ring=False, confounded=_SEVEN_HIDDEN),
    StructureId.RING7T2H_TPOS: _Layout(7, _SEVEN, instantaneous=False, ring=True, confounded=_SEVEN_HIDDEN),
}


@dataclass(frozen=True)
class Mechanism:
    """One causal term ``coefficient * function(X^cause_{t-lag})`` of the effect series.

    Indices refer to the full simulated system: observed series first, then
    the hidden ones. Self terms are linear and use ``function="identity"``.
    """

    cause: int
    effect: int
    lag: int
    coefficient: float
    function: str


@dataclass
class GroundTruth:
    structure: StructureId
    graph: ExtendedSummaryGraph
    names: list[str]
    hidden_series: list[int]
    mechanisms: list[Mechanism]
    seed: int
    attempts: int = 1

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def n_total(self) -> int:
        return self.d + len(self.hidden_series)

    def to_meta(self) -> dict:
        return {
            "structure": self.structure.value,
            "seed": self.seed,
            "attempts": self.attempts,
            "observed": self.names,
            "hidden": [f"H{i + 1}" for i in range(len(self.hidden_series))],
            "mechanisms": [
                {
                    "cause": self._name(m.cause),
                    "effect": self._name(m.effect),
                    "lag": m.lag,
                    "coefficient": m.coefficient,
                    "function": m.function,
                }
                for m in self.mechanisms
            ],
        }

    def meta_json(self) -> str:
        return json.dumps(self.to_meta(), indent=2)

    def _name(self, i: int) -> str:
        return self.names[i] if i < self.d else f"H{i - self.d + 1}"


def _names(d: int) -> list[str]:
    return [f"X{i + 1}" for i in range(d)]


def truth_graph(structure: StructureId | str) -> ExtendedSummaryGraph:
    """Observed-variable extended summary graph of a benchmark structure.

    Hidden confounding appears as a bidirected present-present edge.
    """
    layout = LAYOUTS[StructureId.parse(structure)]
    g = ExtendedSummaryGraph(layout.d, _names(layout.d))
    if layout.ring:
        for q in range(layout.d):
            g.add_edge(past(q), present(q), Mark.TAIL, Mark.ARROW)
    for p, q in layout.cross:
        if layout.instantaneous:
            g.add_edge(present(p), present(q), Mark.TAIL, Mark.ARROW)
        else:
            g.add_edge(past(p), present(q), Mark.TAIL, Mark.ARROW)
    for p, q in layout.confounded:
        g.add_edge(present(p), present(q), Mark.ARROW, Mark.ARROW)
    return g


def _draw_mechanisms(layout: _Layout, rng: np.random.Generator, max_lag: int) -> list[Mechanism]:
    def coefficient() -> float:
        return float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 1.0))

    def function() -> str:
        return str(rng.choice(list(FUNCTIONS)))

    mechs = []
    if layout.ring:
        for q in range(layout.d):
            mechs.append(Mechanism(q, q, 1, float(rng.uniform(0.1, 0.9)), "identity"))
    for p, q in layout.cross:
        lag = 0 if layout.instantaneous else int(rng.integers(1, max_lag + 1))
        mechs.append(Mechanism(p, q, lag, coefficient(), function()))
    for h, (p, q) in enumerate(layout.confounded):
        for child in (p, q):
            mechs.append(Mechanism(layout.d + h, child, 1, coefficient(), function()))
    return mechs


def _simulate(n_series: int, mechs: list[Mechanism], length: int, rng: np.random.Generator) -> np.ndarray | None:
    x = np.zeros((length, n_series))
    noise = NOISE_SCALE * rng.standard_normal((length, n_series))
    by_effect: dict[int, list[Mechanism]] = {q: [] for q in range(n_series)}
    for m in mechs:
        by_effect[m.effect].append(m)
    # instantaneous parents always have a smaller index in the benchmark structures
    order = range(n_series)
    for t in range(length):
        for q in order:
            total = noise[t, q]
            for m in by_effect[q]:
                if t - m.lag < 0:
                    continue
                v = x[t - m.lag, m.cause]
                total += m.coefficient * (v if m.function == "identity" else FUNCTIONS[m.function](v))
            x[t, q] = total
        if not np.all(np.abs(x[t]) < DIVERGENCE_LIMIT):
            return None
    return x


def generate(structure: StructureId | str, T: int = 1000, seed: int = 0,
             max_lag: int = 2) -> tuple[TimeSeriesDataset, GroundTruth]:
    """Simulate ``T`` observed timepoints of a benchmark structure.

    Deterministic in ``seed``. A run whose values leave ``(-1e6, 1e6)`` is
    discarded and redrawn from the next seed in the same stream.
    """
    sid = StructureId.parse(structure)
    if T < MIN_LENGTH:
        raise TooShortError(f"T must be at least {MIN_LENGTH}, got {T}")
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    layout = LAYOUTS[sid]
    n_series = layout.d + len(layout.confounded)
    seq = np.random.SeedSequence(seed)
    for attempt, child in enumerate(seq.spawn(_MAX_RESEEDS), start=1):
        rng = np.random.default_rng(child)
        mechs = _draw_mechanisms(layout, rng, max_lag)
        x = _simulate(n_series, mechs, BURN_IN + T, rng)
        if x is not None:
            break
    else:  # pragma: no cover - requires pathological coefficients every time
        raise RuntimeError("simulation diverged on every reseed")
    names = _names(layout.d)
    data = TimeSeriesDataset.from_array(x[BURN_IN:, :layout.d], names)
    truth = GroundTruth(
        structure=sid,
        graph=truth_graph(sid),
        names=names,
        hidden_series=list(range(layout.d, n_series)),
        mechanisms=mechs,
        seed=seed,
        attempts=attempt,
    )
    return data, truth
