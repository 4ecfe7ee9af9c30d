"""Multivariate time series container and CSV I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from esgce.errors import DataFormatError, InvalidDimensionError


@dataclass
class TimeSeriesDataset:
    """``d`` named real-valued series sampled at ``T`` uniform timepoints.

    ``values`` has shape ``(T, d)``.
    """

    values: np.ndarray
    names: list[str]

    def __post_init__(self):
        self.values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2:
            raise InvalidDimensionError(f"expected a (T, d) array, got shape {self.values.shape}")
        self.names = list(self.names)
        if len(self.names) != self.values.shape[1]:
            raise InvalidDimensionError(f"{len(self.names)} names for {self.values.shape[1]} series")

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "TimeSeriesDataset":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"X{i + 1}" for i in range(values.shape[1])]
        return cls(values, list(names))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def series(self, p: int) -> np.ndarray:
        return self.values[:, p]

    def select(self, order: Sequence[int]) -> "TimeSeriesDataset":
        """Dataset with columns reordered (or subset) as ``order``."""
        order = list(order)
        return TimeSeriesDataset(self.values[:, order], [self.names[i] for i in order])

    # -- CSV ----------------------------------------------------------------
    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeriesDataset":
        with open(path, newline="") as fh:
            return cls.read_csv(fh)

    @classmethod
    def read_csv(cls, fh) -> "TimeSeriesDataset":
        """Parse a header row plus one numeric row per timepoint.

        Missing or non-numeric cells are rejected, never imputed.
        """
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", line=1) from None
        names = [h.strip() for h in header]
        if not names or any(not n for n in names):
            raise DataFormatError("header has empty column names", line=1)
        if len(set(names)) != len(names):
            raise DataFormatError("duplicate column names in header", line=1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise DataFormatError(f"expected {len(names)} fields, found {len(row)}", line=line)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataFormatError(f"non-numeric or missing value in {row!r}", line=line) from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError("missing (NaN) or infinite value", line=line)
            rows.append(vals)
        if not rows:
            raise DataFormatError("no data rows", line=2)
        return cls(np.array(rows), names)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text
