"""Continual-learning scoreboards: the a[i, j] grid, AIP and forgetting.

``a[i, j]`` is the score of the model trained through timestamp ``i`` on
timestamp ``j`` (``j <= i``, both 1-based). Forgetting is direction aware
and never clamped, so a negative value means backward transfer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import ReplayError

__all__ = [
    "Direction",
    "MissingEntry",
    "PerformanceMatrix",
    "MetricSummary",
    "MetricsReport",
    "average_at",
    "aip",
    "forgetting",
    "summarize",
    "build_report",
]


class MissingEntry(ReplayError, KeyError):
    code = "missing_entry"

    def __str__(self):
        return str(self.args[0]) if self.args else "missing entry"


class Direction(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass
class PerformanceMatrix:
    metric_name: str
    direction: Direction
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self.direction = Direction(self.direction)

    def set(self, i: int, j: int, value: float) -> None:
        if not 1 <= j <= i:
            raise ValueError(f"entry ({i}, {j}) is outside the lower triangle")
        self.entries[(i, j)] = float(value)

    def get(self, i: int, j: int) -> float:
        try:
            return self.entries[(i, j)]
        except KeyError:
            raise MissingEntry(f"{self.metric_name}: no entry a[{i},{j}]") from None

    @property
    def size(self) -> int:
        return max((i for i, _ in self.entries), default=0)

    def row(self, i: int) -> list:
        return [self.get(i, j) for j in range(1, i + 1)]

    def to_array(self) -> np.ndarray:
        """Dense ``(T, T)`` array with NaN above the diagonal."""
        n = self.size
        out = np.full((n, n), np.nan)
        for (i, j), v in self.entries.items():
            out[i - 1, j - 1] = v
        return out

    @classmethod
    def from_rows(cls, metric_name, direction, rows) -> "PerformanceMatrix":
        m = cls(metric_name, direction)
        for i, row in enumerate(rows, 1):
            for j, v in enumerate(row, 1):
                m.set(i, j, v)
        return m


def average_at(matrix: PerformanceMatrix, t: int) -> float:
    row = matrix.row(t)
    return sum(row) / t


def aip(matrix: PerformanceMatrix) -> float:
    T = matrix.size
    if T == 0:
        raise MissingEntry(f"{matrix.metric_name}: empty matrix")
    return sum(average_at(matrix, t) for t in range(1, T + 1)) / T


def forgetting(matrix: PerformanceMatrix) -> tuple[list, float]:
    """Per-timestamp forgetting of the final model and their mean.

    For column ``j`` the reference is the best score any earlier model
    ``l in j..T-1`` achieved on it.
    """
    T = matrix.size
    if T < 2:
        raise MissingEntry(f"{matrix.metric_name}: forgetting needs at least two timestamps")
    per = []
    for j in range(1, T):
        history = [matrix.get(l, j) for l in range(j, T)]
        final = matrix.get(T, j)
        if matrix.direction is Direction.POSITIVE:
            per.append(max(history) - final)
        else:
            per.append(max(final - h for h in history))
    return per, sum(per) / len(per)


@dataclass
class MetricSummary:
    matrix: PerformanceMatrix
    average_at: list
    aip: float
    forgetting: float | None
    per_timestamp_forgetting: list

    def to_json(self) -> dict:
        return {
            "direction": self.matrix.direction.value,
            "matrix": [self.matrix.row(i) for i in range(1, self.matrix.size + 1)],
            "average_at": self.average_at,
            "aip": self.aip,
            "forgetting": self.forgetting,
            "per_timestamp_forgetting": self.per_timestamp_forgetting,
        }


def summarize(matrix: PerformanceMatrix) -> MetricSummary:
    T = matrix.size
    avg = [average_at(matrix, t) for t in range(1, T + 1)]
    if T >= 2:
        per, F = forgetting(matrix)
    else:
        per, F = [], None
    return MetricSummary(matrix, avg, sum(avg) / T, F, per)


@dataclass
class MetricsReport:
    per_metric: dict

    def to_json(self) -> dict:
        return {name: s.to_json() for name, s in self.per_metric.items()}


def build_report(matrices) -> MetricsReport:
    return MetricsReport({m.metric_name: summarize(m) for m in matrices})
