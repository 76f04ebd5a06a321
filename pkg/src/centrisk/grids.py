"""Uniform time grids carrying named scalar trajectories, with CSV export.

CSV layout is RFC-4180 with a header row ``t,<series...>``, one row per grid
point, 17 significant digits (lossless for float64), LF line endings.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PathGrid", "write_csv_atomic"]


@dataclass
class PathGrid:
    """A uniform grid t[0..M] plus one or more series sampled on it.

    The grid must be strictly increasing with a constant step: the deviation
    of every increment from the mean step is checked against 1e-12 of the
    total span.
    """

    t: np.ndarray
    series: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or self.t.size < 2:
            raise ValueError("grid must be a 1-d array with at least two points")
        steps = np.diff(self.t)
        if np.any(steps <= 0):
            raise ValueError("grid must be strictly increasing")
        span = float(self.t[-1] - self.t[0])
        h = span / (self.t.size - 1)
        if np.max(np.abs(steps - h)) > 1e-12 * span:
            raise ValueError("grid step is not constant to 1e-12 of the span")
        clean = {}
        for name, values in self.series.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != self.t.shape:
                raise ValueError(
                    f"series {name!r} has shape {arr.shape}, grid has {self.t.shape}"
                )
            clean[name] = arr
        self.series = clean

    @property
    def dt(self) -> float:
        return float(self.t[-1] - self.t[0]) / (self.t.size - 1)

    @property
    def n_points(self) -> int:
        return self.t.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]

    def names(self):
        return tuple(self.series.keys())

    @classmethod
    def uniform(cls, t_final: float, n_points: int, t0: float = 0.0, **series) -> "PathGrid":
        return cls(np.linspace(t0, t_final, n_points), dict(series))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        names = list(self.series)
        buf.write(",".join(["t"] + names) + "\n")
        columns = [self.t] + [self.series[n] for n in names]
        for row in zip(*columns):
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        write_csv_atomic(path, self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "PathGrid":
        with open(path, "r", newline="") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if header[0] != "t":
            raise ValueError(f"expected first column 't', got {header[0]!r}")
        series = {name: data[:, j + 1] for j, name in enumerate(header[1:])}
        return cls(data[:, 0], series)


def write_csv_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename), LF endings."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
