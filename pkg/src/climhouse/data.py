"""CSV ingestion of uniformly spaced annual (or finer) time series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input file; the message names the file and line."""


@dataclass(frozen=True)
class TimeSeries:
    """Observations on the uniform grid ``t0 + m (t1 - t0) / M``, ``m = 0..M``.

    ``values`` has shape ``(M + 1,)`` for a scalar series or ``(M + 1, I)``.
    """

    t0: float
    t1: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim not in (1, 2):
            raise ValueError("values must be 1-D or 2-D")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        if values.shape[0] < 3:
            raise ValueError("at least three observations (M >= 2) are required")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains missing or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.m

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.m + 1)

    @classmethod
    def from_times(cls, times, values, rtol: float = 1e-9) -> TimeSeries:
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.shape[0] != np.shape(values)[0]:
            raise ValueError("times and values must have the same length")
        if times.shape[0] < 3:
            raise ValueError("at least three observations (M >= 2) are required")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        if np.max(np.abs(steps - steps.mean())) > rtol * max(1.0, abs(steps.mean())):
            raise ValueError("times must be uniformly spaced")
        return cls(times[0], times[-1], values)


def _read_rows(path: Path, expected: list[str] | None, min_cols: int):
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(header) < min_cols:
            raise DataError(f"{path}:1: expected at least {min_cols} columns, got {len(header)}")
        if expected is not None and header != expected:
            raise DataError(f"{path}:1: expected header {','.join(expected)}, got {','.join(header)}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} columns, got {len(row)}")
            try:
                parsed = [float(cell) for cell in row]
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric or missing value in {row!r}") from None
            if not all(math.isfinite(x) for x in parsed):
                raise DataError(f"{path}:{line}: missing or non-finite value")
            rows.append((line, parsed))
    if len(rows) < 3:
        raise DataError(f"{path}: need at least 3 data rows, got {len(rows)}")
    return header, rows


def _series(path: Path, rows, values) -> TimeSeries:
    times = np.array([r[1][0] for r in rows])
    steps = np.diff(times)
    for k, step in enumerate(steps):
        if step <= 0 or abs(step - steps[0]) > 1e-9 * max(1.0, abs(steps[0])):
            raise DataError(f"{path}:{rows[k + 1][0]}: years must be strictly increasing and uniformly spaced")
    return TimeSeries(times[0], times[-1], values)


def read_productivity_csv(path) -> TimeSeries:
    """Read ``year,sector_1,...,sector_I`` into an ``(M + 1, I)`` series."""
    path = Path(path)
    header, rows = _read_rows(path, None, 2)
    want = ["year"] + [f"sector_{i}" for i in range(1, len(header))]
    if header != want:
        raise DataError(f"{path}:1: expected header {','.join(want)}, got {','.join(header)}")
    values = np.array([r[1][1:] for r in rows])
    return _series(path, rows, values)


def read_hpi_csv(path) -> TimeSeries:
    """Read ``year,index``; the index is divided by its last value and logged."""
    path = Path(path)
    _, rows = _read_rows(path, ["year", "index"], 2)
    index = np.array([r[1][1] for r in rows])
    for (line, _), value in zip(rows, index):
        if value <= 0:
            raise DataError(f"{path}:{line}: index must be positive, got {value}")
    return _series(path, rows, np.log(index / index[-1]))


def write_productivity_csv(path, series: TimeSeries) -> None:
    values = np.atleast_2d(series.values.T).T
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year"] + [f"sector_{i + 1}" for i in range(values.shape[1])])
        for t, row in zip(series.times, values):
            writer.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in row])


def write_hpi_csv(path, times, index) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year", "index"])
        for t, x in zip(times, index):
            writer.writerow([f"{t:.17g}", f"{x:.17g}"])
