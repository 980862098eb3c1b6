"""Uniformly sampled time series and their CSV form.

CSV layout: one ``#`` metadata line of ``key=value`` pairs, a header row,
then rows in shortest round-trip decimal form (``repr`` of binary64).
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np


def format_float(x: float) -> str:
    return repr(float(x))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Trajectory:
    times: np.ndarray
    columns: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    index_name: str = "t"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = len(self.times)
        for name, col in self.columns.items():
            col = np.asarray(col)
            if len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)}, expected {n}")
            self.columns[name] = col

    def __getitem__(self, name: str) -> np.ndarray:
        if name == self.index_name:
            return self.times
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name == self.index_name or name in self.columns

    def __len__(self) -> int:
        return len(self.times)

    @property
    def names(self) -> list[str]:
        return [self.index_name, *self.columns]

    def select(self, names: Iterable[str]) -> "Trajectory":
        cols = {k: self.columns[k] for k in names if k != self.index_name}
        return Trajectory(self.times, cols, dict(self.metadata), self.index_name)

    def strided(self, stride: int) -> "Trajectory":
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return Trajectory(self.times[::stride], {k: v[::stride] for k, v in self.columns.items()},
                          dict(self.metadata), self.index_name)

    def write_csv(self, dest: str | Path | IO[str]) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self._write(fh)
        else:
            self._write(dest)

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    def _write(self, fh: IO[str]) -> None:
        if self.metadata:
            fh.write("# " + " ".join(f"{k}={_meta_value(v)}" for k, v in self.metadata.items()) + "\n")
        fh.write(",".join(self.names) + "\n")
        cols = [self.times, *self.columns.values()]
        for row in zip(*cols):
            fh.write(",".join(format_float(x) for x in row) + "\n")


def _meta_value(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    return str(v).replace(" ", "_")


def read_csv(source: str | Path | IO[str]) -> Trajectory:
    """Inverse of :meth:`Trajectory.write_csv` (metadata values come back as strings)."""
    if hasattr(source, "read"):
        return _parse_csv(source, "<stream>")
    with open(source) as fh:
        return _parse_csv(fh, str(source))


def _parse_csv(fh: IO[str], source: str) -> Trajectory:
    metadata: dict = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                metadata[key] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ValueError(f"{source}: no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    cols = {name: data[:, k] for k, name in enumerate(header)}
    first = header[0]
    return Trajectory(cols.pop(first), cols, metadata, first)


def is_uniform(times: np.ndarray, rtol: float = 1e-9) -> bool:
    if len(times) < 3:
        return True
    d = np.diff(times)
    return bool(np.all(np.abs(d - d[0]) <= rtol * max(abs(d[0]), math.ulp(1.0))))
