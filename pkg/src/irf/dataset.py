"""Sample sets, CSV ingestion and distance-based outlier labels."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from irf.errors import DataError

BUNDLED = ("wdbc.csv", "wdbc_benchmark.csv")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """An immutable, ordered set of d-dimensional points.

    Attributes:
        points: Array of shape (n, d), float64, read-only.
        labels: Optional boolean array of length n; True marks an anomaly.
        ids: Optional record identifiers aligned with ``points``.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise DataError(f"points must be 2D, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise DataError("a sample set needs at least one point")
        if pts.shape[1] == 0:
            raise DataError("points need at least one coordinate")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

        if self.labels is not None:
            labels = np.array(self.labels, dtype=bool, copy=True)
            if labels.shape != (pts.shape[0],):
                raise DataError(
                    f"labels length {labels.shape} does not match {pts.shape[0]} points"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != pts.shape[0]:
                raise DataError("ids length does not match number of points")
            object.__setattr__(self, "ids", ids)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.size

    def point_ids(self) -> tuple[str, ...]:
        """Identifiers for output; falls back to 0-based row numbers."""
        if self.ids is not None:
            return self.ids
        return tuple(str(i) for i in range(self.size))

    def subset(self, index: Sequence[int]) -> SampleSet:
        idx = np.asarray(index, dtype=np.int64)
        return SampleSet(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.ids is None else tuple(self.ids[i] for i in idx),
        )

    def with_points(self, points: np.ndarray) -> SampleSet:
        """Same records (labels, ids) carried over to new coordinates."""
        return SampleSet(points, self.labels, self.ids)

    def with_labels(self, labels: np.ndarray | None) -> SampleSet:
        return SampleSet(self.points, labels, self.ids)


@dataclass(frozen=True)
class OutlierParams:
    """Radius ``r`` and fraction ``p`` of the distance-based outlier rule."""

    radius: float
    fraction: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DataError(f"radius must be > 0, got {self.radius}")
        if not 0.0 <= self.fraction <= 1.0:
            raise DataError(f"fraction must lie in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class CsvConfig:
    """Column selection for :func:`load_csv`.

    ``features=None`` selects every column except the label and id columns.
    """

    features: tuple[str, ...] | None = None
    label_column: str | None = None
    positive_class: str | None = None
    id_column: str | None = None

    def __post_init__(self) -> None:
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))
        if self.label_column is not None and self.positive_class is None:
            raise DataError("a label column needs a positive-class value")


def load_csv(path: str | Path, config: CsvConfig = CsvConfig()) -> SampleSet:
    """Read a header-first, comma-separated file into a :class:`SampleSet`.

    Rows keep file order. Columns not selected as features, label or id are
    ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (no header row)") from None
        rows = [row for row in reader if row and any(c.strip() for c in row)]

    col = {name: i for i, name in enumerate(header)}
    special = {c for c in (config.label_column, config.id_column) if c is not None}
    for name in special:
        if name not in col:
            raise DataError(f"{path}: column {name!r} not in header")
    if config.features is None:
        features = [h for h in header if h not in special]
    else:
        features = list(config.features)
        missing = [f for f in features if f not in col]
        if missing:
            raise DataError(f"{path}: feature columns not in header: {missing}")
    if not features:
        raise DataError(f"{path}: no feature columns selected")
    if not rows:
        raise DataError(f"{path}: dataset has no rows")

    feat_idx = [col[f] for f in features]
    points = np.empty((len(rows), len(features)), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {r + 2} has {len(row)} cells, header has {len(header)}"
            )
        for c, i in enumerate(feat_idx):
            cell = row[i].strip()
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} in column {header[i]!r}, row {r + 2}"
                ) from None
            if not math.isfinite(value):
                raise DataError(f"{path}: non-finite value in column {header[i]!r}, row {r + 2}")
            points[r, c] = value

    labels = None
    if config.label_column is not None:
        li = col[config.label_column]
        labels = np.array([row[li].strip() == config.positive_class for row in rows])
    ids = None
    if config.id_column is not None:
        ii = col[config.id_column]
        ids = tuple(row[ii].strip() for row in rows)
    return SampleSet(points, labels, ids)


@dataclass(frozen=True)
class DistinctReport:
    satisfied: bool
    violations: list[tuple[int, float]] = field(default_factory=list)


def check_distinct_coordinates(s: SampleSet) -> DistinctReport:
    """Check that no coordinate value repeats within any dimension.

    Violations are reported as ``(dimension, value)`` pairs with 1-based
    dimensions, one entry per duplicated value.
    """
    violations: list[tuple[int, float]] = []
    for j in range(s.dim):
        values, counts = np.unique(s.points[:, j], return_counts=True)
        violations.extend((j + 1, float(v)) for v in values[counts > 1])
    return DistinctReport(not violations, violations)


def ball_counts(points: np.ndarray, radius: float, chunk: int = 1024) -> np.ndarray:
    """Number of points within Euclidean distance ``radius`` (closed ball, self included)."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    counts = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        diff = block[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        counts[start : start + chunk] = (dist <= radius).sum(axis=1)
    return counts


def distance_outliers(s: SampleSet, params: OutlierParams) -> np.ndarray:
    """Boolean anomaly mask: ``#(B(x, r) ∩ S) / #S <= p``."""
    counts = ball_counts(s.points, params.radius)
    return counts / s.size <= params.fraction


def make_benchmark_subset(
    s: SampleSet,
    inject_count: int,
    seed: int,
    keep_label: bool = False,
    keep_count: int | None = None,
) -> SampleSet:
    """Records labelled ``keep_label`` plus a random draw from the other class.

    ``keep_label=False`` keeps the normal records and injects
    ``inject_count`` anomalies chosen uniformly without replacement.
    ``keep_count`` optionally thins the kept class to that many records,
    also uniformly. Row order of the source is preserved.
    """
    if s.labels is None:
        raise DataError("benchmark subsets need labelled data")
    if inject_count < 0:
        raise DataError("inject_count must be non-negative")
    keep = np.flatnonzero(s.labels == keep_label)
    pool = np.flatnonzero(s.labels != keep_label)
    if inject_count > pool.size:
        raise DataError(
            f"cannot inject {inject_count} points, only {pool.size} available"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(pool, size=inject_count, replace=False)
    if keep_count is not None:
        if not 0 <= keep_count <= keep.size:
            raise DataError(f"keep_count must lie in 0..{keep.size}")
        keep = rng.choice(keep, size=keep_count, replace=False)
    return s.subset(np.sort(np.concatenate([keep, chosen])))


def bundled_path(name: str) -> Path:
    """Path of a CSV shipped with the package (see ``BUNDLED``)."""
    if name not in BUNDLED:
        raise DataError(f"unknown bundled file {name!r}; choose from {BUNDLED}")
    return Path(__file__).parent / "data" / name
