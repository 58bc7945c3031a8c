"""Experiment harness: quantile sweeps over component counts, and report output.

A run fits PCA once, then for every component count estimates mean depths
with the chosen method on the projected data and flags the lowest quantiles.
Percentages per cell:

    detected_pct = 100 |flagged ∩ labelled| / |labelled|
    false_positive_pct = 100 |flagged \\ labelled| / |flagged|

The false-positive share can instead be taken relative to all points
(``fp_normalization="total"``).
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from irf.dataset import CsvConfig, OutlierParams, SampleSet, distance_outliers, load_csv
from irf.dirf import PcaModel, dirf_from_projections, pca_fit, project
from irf.errors import ComputeError, DataError
from irf.forest import ThresholdCriterion, flag_anomalies, irf_estimate, trials_from_confidence

BREAST_CANCER_QUANTILES = (0.5, 1, 2, 3, 4, 5, 6, 7)
BREAST_CANCER_COMPONENTS = (1, 2, 4, 5, 7, 8, 11)
LYMPHOMA_COMPONENTS = (1, 3, 6, 9, 13)

FP_DEFINITIONS = {
    "flagged": "false_positive_pct = 100*|flagged - labelled|/|flagged|",
    "total": "false_positive_pct = 100*|flagged - labelled|/|S|",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines an experiment.

    Attributes:
        method: ``"irf"`` or ``"dirf"``.
        quantiles: Threshold quantiles in percent.
        components: Component counts (``sweep="count"``: row ``c`` uses
            principal components 1..c) or a component list whose prefixes
            form the rows (``sweep="prefix"``). None means all components.
        trials: Explicit number of trees; overrides ``confidence``.
        confidence: 90 or 95, used when ``trials`` is None.
        seed: Master seed; every row reuses it.
        outlier: Distance-rule parameters; when set, labels come from the
            rule instead of the label column.
        input: CSV path, needed only when no data set is handed over.
        csv: Column selection for ``input``.
        fp_normalization: ``"flagged"`` or ``"total"``.
    """

    method: str = "irf"
    quantiles: tuple[float, ...] = BREAST_CANCER_QUANTILES
    components: tuple[int, ...] | None = None
    trials: int | None = None
    confidence: int | None = 90
    seed: int = 0
    outlier: OutlierParams | None = None
    input: Path | None = None
    csv: CsvConfig = CsvConfig()
    sweep: str = "count"
    fp_normalization: str = "flagged"

    def __post_init__(self) -> None:
        if self.method not in ("irf", "dirf"):
            raise ValueError(f"method must be irf or dirf, got {self.method!r}")
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))
        if not self.quantiles:
            raise ValueError("at least one quantile is required")
        for q in self.quantiles:
            ThresholdCriterion(q)
        if self.components is not None:
            object.__setattr__(self, "components", tuple(int(c) for c in self.components))
            if not self.components or min(self.components) < 1:
                raise ValueError("components must be a non-empty list of positive integers")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.trials is None and self.confidence not in (90, 95):
            raise ValueError("give trials or a confidence level of 90 or 95")
        if self.sweep not in ("count", "prefix"):
            raise ValueError("sweep must be count or prefix")
        if self.fp_normalization not in FP_DEFINITIONS:
            raise ValueError("fp_normalization must be flagged or total")

    def with_method(self, method: str) -> RunConfig:
        return RunConfig(**{**self.__dict__, "method": method})


@dataclass(frozen=True)
class Cell:
    component: int
    quantile: float
    detected_pct: float
    false_positive_pct: float
    flagged_count: int


@dataclass(frozen=True)
class ExperimentReport:
    """All cells of one run, ordered by component then quantile."""

    method: str
    labeling: str
    seed: int
    trials: int
    n_points: int
    n_labelled: int
    quantiles: tuple[float, ...]
    components: tuple[int, ...]
    cells: tuple[Cell, ...]
    sweep: str = "count"
    fp_normalization: str = "flagged"
    notes: tuple[str, ...] = field(default=())

    def cell(self, component: int, quantile: float) -> Cell:
        for c in self.cells:
            if c.component == component and c.quantile == quantile:
                return c
        raise KeyError((component, quantile))

    def grid(self) -> tuple[tuple[int, ...], tuple[float, ...]]:
        return self.components, self.quantiles

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "labeling": self.labeling,
            "seed": self.seed,
            "trials": self.trials,
            "n_points": self.n_points,
            "n_labelled": self.n_labelled,
            "sweep": self.sweep,
            "false_positive_definition": FP_DEFINITIONS[self.fp_normalization],
            "quantiles": list(self.quantiles),
            "components": list(self.components),
            "notes": list(self.notes),
            "cells": [c.__dict__ for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table_csv(self) -> str:
        """Components as rows, ``A``/``F`` column pairs per quantile."""
        values = {(c.component, c.quantile): (c.detected_pct, c.false_positive_pct)
                  for c in self.cells}
        header = f"# {self.method} {self.labeling}; {FP_DEFINITIONS[self.fp_normalization]}"
        return _table_csv(header, self.components, self.quantiles, values)

    def to_long_csv(self) -> str:
        """Plot-ready rows: component, quantile, metric, value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "quantile", "metric", "value"])
        for c in self.cells:
            w.writerow([c.component, _fmt(c.quantile), "detected_pct", _fmt(c.detected_pct)])
            w.writerow([c.component, _fmt(c.quantile), "false_positive_pct",
                        _fmt(c.false_positive_pct)])
            w.writerow([c.component, _fmt(c.quantile), "flagged_count", c.flagged_count])
        return buf.getvalue()


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _table_csv(header: str, rows: Sequence[int], quantiles: Sequence[float],
               values: dict) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["components"]
    for q in quantiles:
        cols += [f"A_{_fmt(q)}", f"F_{_fmt(q)}"]
    w.writerow(cols)
    for c in rows:
        line = [c]
        for q in quantiles:
            a, f = values[(c, q)]
            line += [_fmt(round(a, 10)), _fmt(round(f, 10))]
        w.writerow(line)
    return buf.getvalue()


def score_cells(scores: np.ndarray, labels: np.ndarray, quantiles: Sequence[float],
                component: int, fp_normalization: str = "flagged") -> list[Cell]:
    """Detection and false-positive percentages of one score vector."""
    from irf.forest import HeightEstimate

    est = HeightEstimate(np.asarray(scores, dtype=np.float64), np.zeros(len(scores)), 1, 0)
    n_lab = int(labels.sum())
    cells = []
    for q in quantiles:
        flagged = flag_anomalies(est, ThresholdCriterion(q))
        hits = int(labels[flagged].sum())
        misses = flagged.size - hits
        detected = 100.0 * hits / n_lab if n_lab else 0.0
        denom = flagged.size if fp_normalization == "flagged" else len(scores)
        fp = 100.0 * misses / denom if denom else 0.0
        cells.append(Cell(component, float(q), detected, fp, int(flagged.size)))
    return cells


def resolve_labels(s: SampleSet, outlier: OutlierParams | None) -> tuple[np.ndarray, str]:
    """Ground-truth mask and its source: the label column or the distance rule."""
    if outlier is not None:
        return distance_outliers(s, outlier), "distance_based"
    if s.labels is None:
        raise DataError("no labels: give a label column or distance-rule parameters")
    return np.asarray(s.labels), "original"


def _row_components(cfg: RunConfig, d: int) -> list[tuple[int, list[int]]]:
    entries = cfg.components if cfg.components is not None else tuple(range(1, d + 1))
    if max(entries) > d:
        raise DataError(f"component {max(entries)} requested, data has {d} dimensions")
    if cfg.sweep == "count":
        return [(c, list(range(1, c + 1))) for c in entries]
    return [(c, list(entries[: k + 1])) for k, c in enumerate(entries)]


def run_experiment(cfg: RunConfig, data: SampleSet | None = None,
                   model: PcaModel | None = None) -> ExperimentReport:
    """Run one method over the configured component and quantile grid."""
    if data is None:
        if cfg.input is None:
            raise DataError("no input data")
        data = load_csv(cfg.input, cfg.csv)
    labels, labeling = resolve_labels(data, cfg.outlier)
    notes = []
    if not labels.any():
        msg = "no labelled anomalies; detected_pct is reported as 0"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    trials = cfg.trials if cfg.trials is not None else trials_from_confidence(data, cfg.confidence)
    model = pca_fit(data) if model is None else model
    rows = _row_components(cfg, data.dim)
    cells: list[Cell] = []
    for c, comps in rows:
        proj = project(data, model, comps)
        if cfg.method == "irf":
            est = irf_estimate(SampleSet(proj), trials, cfg.seed)
        else:
            est = dirf_from_projections(proj, trials, cfg.seed)
        cells += score_cells(est.mean_depth, labels, cfg.quantiles, c, cfg.fp_normalization)
    return ExperimentReport(
        method=cfg.method,
        labeling=labeling,
        seed=cfg.seed,
        trials=trials,
        n_points=data.size,
        n_labelled=int(labels.sum()),
        quantiles=cfg.quantiles,
        components=tuple(c for c, _ in rows),
        cells=tuple(cells),
        sweep=cfg.sweep,
        fp_normalization=cfg.fp_normalization,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class DiffTable:
    """Cellwise ``a - b`` of detected and false-positive percentages."""

    label: str
    components: tuple[int, ...]
    quantiles: tuple[float, ...]
    values: dict

    def to_csv(self) -> str:
        return _table_csv(f"# {self.label}", self.components, self.quantiles, self.values)

    def to_json(self) -> str:
        cells = [
            {"component": c, "quantile": q, "delta_detected_pct": self.values[(c, q)][0],
             "delta_false_positive_pct": self.values[(c, q)][1]}
            for c in self.components for q in self.quantiles
        ]
        doc = {"label": self.label, "components": list(self.components),
               "quantiles": list(self.quantiles), "cells": cells}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def diff_table(a: ExperimentReport, b: ExperimentReport) -> DiffTable:
    """Differences ``a - b`` laid out like the per-method tables."""
    if a.grid() != b.grid():
        raise ComputeError(f"grids differ: {a.grid()} vs {b.grid()}")
    values = {}
    for c in a.components:
        for q in a.quantiles:
            ca, cb = a.cell(c, q), b.cell(c, q)
            values[(c, q)] = (ca.detected_pct - cb.detected_pct,
                              ca.false_positive_pct - cb.false_positive_pct)
    label = f"{a.method} - {b.method} ({a.labeling}); {FP_DEFINITIONS[a.fp_normalization]}"
    return DiffTable(label, a.components, a.quantiles, values)


def compare(cfg: RunConfig, data: SampleSet | None = None
            ) -> tuple[ExperimentReport, ExperimentReport, DiffTable]:
    """IRF and DIRF on the same data, PCA model and seed, plus IRF − DIRF."""
    if data is None:
        if cfg.input is None:
            raise DataError("no input data")
        data = load_csv(cfg.input, cfg.csv)
    model = pca_fit(data)
    a = run_experiment(cfg.with_method("irf"), data, model)
    b = run_experiment(cfg.with_method("dirf"), data, model)
    return a, b, diff_table(a, b)
