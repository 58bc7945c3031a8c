"""The isolation random forest estimator and quantile thresholding."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from irf.dataset import SampleSet
from irf.errors import ComputeError
from irf.itree import depth_sums


@dataclass(frozen=True, eq=False)
class HeightEstimate:
    """Monte Carlo mean depth per point.

    Attributes:
        mean_depth: Average isolation depth of each point over the trials.
        sample_variance: Unbiased sample variance of the depths (0 when K = 1).
        trials: Number of trees K.
        seed: Master seed of the per-trial streams.
        method: ``"irf"`` or ``"dirf"``.
    """

    mean_depth: np.ndarray
    sample_variance: np.ndarray
    trials: int
    seed: int
    method: str = "irf"

    @property
    def size(self) -> int:
        return self.mean_depth.shape[0]

    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.sample_variance / self.trials)

    @classmethod
    def from_sums(cls, sums, squares, trials: int, seed: int, method: str) -> HeightEstimate:
        sums = np.asarray(sums, dtype=np.float64)
        squares = np.asarray(squares, dtype=np.float64)
        mean = sums / trials
        if trials > 1:
            var = np.maximum((squares - sums * mean) / (trials - 1), 0.0)
        else:
            var = np.zeros_like(mean)
        return cls(mean, var, trials, seed, method)

    def to_csv(self, ids: Sequence[str] | None = None) -> str:
        """CSV text with columns id, mean_depth, sample_variance."""
        ids = ids if ids is not None else [str(i) for i in range(self.size)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "mean_depth", "sample_variance"])
        for i, m, v in zip(ids, self.mean_depth, self.sample_variance):
            w.writerow([i, repr(float(m)), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class ThresholdCriterion:
    """Flag the lowest ``quantile`` percent of mean depths."""

    quantile: float

    def __post_init__(self) -> None:
        if not 0.0 < self.quantile < 100.0:
            raise ValueError(f"quantile must lie in (0, 100), got {self.quantile}")

    def count(self, n: int) -> int:
        """⌈q/100 · n⌉ computed on the decimal value of q, free of float rounding."""
        return math.ceil(Fraction(repr(float(self.quantile))) * n / 100)


def irf_estimate(s: SampleSet, trials: int, seed: int,
                 trial_order: Sequence[int] | None = None) -> HeightEstimate:
    """Mean isolation depth of every point over ``trials`` independent trees.

    Trial ``t`` draws from the stream keyed ``(seed, t)``. ``trial_order``
    may list the trial indices in any order (it must be a permutation of
    ``range(trials)``); the result is the same because depth sums are
    accumulated as exact integers.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if trial_order is None:
        ids = np.arange(trials, dtype=np.int64)
    else:
        ids = np.asarray(trial_order, dtype=np.int64)
        if ids.size != trials:
            raise ValueError("trial_order must hold exactly `trials` indices")
    sums, squares, _ = depth_sums(s.points, seed, trial_ids=ids)
    return HeightEstimate.from_sums(sums, squares, trials, seed, "irf")


def flag_anomalies(est: HeightEstimate, crit: ThresholdCriterion) -> np.ndarray:
    """Indices (ascending) of the ⌈q/100 · n⌉ smallest mean depths.

    Ties at the cut go to the lower point index.
    """
    order = np.argsort(est.mean_depth, kind="stable")
    k = min(crit.count(est.size), est.size)
    return np.sort(order[:k])


def trials_from_confidence(s: SampleSet, level: int) -> int:
    """Number of trees for a 90 or 95 % confidence target on ``s``.

    The variance comes from the logarithmic regression model evaluated at
    ``n = #S - 1`` intervals between the points; see
    :func:`irf.monotone.variance_regression`.
    """
    from irf.monotone import trials_for_confidence, variance_regression

    if s.size < 2:
        raise ComputeError("need at least two points to size the forest")
    try:
        sigma2 = variance_regression(s.size - 1)
    except ComputeError as exc:
        raise ComputeError(f"{exc}; pass an explicit number of trees instead") from None
    return trials_for_confidence(sigma2, level)
