"""Directional isolation forests: random 1D trees on principal projections.

Each trial picks one principal direction and grows a 1D isolation tree on
the data projected onto it. A 1D isolation tree over distinct values
``v_0 < ... < v_m`` is a monotone random tree over the ``m`` gaps, so the
kernel samples it with the exponential race from :mod:`irf.monotone` in
O(m) after a one-off sort per direction. A value's depth is one more than
the deeper of its two neighbouring gaps; repeated projected values share a
leaf.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from irf.dataset import SampleSet
from irf.errors import ComputeError, DataError
from irf.forest import HeightEstimate, trials_from_confidence
from irf.monotone import race_tree
from irf.streams import key_for, next_uniform, stream_base

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Principal directions of a sample set.

    Attributes:
        mean: Column means, shape (d,).
        axes: Unit directions as rows, shape (d, d), by descending eigenvalue.
        eigenvalues: Covariance eigenvalues, descending, negatives clamped to 0.
        sweeps: Jacobi sweeps used.
    """

    mean: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray
    sweeps: int = 0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        """Reassembled covariance ``axesᵀ diag(λ) axes``."""
        return self.axes.T @ np.diag(self.eigenvalues) @ self.axes


def _off_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOLERANCE,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is at most ``tol``
    times the norm of the whole matrix. Returns ``(eigenvalues, vectors,
    sweeps)`` with eigenvectors as columns, unsorted.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    d = a.shape[0]
    v = np.eye(d)
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(d), v, 0
    sweeps = 0
    while _off_norm(a) > tol * scale:
        if sweeps == max_sweeps:
            raise ComputeError(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # below rounding of both diagonal entries: drop rather than rotate
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    return np.diag(a).copy(), v, sweeps


def pca_fit(s: SampleSet) -> PcaModel:
    """Principal directions of the mean-centred sample covariance (divisor n - 1)."""
    if s.size < 2:
        raise DataError("PCA needs at least two points")
    mean = s.points.mean(axis=0)
    centred = s.points - mean
    cov = centred.T @ centred / (s.size - 1)
    vals, vecs, sweeps = jacobi_eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    axes = vecs[:, order].T.copy()
    for k in range(axes.shape[0]):
        if axes[k, np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    for arr in (mean, axes, vals):
        arr.setflags(write=False)
    return PcaModel(mean, axes, vals, sweeps)


def project(s: SampleSet, model: PcaModel, components: Sequence[int] | None = None) -> np.ndarray:
    """Centred coordinates along the chosen 1-based components, shape (n, len(components))."""
    if s.dim != model.dim:
        raise DataError(f"model has {model.dim} dimensions, data has {s.dim}")
    comps = list(range(1, model.dim + 1)) if components is None else list(components)
    bad = [c for c in comps if not 1 <= c <= model.dim]
    if bad:
        raise DataError(f"component indices out of range 1..{model.dim}: {bad}")
    return (s.points - model.mean) @ model.axes[[c - 1 for c in comps]].T


@nb.njit(cache=True, parallel=True)
def _dirf_sums(gaps, starts, counts, inv, base, trial_ids, nblocks, stratified):
    ncomp, n = inv.shape
    K = trial_ids.shape[0]
    maxu = counts.max()
    sums = np.zeros((nblocks, n), dtype=np.int64)
    sqs = np.zeros((nblocks, n), dtype=np.int64)
    nodes = np.empty(K, dtype=np.int64)
    for b in nb.prange(nblocks):
        prio = np.empty(maxu)
        left = np.empty(maxu, dtype=np.int64)
        right = np.empty(maxu, dtype=np.int64)
        stack = np.empty(maxu, dtype=np.int64)
        depth = np.empty(maxu, dtype=np.int64)
        udep = np.empty(maxu, dtype=np.int64)
        state = np.empty(1, dtype=np.uint64)
        for t in range(b, K, nblocks):
            state[0] = key_for(base, trial_ids[t])
            u = next_uniform(state)
            if stratified:
                c = trial_ids[t] % ncomp
            else:
                c = min(int(u * ncomp), ncomp - 1)
            m = counts[c] - 1
            if m == 0:
                udep[0] = 0
            else:
                race_tree(gaps[starts[c]:starts[c] + m], m, state, prio, left, right, stack, depth)
                udep[0] = 1 + depth[0]
                udep[m] = 1 + depth[m - 1]
                for k in range(1, m):
                    udep[k] = 1 + max(depth[k - 1], depth[k])
            nodes[t] = m
            for i in range(n):
                h = udep[inv[c, i]]
                sums[b, i] += h
                sqs[b, i] += h * h
    return sums.sum(axis=0), sqs.sum(axis=0), nodes


def _prepare(projections: np.ndarray):
    P = np.asarray(projections, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[1] == 0:
        raise DataError("at least one component is required")
    if not np.all(np.isfinite(P)):
        raise DataError("projections must be finite")
    n, m = P.shape
    gaps, starts, counts = [], [], []
    inv = np.empty((m, n), dtype=np.int64)
    offset = 0
    for c in range(m):
        values, inverse = np.unique(P[:, c], return_inverse=True)
        inv[c] = inverse.ravel()
        starts.append(offset)
        counts.append(values.size)
        gaps.append(np.diff(values))
        offset += values.size - 1
    gap_arr = np.concatenate(gaps) if offset else np.zeros(1)
    return (np.ascontiguousarray(gap_arr), np.array(starts, dtype=np.int64),
            np.array(counts, dtype=np.int64), inv)


def dirf_from_projections(projections: np.ndarray, trials: int, seed: int,
                          stratified: bool = False, trial_ids=None, return_nodes: bool = False):
    """DIRF estimate from precomputed projections, one column per direction.

    Each trial's first uniform draw picks the column; with ``stratified``
    trial ``t`` uses column ``t mod d'`` instead (same limit, lower variance).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gaps, starts, counts, inv = _prepare(projections)
    ids = np.arange(trials, dtype=np.int64) if trial_ids is None else np.asarray(trial_ids, dtype=np.int64)
    if ids.size != trials:
        raise ValueError("trial_ids must hold exactly `trials` indices")
    nblocks = min(trials, 4 * nb.get_num_threads())
    sums, sqs, nodes = _dirf_sums(gaps, starts, counts, inv, np.uint64(stream_base(seed)),
                                  ids, nblocks, stratified)
    est = HeightEstimate.from_sums(sums, sqs, trials, seed, "dirf")
    return (est, nodes) if return_nodes else est


def dirf_estimate(s: SampleSet, components: Sequence[int] | None, trials: int, seed: int,
                  model: PcaModel | None = None, stratified: bool = False) -> HeightEstimate:
    """Mean 1D isolation depth over randomly chosen principal directions.

    ``components`` lists 1-based principal components (default: all).
    ``model`` reuses a fitted PCA instead of fitting one on ``s``.
    """
    if components is not None and len(components) == 0:
        raise DataError("component list is empty")
    model = pca_fit(s) if model is None else model
    return dirf_from_projections(project(s, model, components), trials, seed, stratified)


# complexity probe -------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    """One timed DIRF run: wall time covers PCA, projection and all trees."""

    n: int
    seconds: float
    trials: int
    min_nodes: int
    max_nodes: int


def _probe_trials(s: SampleSet) -> int:
    try:
        return trials_from_confidence(s, 90)
    except ComputeError:
        return 1


def dirf_complexity_probe(sizes: Sequence[int], seed: int = 0, dim: int = 4) -> list[ProbeRow]:
    """Time end-to-end DIRF on Gaussian data of each size.

    Trees per run follow the 90 % confidence rule; sizes too small for it
    run a single tree.
    """
    dirf_from_projections(np.arange(4.0), 2, 0)  # compile outside the timings
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        if n < 1:
            raise ValueError("sizes must be >= 1")
        s = SampleSet(rng.standard_normal((n, dim)))
        trials = _probe_trials(s)
        start = time.perf_counter()
        proj = project(s, pca_fit(s)) if n >= 2 else s.points - s.points
        _, nodes = dirf_from_projections(proj, trials, seed, return_nodes=True)
        elapsed = time.perf_counter() - start
        rows.append(ProbeRow(n, elapsed, trials, int(nodes.min()), int(nodes.max())))
    return rows


def fit_exponent(rows: Sequence[ProbeRow]) -> float:
    """Slope of log(time) against log(n log n) over rows with n >= 2."""
    pts = [(r.n * math.log(r.n), r.seconds) for r in rows if r.n >= 2]
    if len(pts) < 2:
        raise ComputeError("need at least two sizes >= 2 to fit an exponent")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])
