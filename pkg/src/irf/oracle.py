"""Ground truth by exhaustive enumeration, plus the 2D counterexample pair.

Enumerated isolation trees are nested tuples: a leaf is the 0-based point
index, an internal node is ``(dim, gap, left, right)`` with a 0-based
dimension and the 1-based index of the gap (between consecutive sorted
values of the node's members along ``dim``) holding the split. Monotone
trees are ``None`` (empty) or ``(k, left, right)`` with 1-based interval
``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from irf.dataset import SampleSet, check_distinct_coordinates
from irf.errors import ComputeError, DataError
from irf.itree import depth_sums, signature_of
from irf.monotone import MonotonePartition

PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EnumeratedForest:
    """Every tree of a finite tree space with its exact probability."""

    entries: tuple
    total_probability: float = field(init=False)
    count: int = field(init=False)

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if any(not prob > 0 for _, prob in entries):
            raise ComputeError("enumerated trees must have positive probability")
        total = math.fsum(prob for _, prob in entries)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ComputeError(f"enumerated probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "total_probability", total)
        object.__setattr__(self, "count", len(entries))


def catalan(k: int) -> int:
    if k < 0:
        raise ValueError("Catalan index must be non-negative")
    return math.comb(2 * k, k) // (k + 1)


def cardinality_formula(n_points: int, d: int) -> int:
    """Number of distinct isolation trees on ``n_points`` points in ``d`` dimensions.

    Equals ``C_{n-1} d^{n-1}``: every tree has ``n - 1`` internal nodes, each
    with a free dimension, over a binary shape counted by Catalan numbers.
    Python integers make the result exact at any size.
    """
    if n_points < 1 or d < 1:
        raise ValueError("n_points and d must be >= 1")
    return catalan(n_points - 1) * d ** (n_points - 1)


# isolation trees -------------------------------------------------------------


def enumerate_irf(s: SampleSet, max_points: int = 6, max_dim: int = 3) -> EnumeratedForest:
    """All isolation trees of ``s`` with their probabilities.

    A node with members ``M`` chooses a dimension uniformly from Ω_C and a
    gap with probability proportional to its length; both children are
    enumerated independently, so ``P(T)`` is the product down the tree.
    """
    if s.size > max_points or s.dim > max_dim:
        raise ComputeError(
            f"enumeration limited to {max_points} points in {max_dim} dimensions, "
            f"got {s.size} in {s.dim}"
        )
    report = check_distinct_coordinates(s)
    if not report.satisfied:
        raise DataError(f"coordinates repeat within a dimension: {report.violations}")
    X = s.points

    @lru_cache(maxsize=None)
    def trees(members: tuple[int, ...]) -> list:
        if len(members) == 1:
            return [(members[0], 1.0)]
        out = []
        dims = s.dim
        for j in range(dims):
            order = sorted(members, key=lambda i: X[i, j])
            vals = X[list(order), j]
            total = vals[-1] - vals[0]
            for g in range(1, len(order)):
                w = (vals[g] - vals[g - 1]) / total / dims
                left = trees(tuple(sorted(order[:g])))
                right = trees(tuple(sorted(order[g:])))
                for lt, pl in left:
                    for rt, pr in right:
                        out.append(((j, g, lt, rt), w * pl * pr))
        return out

    return EnumeratedForest(trees(tuple(range(s.size))))


def tree_members(tree) -> frozenset[int]:
    if isinstance(tree, int):
        return frozenset([tree])
    return tree_members(tree[2]) | tree_members(tree[3])


def irf_tree_depths(tree, n: int) -> np.ndarray:
    """Depth of each of the ``n`` points in an enumerated isolation tree."""
    out = np.zeros(n, dtype=np.int64)
    stack = [(tree, 0)]
    while stack:
        t, dep = stack.pop()
        if isinstance(t, int):
            out[t] = dep
        else:
            stack.append((t[3], dep + 1))
            stack.append((t[2], dep + 1))
    return out


def irf_tree_signature(tree) -> int:
    """Signature comparable with :func:`irf.itree.tree_signatures`."""
    order = []
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, int):
            continue
        order.append((t[0], tree_members(t[2])))
        stack.extend((t[3], t[2]))
    return signature_of(order)


def expected_depths(forest: EnumeratedForest, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and variance of every point's depth under ``forest``."""
    m1 = np.zeros(n)
    m2 = np.zeros(n)
    for tree, prob in forest.entries:
        h = irf_tree_depths(tree, n)
        m1 += prob * h
        m2 += prob * h * h
    return m1, np.maximum(m2 - m1 * m1, 0.0)


def exact_expected_depth(s: SampleSet, max_points: int = 16) -> np.ndarray:
    """E(h(x)) for every point, by recursion over reachable subsets.

    ``E_M(x) = 1 + Σ_{j∈Ω_C} 1/#Ω_C Σ_gaps (gap / range) E_{side(x)}(x)``.
    Subsets are memoised as bit masks; only axis-aligned boxes of ``s`` are
    ever reached, so this stays cheap well past the tree-enumeration limit.
    Repeated coordinates are allowed (Ω_C skips constant dimensions).
    """
    if s.size > max_points:
        raise ComputeError(f"exact recursion limited to {max_points} points")
    X = s.points
    n = s.size

    @lru_cache(maxsize=None)
    def solve(mask: int) -> tuple[float, ...]:
        members = [i for i in range(n) if mask >> i & 1]
        res = [0.0] * len(members)
        if len(members) < 2:
            return tuple(res)
        pos = {i: r for r, i in enumerate(members)}
        omega = [j for j in range(s.dim) if X[members, j].min() < X[members, j].max()]
        if not omega:
            return tuple(res)
        for j in omega:
            vals = sorted(set(X[members, j]))
            total = vals[-1] - vals[0]
            for g in range(1, len(vals)):
                w = (vals[g] - vals[g - 1]) / total / len(omega)
                cut = vals[g]
                left = sum(1 << i for i in members if X[i, j] < cut)
                right = mask & ~left
                for side in (left, right):
                    sub = solve(side)
                    sm = [i for i in members if side >> i & 1]
                    for r, i in enumerate(sm):
                        res[pos[i]] += w * (1.0 + sub[r])
        return tuple(res)

    return np.array(solve((1 << n) - 1))


# monotone trees --------------------------------------------------------------


def enumerate_mrf(p: MonotonePartition, limit: int = 8) -> EnumeratedForest:
    """All monotone random trees over ``p`` with their probabilities."""
    if p.N > limit:
        raise ComputeError(f"monotone enumeration limited to N <= {limit}, got {p.N}")
    L = p.lengths
    cum = np.concatenate([[0.0], np.cumsum(L)])

    @lru_cache(maxsize=None)
    def trees(lo: int, hi: int) -> list:
        if lo > hi:
            return [(None, 1.0)]
        total = cum[hi] - cum[lo - 1]
        out = []
        for k in range(lo, hi + 1):
            w = L[k - 1] / total
            for lt, pl in trees(lo, k - 1):
                for rt, pr in trees(k + 1, hi):
                    out.append(((k, lt, rt), w * pl * pr))
        return out

    return EnumeratedForest(trees(1, p.N))


def mtree_depths(tree, N: int) -> list[int]:
    """Depth of intervals 1..N (returned 0-based) in an enumerated monotone tree."""
    out = [0] * N
    stack = [(tree, 0)]
    while stack:
        t, dep = stack.pop()
        if t is None:
            continue
        out[t[0] - 1] = dep
        stack.append((t[1], dep + 1))
        stack.append((t[2], dep + 1))
    return out


def mrf_depth_distribution(p: MonotonePartition, i: int) -> dict[int, float]:
    """Exact law of the depth of interval ``i``: {depth: probability}."""
    p._check(i)
    dist: dict[int, float] = {}
    for tree, prob in enumerate_mrf(p).entries:
        h = mtree_depths(tree, p.N)[i - 1]
        dist[h] = dist.get(h, 0.0) + prob
    return dict(sorted(dist.items()))


# counterexample --------------------------------------------------------------


def closed_form_e1(p: Sequence[float], q: Sequence[float]) -> float:
    """Printed expectation of the origin's depth in the monotone configuration."""
    total = 1.0
    for i in range(len(p) - 1):
        total += 0.5 * (q[i + 1] - q[i]) / q[i + 1] + 0.5 * (p[i + 1] - p[i]) / p[i + 1]
    return total


def closed_form_e2(p: Sequence[float], q: Sequence[float]) -> float:
    """Printed expectation of the origin's depth after the transposition."""
    pp = [0.0, *p]
    qq = [0.0, *q]
    total = 1.0
    for i in range(1, len(p)):
        total += 0.5 * (qq[i] - qq[i - 1]) / qq[i] + 0.5 * (pp[i] - pp[i - 1]) / pp[i]
    return total


@dataclass(frozen=True, eq=False)
class CounterexamplePair:
    """A monotone 2D configuration and its transposed twin.

    ``s1`` holds the origin and ``(p_i, q_i)``; ``s2`` swaps the second
    coordinates of the first two points. The origin is row 0 of both.
    """

    s1: SampleSet
    s2: SampleSet
    grid: tuple[tuple[float, ...], tuple[float, ...]]
    closed_form_e1: float
    closed_form_e2: float
    d1: float
    d2: float


def build_counterexample(p: Sequence[float], q: Sequence[float],
                         transpose: bool = True) -> CounterexamplePair:
    """Construct the pair from strictly increasing positive ``p`` and ``q``.

    ``transpose=False`` makes ``s2`` a copy of ``s1`` (a control).
    """
    p = [float(v) for v in p]
    q = [float(v) for v in q]
    if len(p) != len(q):
        raise DataError("p and q must have the same length")
    if len(p) < 3:
        raise DataError("the construction needs N >= 3")
    for name, seq in (("p", p), ("q", q)):
        if seq[0] <= 0 or any(b <= a for a, b in zip(seq, seq[1:])):
            raise DataError(f"{name} must be positive and strictly increasing")
    pts1 = np.array([[0.0, 0.0]] + [[a, b] for a, b in zip(p, q)])
    pts2 = pts1.copy()
    if transpose:
        pts2[1] = (p[0], q[1])
        pts2[2] = (p[1], q[0])
    d1 = math.hypot(p[0], q[0])
    d2 = min(math.hypot(p[0], q[1]), math.hypot(p[1], q[0])) if transpose else d1
    e2 = closed_form_e2(p, q) if transpose else closed_form_e1(p, q)
    return CounterexamplePair(
        s1=SampleSet(pts1),
        s2=SampleSet(pts2),
        grid=(tuple([0.0, *p]), tuple([0.0, *q])),
        closed_form_e1=closed_form_e1(p, q),
        closed_form_e2=e2,
        d1=d1,
        d2=d2,
    )


@dataclass(frozen=True)
class CounterexampleReport:
    """Monte Carlo depth of the origin in both sets next to the closed forms.

    ``ci1``/``ci2`` are 95 % normal-approximation intervals. ``exact_e1``
    and ``exact_e2`` come from :func:`exact_expected_depth` when the sets
    are small enough, else None.
    """

    mc_e1: float
    mc_e2: float
    ci1: tuple[float, float]
    ci2: tuple[float, float]
    se1: float
    se2: float
    d1: float
    d2: float
    closed_form_e1: float
    closed_form_e2: float
    trials: int
    seed: int
    exact_e1: float | None = None
    exact_e2: float | None = None

    @property
    def distance_ratio(self) -> float:
        return self.d2 / self.d1

    @property
    def relative_gap(self) -> float:
        return abs(self.mc_e1 - self.mc_e2) / max(self.mc_e1, self.mc_e2)


def _origin_stats(s: SampleSet, trials: int, seed: int, offset: int) -> tuple[float, float]:
    ids = np.arange(offset, offset + trials, dtype=np.int64)
    sums, squares, _ = depth_sums(s.points, seed, trial_ids=ids)
    mean = sums[0] / trials
    var = (squares[0] - sums[0] * mean) / (trials - 1) if trials > 1 else 0.0
    return float(mean), math.sqrt(max(var, 0.0) / trials)


def counterexample_mc_check(pair: CounterexamplePair, trials: int, seed: int,
                            exact_limit: int = 16) -> CounterexampleReport:
    """Estimate E(h) of the origin in both sets with full 2D isolation trees.

    The two sets use disjoint trial streams, so the estimates are independent.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m1, se1 = _origin_stats(pair.s1, trials, seed, 0)
    m2, se2 = _origin_stats(pair.s2, trials, seed, trials)
    exact1 = exact2 = None
    if pair.s1.size <= exact_limit:
        exact1 = float(exact_expected_depth(pair.s1, exact_limit)[0])
        exact2 = float(exact_expected_depth(pair.s2, exact_limit)[0])
    return CounterexampleReport(
        mc_e1=m1,
        mc_e2=m2,
        ci1=(m1 - 1.96 * se1, m1 + 1.96 * se1),
        ci2=(m2 - 1.96 * se2, m2 + 1.96 * se2),
        se1=se1,
        se2=se2,
        d1=pair.d1,
        d2=pair.d2,
        closed_form_e1=pair.closed_form_e1,
        closed_form_e2=pair.closed_form_e2,
        trials=trials,
        seed=seed,
        exact_e1=exact1,
        exact_e2=exact2,
    )
