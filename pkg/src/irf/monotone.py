"""Exact 1D analytics: monotone partitions and monotone random trees.

Intervals are numbered 1..N (``I_n = [x_{n-1}, x_n]``) and endpoints 0..N.
A monotone random tree picks its root interval with probability
proportional to length and recurses on the intervals to either side; the
1D isolation tree is the same process seen through its split gaps.

Sampling uses an equivalent exponential race: give interval ``k`` an
independent priority ``E_k ~ Exp(|I_k|)`` and take the Cartesian tree with
the smallest priority at each root. Within any block of consecutive
intervals the minimum sits at ``k`` with probability ``|I_k| / total``, and
memorylessness keeps the sub-blocks independent races.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from irf.errors import ComputeError
from irf.streams import key_for, next_uniform, stream_base

# Published maximum-variance values keyed by n = 3**j.
PUBLISHED_MAX_VARIANCE = {3: 0.25, 9: 1.32, 27: 3.22, 81: 5.32, 243: 7.48, 729: 9.67, 2187: 11.86}

REGRESSION_SLOPE = 1.99
REGRESSION_INTERCEPT = 2.38
REGRESSION_CORRELATION = 0.9967
REGRESSION_STD_ERROR = 0.076

Z_SCORES = {90: (1.645, 0.1), 95: (1.96, 0.05)}


@dataclass(frozen=True, eq=False)
class MonotonePartition:
    """Intervals between strictly increasing endpoints ``x_0 < ... < x_N``."""

    endpoints: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.endpoints, dtype=np.float64, copy=True).ravel()
        if x.size < 2:
            raise ValueError("a partition needs at least two endpoints")
        if not np.all(np.diff(x) > 0):
            raise ValueError("endpoints must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "endpoints", x)

    @classmethod
    def from_lengths(cls, lengths: Sequence[float], start: float = 0.0) -> MonotonePartition:
        return cls(np.concatenate([[start], start + np.cumsum(lengths)]))

    @classmethod
    def equidistant(cls, n: int) -> MonotonePartition:
        """``n`` equal intervals on [0, 1] with endpoints ``i / n``."""
        return cls(np.arange(n + 1) / n)

    @property
    def N(self) -> int:
        return self.endpoints.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.endpoints)

    @property
    def total(self) -> float:
        return float(self.lengths.sum())

    def length(self, i: int) -> float:
        self._check(i)
        return float(self.endpoints[i] - self.endpoints[i - 1])

    def _check(self, i: int) -> None:
        if not 1 <= i <= self.N:
            raise IndexError(f"interval index {i} outside 1..{self.N}")


@dataclass(frozen=True)
class MonotoneTree:
    """Binary tree over intervals 1..N; 0 in ``left``/``right`` means no child.

    ``left[k - 1]`` is the left child of interval ``k``; ``depths[k - 1]`` its depth.
    """

    root: int
    left: tuple[int, ...]
    right: tuple[int, ...]
    depths: tuple[int, ...]

    def inorder(self) -> list[int]:
        out, stack, v = [], [], self.root
        while stack or v:
            while v:
                stack.append(v)
                v = self.left[v - 1]
            v = stack.pop()
            out.append(v)
            v = self.right[v - 1]
        return out

    def height(self) -> int:
        return max(self.depths)


def build_mtree(p: MonotonePartition, rng) -> MonotoneTree:
    """Sample a monotone random tree by direct root choice.

    ``rng`` needs a ``random()`` method. Each block draws one uniform and
    takes the interval whose cumulative length first exceeds it.
    """
    N = p.N
    lengths = p.lengths
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    left = [0] * N
    right = [0] * N
    depth = [0] * N
    root = 0
    # (lo, hi) 1-based inclusive block, parent, side, depth
    stack = [(1, N, 0, 0, 0)]
    while stack:
        lo, hi, parent, side, dep = stack.pop()
        if lo > hi:
            continue
        target = cum[lo - 1] + rng.random() * (cum[hi] - cum[lo - 1])
        k = int(np.searchsorted(cum, target, side="right"))
        k = min(max(k, lo), hi)
        depth[k - 1] = dep
        if parent == 0:
            root = k
        elif side < 0:
            left[parent - 1] = k
        else:
            right[parent - 1] = k
        stack.append((k + 1, hi, k, 1, dep + 1))
        stack.append((lo, k - 1, k, -1, dep + 1))
    return MonotoneTree(root, tuple(left), tuple(right), tuple(depth))


def weight(p: MonotonePartition, i: int, k: int) -> float:
    """w(i, k): total length of intervals min(i,k)..max(i,k), both included."""
    p._check(i)
    p._check(k)
    a, b = min(i, k), max(i, k)
    return float(p.endpoints[b] - p.endpoints[a - 1])


def expected_indicator(p: MonotonePartition, i: int, k: int) -> float:
    """Probability that interval ``k`` is an ancestor of interval ``i``."""
    if i == k:
        raise ValueError("the ancestor indicator needs i != k")
    return p.length(k) / weight(p, i, k)


def _indicator_vector(p: MonotonePartition, i: int) -> np.ndarray:
    """E(X_{i,k}) for k = 1..N, with 0 at k = i."""
    p._check(i)
    x = p.endpoints
    k = np.arange(1, p.N + 1)
    lo = np.minimum(i, k)
    hi = np.maximum(i, k)
    e = p.lengths / (x[hi] - x[lo - 1])
    e[i - 1] = 0.0
    return e


def exact_expected_height(p: MonotonePartition, i: int) -> float:
    """E(h_i) = Σ_{k≠i} |I_k| / w(i, k)."""
    return float(_indicator_vector(p, i).sum())


def published_variance_formula(p: MonotonePartition, i: int) -> float:
    """The published closed form for Var(h_i), evaluated term by term.

    It factors every cross moment E(X_{i,k} X_{i,l}) as a product, which is
    exact for ancestors on the same side of ``i`` but not across it; compare
    with :func:`exact_variance`.
    """
    e = _indicator_vector(p, i)
    total = e.sum()
    cross = 0.0
    for k in range(p.N):
        if k == i - 1:
            continue
        cross += e[k] * (total - e[k])
    return float(total + cross - total**2)


def _joint_ancestor_matrix(p: MonotonePartition, i: int) -> np.ndarray:
    """P(X_{i,k} = 1 and X_{i,l} = 1) for all k, l (1-based shifted to 0-based)."""
    N = p.N
    L = p.lengths
    x = p.endpoints
    e = _indicator_vector(p, i)
    J = np.outer(e, e)
    c = L[i - 1]
    for k in range(1, i):
        # opposite sides: k < i < l.  a = |I_k|, wl = mass strictly between k and i
        a = L[k - 1]
        alpha = x[i - 1] - x[k - 1]  # a + wl
        for l in range(i + 1, N + 1):
            b = L[l - 1]
            beta = x[l] - x[i]  # b + wr
            tail = 1.0 - c / (c + alpha) - c / (c + beta) + c / (c + alpha + beta)
            J[k - 1, l - 1] = J[l - 1, k - 1] = (a / alpha) * (b / beta) * tail
    J[i - 1, :] = 0.0
    J[:, i - 1] = 0.0
    np.fill_diagonal(J, e)
    return J


def exact_variance(p: MonotonePartition, i: int) -> float:
    """Var(h_i) from exact pairwise ancestor probabilities, O(N²).

    Same-side indicators are independent under the exponential race. For
    ``k < i < l`` condition on the priority ``t`` of ``I_i``: the two sides
    are then independent, each succeeding with probability
    ``a/α (1 - e^{-α t})``, and averaging over ``t ~ Exp(|I_i|)`` gives the
    product term used below.
    """
    J = _joint_ancestor_matrix(p, i)
    mean = np.trace(J)
    return float(max(J.sum() - mean**2, 0.0))


def oracle_variance(p: MonotonePartition, i: int, limit: int = 8) -> float:
    """Var(h_i) from the full enumerated distribution of monotone trees."""
    from irf.oracle import enumerate_mrf, mtree_depths

    p._check(i)
    forest = enumerate_mrf(p, limit=limit)
    m1 = m2 = 0.0
    for tree, prob in forest.entries:
        h = mtree_depths(tree, p.N)[i - 1]
        m1 += prob * h
        m2 += prob * h * h
    return float(max(m2 - m1 * m1, 0.0))


def bound_b(p: MonotonePartition, i: int) -> float:
    """b(h_i) = log(total length / |I_i|), natural log."""
    return math.log(p.total / p.length(i))


@dataclass(frozen=True)
class SandwichBounds:
    lower: float
    upper_amgm: float
    upper_direct: float

    @property
    def upper(self) -> float:
        return min(self.upper_amgm, self.upper_direct)


def sandwich_bounds(p: MonotonePartition) -> SandwichBounds:
    """The three bounds on E(h_1) for a partition of [0, 1] with first gap d.

    ``1 - d <= E(h_1) <= min((N-1)(1 - d^{1/(N-1)}), (1 - d)/d)``.
    """
    x = p.endpoints
    if x[0] != 0.0 or x[-1] != 1.0:
        raise ValueError("sandwich bounds need endpoints normalised to [0, 1]")
    d = float(x[1])
    N = p.N
    if N == 1:
        return SandwichBounds(0.0, 0.0, 0.0)
    return SandwichBounds(
        lower=1.0 - d,
        upper_amgm=(N - 1) * (1.0 - d ** (1.0 / (N - 1))),
        upper_direct=(1.0 - d) / d,
    )


def variance_regression(n: int) -> float:
    """Fitted maximum variance ``1.99/log 3 · log n - 2.38`` (natural logs)."""
    if n < 1:
        raise ComputeError("n must be >= 1")
    value = REGRESSION_SLOPE / math.log(3.0) * math.log(n) - REGRESSION_INTERCEPT
    if value <= 0:
        raise ComputeError(
            f"regression variance is non-positive ({value:.4f}) at n={n}; "
            "the model is only valid for larger sets"
        )
    return value


def confidence_multiplier(level: int) -> float:
    """(z / half_width)² for the supported confidence levels."""
    try:
        z, half = Z_SCORES[int(level)]
    except KeyError:
        raise ValueError(f"confidence level must be 90 or 95, got {level}") from None
    return (z / half) ** 2


def trials_for_confidence(sigma2: float, level: int) -> int:
    """⌈(z/ε)² σ²⌉ Bernoulli trials for the requested confidence level."""
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    # round first so that e.g. 270.6025 * 6.67 does not pick up a spurious ulp
    return math.ceil(round(confidence_multiplier(level) * sigma2, 9))


def point_depth_relation(p: MonotonePartition, interval_depths: Sequence[int]) -> np.ndarray:
    """Endpoint depths of the 1D isolation tree from interval depths.

    Endpoint ``x_i`` is isolated once both neighbouring gaps have been cut,
    so its leaf sits one level below the deeper of the two:
    ``h(x_0) = 1 + h̃_1``, ``h(x_N) = 1 + h̃_N`` and
    ``h(x_i) = 1 + max(h̃_i, h̃_{i+1})`` in between.
    """
    h = np.asarray(interval_depths, dtype=np.int64)
    if h.shape != (p.N,):
        raise ValueError(f"expected {p.N} interval depths, got {h.shape}")
    return _point_depths(h)


def _point_depths(h: np.ndarray) -> np.ndarray:
    out = np.empty(h.size + 1, dtype=np.int64)
    out[0] = 1 + h[0]
    out[-1] = 1 + h[-1]
    out[1:-1] = 1 + np.maximum(h[:-1], h[1:])
    return out


# exponential-race sampler ---------------------------------------------------


@nb.njit(cache=True)
def race_tree(lengths, m, state, prio, left, right, stack, depth):
    """Interval depths of one race tree over ``lengths[:m]`` (all > 0)."""
    for k in range(m):
        prio[k] = -math.log1p(-next_uniform(state)) / lengths[k]
    top = -1
    for k in range(m):
        last = -1
        while top >= 0 and prio[stack[top]] > prio[k]:
            last = stack[top]
            top -= 1
        left[k] = last
        right[k] = -1
        if top >= 0:
            right[stack[top]] = k
        top += 1
        stack[top] = k
    root = stack[0]
    depth[root] = 0
    top = 0
    stack[0] = root
    while top >= 0:
        v = stack[top]
        top -= 1
        c = left[v]
        if c >= 0:
            depth[c] = depth[v] + 1
            top += 1
            stack[top] = c
        c = right[v]
        if c >= 0:
            depth[c] = depth[v] + 1
            top += 1
            stack[top] = c


@nb.njit(cache=True)
def _race_depth_matrix(lengths, base, trial_ids):
    m = lengths.shape[0]
    K = trial_ids.shape[0]
    out = np.empty((K, m), dtype=np.int64)
    prio = np.empty(m)
    left = np.empty(m, dtype=np.int64)
    right = np.empty(m, dtype=np.int64)
    stack = np.empty(m, dtype=np.int64)
    depth = np.empty(m, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    for t in range(K):
        state[0] = key_for(base, trial_ids[t])
        race_tree(lengths, m, state, prio, left, right, stack, depth)
        out[t, :] = depth
    return out


def sample_interval_depths(p: MonotonePartition, seed: int, trials: int) -> np.ndarray:
    """Interval depths of ``trials`` sampled monotone trees, shape (trials, N)."""
    ids = np.arange(trials, dtype=np.int64)
    return _race_depth_matrix(np.ascontiguousarray(p.lengths), np.uint64(stream_base(seed)), ids)


def sample_point_depths(p: MonotonePartition, seed: int, trials: int) -> np.ndarray:
    """Endpoint depths of ``trials`` sampled 1D isolation trees, shape (trials, N + 1)."""
    h = sample_interval_depths(p, seed, trials)
    out = np.empty((trials, p.N + 1), dtype=np.int64)
    out[:, 0] = 1 + h[:, 0]
    out[:, -1] = 1 + h[:, -1]
    out[:, 1:-1] = 1 + np.maximum(h[:, :-1], h[:, 1:])
    return out


# maximum variance of equidistant partitions ---------------------------------


@dataclass(frozen=True)
class MaxVariance:
    """Maximum variance over one family of depths on an equidistant set.

    ``index`` is the 1-based interval (or 0-based endpoint for
    ``definition="point"``) attaining the maximum. ``ci_halfwidth`` is the
    95 % normal half-width for Monte Carlo values and 0 for exact ones.
    """

    n: int
    definition: str
    method: str
    value: float
    index: int
    ci_halfwidth: float = 0.0


DEFINITIONS = ("interval", "formula", "middle", "point")


def _mc_variance(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    K = samples.shape[0]
    x = samples.astype(np.float64)
    centred = x - x.mean(axis=0)
    var = (centred**2).sum(axis=0) / (K - 1)
    m4 = (centred**4).mean(axis=0)
    # exact Var of the unbiased sample variance; stays positive when m4 == var^2
    se2 = (m4 - var**2) / K + 2.0 * var**2 / (K * (K - 1))
    half = 1.96 * np.sqrt(np.maximum(se2, 0.0))
    return var, half


def _enumerated_point_variances(N: int) -> np.ndarray:
    from irf.oracle import enumerate_mrf, mtree_depths

    p = MonotonePartition.equidistant(N)
    m1 = np.zeros(N + 1)
    m2 = np.zeros(N + 1)
    for tree, prob in enumerate_mrf(p).entries:
        h = _point_depths(np.asarray(mtree_depths(tree, N)))
        m1 += prob * h
        m2 += prob * h * h
    return np.maximum(m2 - m1 * m1, 0.0)


def max_variance_equidistant(
    n: int,
    definition: str = "interval",
    method: str = "auto",
    trials: int = 200_000,
    seed: int = 0,
    enumeration_limit: int = 8,
) -> MaxVariance:
    """Largest depth variance on the equidistant set of size ``n``.

    Definitions:
        ``interval``: max over i of Var(h_i) for ``n`` equal intervals.
        ``formula``: the same maximum using :func:`published_variance_formula`.
        ``middle``: Var(h_i) of the middle interval only.
        ``point``: max over the ``n`` points of the isolation-tree depth
            variance on ``n`` equidistant points (``n - 1`` gaps).

    ``method`` is ``exact``, ``mc`` or ``auto``. Exact values come from
    enumeration when the tree space is small enough and otherwise from
    :func:`exact_variance`; ``point`` has no closed form, so ``auto`` falls
    back to Monte Carlo above the enumeration limit.
    """
    if definition not in DEFINITIONS:
        raise ValueError(f"definition must be one of {DEFINITIONS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if method not in ("auto", "exact", "mc"):
        raise ValueError("method must be auto, exact or mc")

    if definition == "point":
        if n == 1:
            return MaxVariance(1, definition, "exact", 0.0, 0)
        N = n - 1
        if method == "exact" or (method == "auto" and N <= enumeration_limit):
            if N > enumeration_limit:
                raise ComputeError("exact point variances need n - 1 <= enumeration limit")
            var = _enumerated_point_variances(N)
            k = int(np.argmax(var))
            return MaxVariance(n, definition, "enumeration", float(var[k]), k)
        var, half = _mc_variance(sample_point_depths(MonotonePartition.equidistant(N), seed, trials))
        k = int(np.argmax(var))
        return MaxVariance(n, definition, "mc", float(var[k]), k, float(half[k]))

    p = MonotonePartition.equidistant(n)
    candidates = [(n + 1) // 2] if definition == "middle" else range(1, n + 1)
    if definition == "formula":
        vals = {i: published_variance_formula(p, i) for i in candidates}
        k = max(vals, key=lambda i: (vals[i], -i))
        return MaxVariance(n, definition, "formula", vals[k], k)
    if method == "mc":
        var, half = _mc_variance(sample_interval_depths(p, seed, trials))
        sub = {i: var[i - 1] for i in candidates}
        k = max(sub, key=lambda i: (sub[i], -i))
        return MaxVariance(n, definition, "mc", float(sub[k]), k, float(half[k - 1]))
    if n <= enumeration_limit:
        vals = {i: oracle_variance(p, i, limit=enumeration_limit) for i in candidates}
        used = "enumeration"
    else:
        vals = {i: exact_variance(p, i) for i in candidates}
        used = "closed-form"
    k = max(vals, key=lambda i: (vals[i], -i))
    return MaxVariance(n, definition, used, float(vals[k]), k)
