"""Isolation random trees over a sample set.

Two builders live here. :func:`build_itree` is the readable reference: it
materialises every node and accepts any object with a ``random()`` method.
The numba kernels below grow the same trees without materialising them and
only report depths, node counts or tree signatures. Given the same
``(seed, trial)`` stream both visit nodes in the same order and draw the same
numbers, so their trees are bit-identical.

Growth rule, per node: Ω_C is the set of dimensions with at least two
distinct values. An empty Ω_C makes the node a leaf. Otherwise one uniform
draw picks ``j`` from Ω_C (ascending order), further draws pick the split
``p`` uniformly in the open interval ``(min, max)`` of dimension ``j``
(redrawn if rounding lands on an endpoint), and the node's members split into
``x_j < p`` (left) and ``x_j >= p`` (right). The left child is grown first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from irf.dataset import SampleSet
from irf.streams import key_for, next_uniform, stream_base


@dataclass(frozen=True)
class Node:
    """One vertex of an isolation tree.

    Leaves have ``dim is None``. ``dim`` is 0-based; ``left`` and ``right``
    are positions in :attr:`IsolationTree.nodes`.
    """

    members: tuple[int, ...]
    depth: int
    dim: int | None = None
    split: float | None = None
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.dim is None


@dataclass(frozen=True)
class IsolationTree:
    """A rooted binary tree; ``nodes[0]`` is the root holding every point."""

    nodes: tuple[Node, ...]
    n_points: int

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def internal_nodes(self) -> list[Node]:
        return [nd for nd in self.nodes if not nd.is_leaf]

    def leaves(self) -> list[Node]:
        return [nd for nd in self.nodes if nd.is_leaf]

    def height(self) -> int:
        return max(nd.depth for nd in self.nodes)


def split_candidates(points: np.ndarray) -> list[int]:
    """Ω_C: 0-based dimensions along which ``points`` take two or more values."""
    if points.shape[0] < 2:
        return []
    return [j for j in range(points.shape[1]) if points[:, j].min() < points[:, j].max()]


def _draw_split(rng, lo: float, hi: float) -> float:
    while True:
        p = lo + rng.random() * (hi - lo)
        if lo < p < hi:
            return p


def build_itree(s: SampleSet, rng) -> IsolationTree:
    """Grow one isolation tree over all points of ``s``.

    ``rng`` is anything with a ``random()`` method returning floats in
    [0, 1): a :class:`numpy.random.Generator` or a
    :class:`irf.streams.TrialStream`.
    """
    X = s.points
    nodes: list[dict] = [dict(members=np.arange(s.size), depth=0)]
    stack = [0]
    while stack:
        k = stack.pop()
        rec = nodes[k]
        members = rec["members"]
        omega = split_candidates(X[members])
        if not omega:
            continue
        j = omega[int(rng.random() * len(omega))]
        col = X[members, j]
        p = _draw_split(rng, col.min(), col.max())
        mask = col < p
        left, right = len(nodes), len(nodes) + 1
        nodes.append(dict(members=members[mask], depth=rec["depth"] + 1))
        nodes.append(dict(members=members[~mask], depth=rec["depth"] + 1))
        rec.update(dim=j, split=float(p), left=left, right=right)
        stack.append(right)
        stack.append(left)
    frozen = tuple(
        Node(
            members=tuple(int(i) for i in rec["members"]),
            depth=rec["depth"],
            dim=rec.get("dim"),
            split=rec.get("split"),
            left=rec.get("left"),
            right=rec.get("right"),
        )
        for rec in nodes
    )
    return IsolationTree(frozen, s.size)


def depths(t: IsolationTree) -> np.ndarray:
    """Depth (edges from the root) of the leaf holding each point."""
    out = np.full(t.n_points, -1, dtype=np.int64)
    for nd in t.leaves():
        out[list(nd.members)] = nd.depth
    return out


def dump_tree(t: IsolationTree) -> str:
    """Indented text rendering, one node per line, two spaces per level."""
    lines = []
    stack = [0]
    while stack:
        nd = t.nodes[stack.pop()]
        pad = "  " * nd.depth
        if nd.is_leaf:
            lines.append(f"{pad}leaf n={len(nd.members)}")
        else:
            lines.append(f"{pad}dim={nd.dim + 1} split={nd.split:.17g} n={len(nd.members)}")
            stack.extend((nd.right, nd.left))
    return "\n".join(lines)


# compiled kernels -----------------------------------------------------------


@nb.njit(cache=True)
def _grow(X, state, idx, depth, stk_lo, stk_hi, stk_dep, omega, mins, maxs,
          rec_dim, rec_mask, record):
    """Grow one tree in place; returns the number of internal nodes."""
    n, d = X.shape
    for i in range(n):
        idx[i] = i
    top = 0
    stk_lo[0] = 0
    stk_hi[0] = n
    stk_dep[0] = 0
    n_internal = 0
    while top >= 0:
        lo = stk_lo[top]
        hi = stk_hi[top]
        dep = stk_dep[top]
        top -= 1
        if hi - lo == 1:
            depth[idx[lo]] = dep
            continue
        cnt = 0
        for j in range(d):
            mn = X[idx[lo], j]
            mx = mn
            for t in range(lo + 1, hi):
                v = X[idx[t], j]
                if v < mn:
                    mn = v
                elif v > mx:
                    mx = v
            if mx > mn:
                omega[cnt] = j
                mins[cnt] = mn
                maxs[cnt] = mx
                cnt += 1
        if cnt == 0:
            for t in range(lo, hi):
                depth[idx[t]] = dep
            continue
        c = int(next_uniform(state) * cnt)
        j = omega[c]
        a = mins[c]
        b = maxs[c]
        while True:
            p = a + next_uniform(state) * (b - a)
            if a < p and p < b:
                break
        i = lo
        k = hi - 1
        while i <= k:
            if X[idx[i], j] < p:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[k]
                idx[k] = tmp
                k -= 1
        if record:
            m = 0
            for t in range(lo, i):
                m |= 1 << idx[t]
            rec_dim[n_internal] = j
            rec_mask[n_internal] = m
        n_internal += 1
        # right first so the left child is popped next
        top += 1
        stk_lo[top] = i
        stk_hi[top] = hi
        stk_dep[top] = dep + 1
        top += 1
        stk_lo[top] = lo
        stk_hi[top] = i
        stk_dep[top] = dep + 1
    return n_internal


@nb.njit(cache=True, parallel=True)
def _depth_sums(X, base, trial_ids, nblocks):
    n, d = X.shape
    K = trial_ids.shape[0]
    sums = np.zeros((nblocks, n), dtype=np.int64)
    sqs = np.zeros((nblocks, n), dtype=np.int64)
    nodes = np.zeros(K, dtype=np.int64)
    for b in nb.prange(nblocks):
        idx = np.empty(n, dtype=np.int64)
        depth = np.empty(n, dtype=np.int64)
        stk_lo = np.empty(n + 1, dtype=np.int64)
        stk_hi = np.empty(n + 1, dtype=np.int64)
        stk_dep = np.empty(n + 1, dtype=np.int64)
        omega = np.empty(d, dtype=np.int64)
        mins = np.empty(d)
        maxs = np.empty(d)
        rec_dim = np.empty(1, dtype=np.int64)
        rec_mask = np.empty(1, dtype=np.int64)
        state = np.empty(1, dtype=np.uint64)
        for t in range(b, K, nblocks):
            state[0] = key_for(base, trial_ids[t])
            nodes[t] = _grow(X, state, idx, depth, stk_lo, stk_hi, stk_dep,
                             omega, mins, maxs, rec_dim, rec_mask, False)
            for i in range(n):
                sums[b, i] += depth[i]
                sqs[b, i] += depth[i] * depth[i]
    return sums.sum(axis=0), sqs.sum(axis=0), nodes


@nb.njit(cache=True)
def _depth_matrix(X, base, trial_ids):
    n, d = X.shape
    K = trial_ids.shape[0]
    out = np.empty((K, n), dtype=np.int64)
    idx = np.empty(n, dtype=np.int64)
    depth = np.empty(n, dtype=np.int64)
    stk_lo = np.empty(n + 1, dtype=np.int64)
    stk_hi = np.empty(n + 1, dtype=np.int64)
    stk_dep = np.empty(n + 1, dtype=np.int64)
    omega = np.empty(d, dtype=np.int64)
    mins = np.empty(d)
    maxs = np.empty(d)
    rec_dim = np.empty(1, dtype=np.int64)
    rec_mask = np.empty(1, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    for t in range(K):
        state[0] = key_for(base, trial_ids[t])
        _grow(X, state, idx, depth, stk_lo, stk_hi, stk_dep, omega, mins, maxs,
              rec_dim, rec_mask, False)
        out[t, :] = depth
    return out


@nb.njit(cache=True)
def _signatures(X, base, trial_ids):
    n, d = X.shape
    K = trial_ids.shape[0]
    out = np.empty(K, dtype=np.int64)
    idx = np.empty(n, dtype=np.int64)
    depth = np.empty(n, dtype=np.int64)
    stk_lo = np.empty(n + 1, dtype=np.int64)
    stk_hi = np.empty(n + 1, dtype=np.int64)
    stk_dep = np.empty(n + 1, dtype=np.int64)
    omega = np.empty(d, dtype=np.int64)
    mins = np.empty(d)
    maxs = np.empty(d)
    rec_dim = np.empty(n, dtype=np.int64)
    rec_mask = np.empty(n, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    for t in range(K):
        state[0] = key_for(base, trial_ids[t])
        m = _grow(X, state, idx, depth, stk_lo, stk_hi, stk_dep, omega, mins, maxs,
                  rec_dim, rec_mask, True)
        sig = 0
        for k in range(m):
            sig = sig * 512 + rec_dim[k] * 128 + rec_mask[k]
        out[t] = sig
    return out


def _trial_ids(trials: int | None, trial_ids) -> np.ndarray:
    if trial_ids is None:
        if trials is None or trials < 1:
            raise ValueError("need trials >= 1 or explicit trial ids")
        return np.arange(trials, dtype=np.int64)
    ids = np.asarray(trial_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("trial ids must be a non-empty 1D sequence")
    return ids


def _as_points(points) -> np.ndarray:
    if isinstance(points, SampleSet):
        points = points.points
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def depth_sums(points, seed: int, trials: int | None = None, trial_ids=None,
               nblocks: int | None = None):
    """Per-point depth sums and sums of squares over a batch of trials.

    Returns ``(sums, squares, internal_node_counts)``; the first two are
    exact integers, so the result does not depend on how trials are spread
    over blocks or threads.
    """
    X = _as_points(points)
    ids = _trial_ids(trials, trial_ids)
    if nblocks is None:
        nblocks = min(ids.size, 4 * nb.get_num_threads())
    return _depth_sums(X, np.uint64(stream_base(seed)), ids, int(nblocks))


def depth_matrix(points, seed: int, trials: int | None = None, trial_ids=None) -> np.ndarray:
    """Depth of every point in every trial, shape (trials, n)."""
    X = _as_points(points)
    return _depth_matrix(X, np.uint64(stream_base(seed)), _trial_ids(trials, trial_ids))


def tree_signatures(points, seed: int, trials: int | None = None, trial_ids=None) -> np.ndarray:
    """Integer identity of each sampled tree (for at most 7 points, 4 dimensions).

    Internal nodes are visited in pre-order, each contributing
    ``dim * 128 + left_mask`` as a base-512 digit, where ``left_mask`` is the
    bit set of point indices sent left. See :func:`signature_of`.
    """
    X = _as_points(points)
    if X.shape[0] > 7 or X.shape[1] > 4:
        raise ValueError("signatures are limited to 7 points in at most 4 dimensions")
    return _signatures(X, np.uint64(stream_base(seed)), _trial_ids(trials, trial_ids))


def signature_of(preorder: list[tuple[int, frozenset[int] | set[int]]]) -> int:
    """Signature from ``(dim, left_members)`` pairs listed in pre-order."""
    sig = 0
    for dim, left in preorder:
        sig = sig * 512 + dim * 128 + sum(1 << i for i in left)
    return sig


def tree_signature(t: IsolationTree) -> int:
    """Signature of a materialised tree, comparable with :func:`tree_signatures`."""
    order = []
    stack = [0]
    while stack:
        nd = t.nodes[stack.pop()]
        if nd.is_leaf:
            continue
        order.append((nd.dim, frozenset(t.nodes[nd.left].members)))
        stack.extend((nd.right, nd.left))
    return signature_of(order)
