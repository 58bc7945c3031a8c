"""Replayable per-trial random streams.

Every Monte Carlo trial owns a stream keyed by ``(seed, trial)``. The stream
is a SplitMix64 sequence, chosen because it is counter-based: a trial's
state is a pure function of its key, so trials can run in any order, in any
worker, and any single trial can be replayed in isolation.

The same generator exists twice: as numba functions used inside the compiled
kernels, and as :class:`TrialStream` for the pure-Python reference builders.
Both produce identical bits for the same key.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_TRIAL_STRIDE = 0xD1B54A32D192ED03
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def stream_base(seed: int) -> int:
    """Mixed master seed; kernels derive trial keys from it."""
    return _mix_py(seed & _MASK)


def trial_key(seed: int, trial: int) -> int:
    """Initial 64-bit stream state for trial ``trial`` under master ``seed``."""
    return _mix_py((stream_base(seed) + (trial + 1) * _TRIAL_STRIDE) & _MASK)


class TrialStream:
    """Pure-Python twin of the kernel stream.

    Exposes ``random()`` so it can stand in wherever a
    :class:`numpy.random.Generator` is accepted.
    """

    def __init__(self, seed: int, trial: int = 0) -> None:
        self.state = trial_key(seed, trial)

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix_py(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53


# numba side -----------------------------------------------------------------

_U_GAMMA = np.uint64(_GAMMA)
_U_MUL1 = np.uint64(_MUL1)
_U_MUL2 = np.uint64(_MUL2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U_STRIDE = np.uint64(_TRIAL_STRIDE)
_U1 = np.uint64(1)


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _U30)) * _U_MUL1
    z = (z ^ (z >> _U27)) * _U_MUL2
    return z ^ (z >> _U31)


@nb.njit(cache=True, inline="always")
def key_for(base, trial):
    """Kernel twin of :func:`trial_key`; ``base`` comes from :func:`stream_base`."""
    return mix64(base + (np.uint64(trial) + _U1) * _U_STRIDE)


@nb.njit(cache=True, inline="always")
def next_u64(state):
    """Advance ``state[0]`` and return the next output word."""
    s = state[0] + _U_GAMMA
    state[0] = s
    return mix64(s)


@nb.njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform double on [0, 1) with 53 random bits."""
    return float(next_u64(state) >> _U11) * _INV_2_53
