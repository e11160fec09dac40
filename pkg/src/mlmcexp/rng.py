"""Counter-based random streams (Philox4x32-10) keyed by (seed, level, sample, lane).

Every Monte Carlo sample owns its own stream, so results never depend on how
samples are spread over threads.  The stream state is a small ``uint64`` array
so the same code runs inside numba kernels and from Python:

    [key0, key1, ctr0, ctr1, ctr2, ctr3, out0, out1, out2, out3, pos]

``ctr0`` counts Philox blocks, ``ctr1`` packs level (low 16 bits) and lane,
``ctr2``/``ctr3`` hold the 64-bit sample index, and the key is the 64-bit seed.
Each block yields two 53-bit doubles.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from .errors import InvalidValueError

STATE_SIZE = 11


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 on 32-bit words held in uint64."""
    m = np.uint64(0xFFFFFFFF)
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * c0
        p1 = np.uint64(0xCD9E8D57) * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & m
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & m
        c0 = (hi1 ^ c1 ^ k0) & m
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & m
        c3 = lo0
        k0 = (k0 + np.uint64(0x9E3779B9)) & m
        k1 = (k1 + np.uint64(0xBB67AE85)) & m
    return c0, c1, c2, c3


@nb.njit(cache=True)
def init_state(state, seed, level, sample_index, lane):
    m = np.uint64(0xFFFFFFFF)
    s = np.uint64(seed)
    idx = np.uint64(sample_index)
    state[0] = s & m
    state[1] = s >> np.uint64(32)
    state[2] = np.uint64(0)
    state[3] = (np.uint64(level) & np.uint64(0xFFFF)) | ((np.uint64(lane) & np.uint64(0xFFFF)) << np.uint64(16))
    state[4] = idx & m
    state[5] = idx >> np.uint64(32)
    state[10] = np.uint64(4)


@nb.njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform double in [0, 1) with 53 random bits."""
    pos = state[10]
    if pos >= np.uint64(4):
        o0, o1, o2, o3 = philox4x32(state[2], state[3], state[4], state[5], state[0], state[1])
        state[6] = o0
        state[7] = o1
        state[8] = o2
        state[9] = o3
        state[2] = (state[2] + np.uint64(1)) & np.uint64(0xFFFFFFFF)
        pos = np.uint64(0)
    hi = state[6 + pos] >> np.uint64(5)
    lo = state[7 + pos] >> np.uint64(6)
    state[10] = pos + np.uint64(2)
    return (float(hi) * 67108864.0 + float(lo)) * 1.1102230246251565e-16


@nb.njit(cache=True, inline="always")
def next_exponential(state, rate):
    """Exponential time at ``rate`` via inverse CDF on 1 - U; +inf when rate == 0."""
    u = next_uniform(state)
    if rate <= 0.0:
        return np.inf
    return -math.log1p(-u) / rate


@nb.njit(cache=True)
def _fill_uniform(state, out):
    for k in range(out.shape[0]):
        out[k] = next_uniform(state)


@nb.njit(cache=True)
def _fill_exponential(state, rate, out):
    for k in range(out.shape[0]):
        out[k] = next_exponential(state, rate)


class RngStream:
    """A reproducible stream identified by ``(seed, level, sample_index, lane)``."""

    __slots__ = ("key", "state")

    def __init__(self, seed: int, level: int = 0, sample_index: int = 0, lane: int = 0):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        sample_index = int(sample_index) & 0xFFFFFFFFFFFFFFFF
        self.key = (seed, int(level), sample_index, int(lane))
        self.state = np.zeros(STATE_SIZE, dtype=np.uint64)
        init_state(self.state, np.uint64(seed), int(level), np.uint64(sample_index), int(lane))

    def uniform(self) -> float:
        return next_uniform(self.state)

    def exponential(self, rate: float) -> float:
        if rate < 0:
            raise InvalidValueError(f"exponential rate must be >= 0, got {rate}")
        return next_exponential(self.state, float(rate))

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(int(size))
        _fill_uniform(self.state, out)
        return out

    def exponentials(self, rate: float, size: int) -> np.ndarray:
        if rate < 0:
            raise InvalidValueError(f"exponential rate must be >= 0, got {rate}")
        out = np.empty(int(size))
        _fill_exponential(self.state, float(rate), out)
        return out

    def __repr__(self):
        seed, level, idx, lane = self.key
        return f"RngStream(seed={seed}, level={level}, sample_index={idx}, lane={lane})"


def stream_for(seed: int, level: int, sample_index: int, lane: int = 0) -> RngStream:
    return RngStream(seed, level, sample_index, lane)


def draw_uniform(stream: RngStream) -> float:
    return stream.uniform()


def draw_exponential(stream: RngStream, rate: float) -> float:
    return stream.exponential(rate)
