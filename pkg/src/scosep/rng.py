"""Counter-based pseudo-random streams.

Every variate is a pure function of (master seed, stream id, counter): there is
no mutable generator state.  Datasets, Monte-Carlo estimates and trials can
therefore be generated in any order, chunked across any number of workers, and
still reproduce bit-exactly.  The mixer is SplitMix64, evaluated as a hash of
the counter so arbitrary counter ranges can be drawn in bulk with numpy.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)

_TWO53_INV = float(2.0 ** -53)


def _mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    # uint64 wraparound is the point here
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _fold_token(key: np.uint64, token) -> np.uint64:
    """Fold one stream-id token (int or str) into a key."""
    if isinstance(token, str):
        h = _FNV_OFFSET
        with np.errstate(over="ignore"):
            for b in token.encode("utf-8"):
                h = (h ^ np.uint64(b)) * _FNV_PRIME
        t = h
    else:
        t = np.uint64(int(token) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return _mix64(key + _GAMMA + _mix64(t + _GAMMA))


class Stream:
    """A keyed, stateless stream addressed by 64-bit counters.

    ``Stream(seed, *ids)`` derives a key from the master seed and any mix of
    integer / string ids.  All draw methods take an explicit counter offset;
    counter ``c`` always yields the same word for the same key.
    """

    __slots__ = ("key",)

    def __init__(self, master_seed: int, *ids):
        with np.errstate(over="ignore"):
            key = _mix64(np.uint64(int(master_seed) & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        for token in ids:
            key = _fold_token(key, token)
        self.key = key

    def child(self, *ids) -> "Stream":
        s = Stream.__new__(Stream)
        key = self.key
        for token in ids:
            key = _fold_token(key, token)
        s.key = key
        return s

    def u64(self, start: int, count: int) -> np.ndarray:
        ctr = np.arange(start, start + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix64(self.key + ctr * _GAMMA)

    def u64_at(self, counters: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return _mix64(self.key + counters.astype(np.uint64) * _GAMMA)

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Uniform doubles in [0, 1), one counter each."""
        return (self.u64(start, count) >> np.uint64(11)).astype(np.float64) * _TWO53_INV

    def uniforms_at(self, counters: np.ndarray) -> np.ndarray:
        return (self.u64_at(counters) >> np.uint64(11)).astype(np.float64) * _TWO53_INV

    def bits(self, start: int, count: int, p: float) -> np.ndarray:
        """Bernoulli(p) variates as a bool array, one counter each."""
        return self.uniforms(start, count) < p

    def signs(self, start: int, count: int) -> np.ndarray:
        """Uniform +/-1 as int8, one counter each."""
        return np.where(self.u64(start, count) >> np.uint64(63), 1, -1).astype(np.int8)

    def integers(self, start: int, count: int, low: int, high: int) -> np.ndarray:
        """Uniform ints in [low, high), one counter each (tiny modulo bias,
        negligible for high - low << 2**64)."""
        span = np.uint64(high - low)
        return (self.u64(start, count) % span).astype(np.int64) + low

    def gaussians(self, start: int, count: int) -> np.ndarray:
        """Standard normals via Box-Muller, two counters each."""
        u1 = ((self.u64(start, count) >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO53_INV
        u2 = self.uniforms(start + count, count)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
