"""Dense vectors, packed bit masks, and the few vector operations everything
else shares.  Vectors are plain float64 numpy arrays; all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

# Relative slack treating "on the sphere" as inside; keeps project_ball
# idempotent bit-exactly despite the rescale's final-ulp rounding.
_BALL_RTOL = 1e-14


def as_vector(entries) -> np.ndarray:
    v = np.asarray(entries, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def check_finite(v: np.ndarray, name: str = "vector") -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} contains non-finite entries")
    return v


class BitMask:
    """A {0,1}^d vector stored packed, 64 bits per word."""

    __slots__ = ("d", "words")

    def __init__(self, d: int, words: np.ndarray):
        self.d = int(d)
        self.words = words  # uint64, length ceil(d / 64)

    @classmethod
    def from_bools(cls, bits) -> "BitMask":
        b = np.asarray(bits, dtype=bool)
        if b.ndim != 1:
            raise DimensionError(f"expected a 1-D bit vector, got shape {b.shape}")
        return cls(b.size, pack_bits(b))

    def to_dense(self) -> np.ndarray:
        """Unpack to a float64 0/1 vector."""
        return unpack_bits(self.words, self.d).astype(np.float64)

    def to_bools(self) -> np.ndarray:
        return unpack_bits(self.words, self.d)

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.d:
            raise DimensionError(f"bit index {j} out of range for d={self.d}")
        return int((self.words[j >> 6] >> np.uint64(j & 63)) & np.uint64(1))

    def __len__(self) -> int:
        return self.d

    def count(self) -> int:
        return int(sum(int(w).bit_count() for w in self.words.tolist()))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMask)
            and self.d == other.d
            and np.array_equal(self.words, other.words)
        )

    def __repr__(self) -> str:
        return f"BitMask(d={self.d}, ones={self.count()})"


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a bool array into little-endian uint64 words."""
    by = np.packbits(bits, bitorder="little")
    pad = (-by.size) % 8
    if pad:
        by = np.concatenate([by, np.zeros(pad, dtype=np.uint8)])
    return by.view(np.uint64).copy()


def unpack_bits(words: np.ndarray, d: int) -> np.ndarray:
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:d].astype(bool)


@dataclass(frozen=True)
class BallSpec:
    """Euclidean ball given by center and radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ParameterError(f"ball radius must be >= 0, got {self.radius}")


def hadamard(w: np.ndarray, x) -> np.ndarray:
    """Entrywise product of a dense vector with a bit mask (or another vector)."""
    w = as_vector(w)
    xv = x.to_dense() if isinstance(x, BitMask) else as_vector(x)
    if w.shape != xv.shape:
        raise DimensionError(f"length mismatch: {w.shape[0]} vs {xv.shape[0]}")
    return w * xv


def norm(w) -> float:
    w = as_vector(w)
    return float(np.sqrt(np.dot(w, w)))


def norm_sq(w) -> float:
    w = as_vector(w)
    return float(np.dot(w, w))


def project_ball(w: np.ndarray, ball: BallSpec) -> np.ndarray:
    """Project w onto the ball; identity when already inside."""
    w = as_vector(w)
    c = as_vector(ball.center)
    if w.shape != c.shape:
        raise DimensionError(f"length mismatch: {w.shape[0]} vs {c.shape[0]}")
    if ball.radius < 0:
        raise ParameterError(f"ball radius must be >= 0, got {ball.radius}")
    diff = w - c
    dist = float(np.sqrt(np.dot(diff, diff)))
    if dist <= ball.radius * (1.0 + _BALL_RTOL):
        return w.copy()
    if ball.radius == 0.0:
        return c.copy()
    return c + (ball.radius / dist) * diff


def argmax_coord(v) -> int:
    """Smallest index attaining the maximum entry (0-based)."""
    v = as_vector(v)
    if v.size < 1:
        raise DimensionError("argmax of an empty vector")
    return int(np.argmax(v))
