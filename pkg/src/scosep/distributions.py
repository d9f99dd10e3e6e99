"""Seeded samplers for every data distribution and dataset assembly.

Samples are pure functions of (seed, sample index): each sample owns a fixed
counter window inside a keyed stream, so ``make_dataset(spec, 8, s)`` extends
``make_dataset(spec, 4, s)`` bit-exactly (prefix property) and trials can be
generated on any worker layout.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigurationError, ParameterError
from .rng import Stream
from .vecspace import BitMask

_MAGIC = b"SCOSEP01"

# Desk-scale memory guard for anchor dimensions d ~ 2^n.
_D_FOR_MAX_N = 24


def d_for(n: int) -> int:
    """Ambient dimension that makes a spurious coordinate likely at sample
    size n: round(ln(10) * 2^n) + 1."""
    if n > _D_FOR_MAX_N:
        need = math.log(10.0) * 2.0**n / 8e9
        raise CapacityError(
            f"n={n} needs d ~ {math.log(10.0) * 2.0 ** n:.3g} "
            f"(~{need:.1f} GB per 1000 dense vectors); limit is n <= {_D_FOR_MAX_N}"
        )
    v = math.log(10.0) * 2.0**n
    return int(math.floor(v + 0.5)) + 1


def grid_H(n: int):
    """Kink-location grid: {1/4 + i/(8 n^(5/4)) : i = 1..ceil(4 n^(5/4))}."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    N = float(n) ** 1.25
    count = math.ceil(4.0 * N)
    return 0.25 + np.arange(1, count + 1, dtype=np.float64) / (8.0 * N)


# ---------------------------------------------------------------------------
# sample records


@dataclass(frozen=True)
class SampleA:
    x: BitMask
    y: int          # +1 / -1
    alpha: int      # 0 = zero vector, j >= 1 = e_j


@dataclass(frozen=True)
class SampleB:
    x: BitMask
    alpha: int


@dataclass(frozen=True)
class SampleKink:
    beta: float
    y: int


@dataclass(frozen=True)
class SampleDrift:
    z: int


@dataclass(frozen=True)
class SampleC:
    blocks: tuple   # k SampleA records sharing d and alpha


@dataclass(frozen=True)
class SampleNN:
    x: BitMask
    y: int          # 0 / 1


# ---------------------------------------------------------------------------
# distribution specs


@dataclass(frozen=True)
class DistSpec:
    """Distribution identifier plus parameters; unused fields stay at their
    defaults for a given kind."""

    kind: str            # D, DBAR, D2, KINK, DRIFT, C, NN
    d: int = 0
    n_param: int = 0     # kink grid parameter
    k: int = 1
    delta: float = 0.0
    p: float = 0.0
    c_n: float = 0.0
    alpha: int = 0       # anchor encoding {0, 1..d}
    j_tilde: int = -1    # 0-based pinned-zero coordinate (D2)


def spec_D(delta: float, p: float, a: int, d: int) -> DistSpec:
    if not 0.0 <= delta <= 0.5:
        raise ParameterError(f"delta must be in [0, 1/2], got {delta}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must be in [0, 1], got {p}")
    if not 0 <= a <= d:
        raise ParameterError(f"anchor {a} outside {{0..{d}}}")
    return DistSpec("D", d=d, delta=delta, p=p, alpha=a)


def spec_Dbar(delta: float, c_n: float, v: int, d: int) -> DistSpec:
    if not 0.0 <= c_n + delta <= 1.0:
        raise ParameterError(f"c_n + delta must be in [0, 1], got {c_n + delta}")
    if not 0 <= v <= d:
        raise ParameterError(f"anchor {v} outside {{0..{d}}}")
    return DistSpec("DBAR", d=d, delta=delta, c_n=c_n, alpha=v)


def spec_D2(j_tilde: int, d: int) -> DistSpec:
    if not 0 <= j_tilde < d:
        raise ParameterError(f"j_tilde {j_tilde} outside [0, {d})")
    return DistSpec("D2", d=d, j_tilde=j_tilde)


def spec_kink(n: int) -> DistSpec:
    return DistSpec("KINK", n_param=n)


def spec_drift() -> DistSpec:
    return DistSpec("DRIFT")


def spec_C(k: int, d: int, jstar: int) -> DistSpec:
    if not 1 <= jstar <= d:
        raise ParameterError(f"planted anchor {jstar} outside {{1..{d}}}")
    return DistSpec("C", d=d, k=k, delta=0.1, p=0.5, alpha=jstar)


def spec_NN(d: int) -> DistSpec:
    return DistSpec("NN", d=d)


def _budget(spec: DistSpec) -> int:
    """Counters reserved per sample (fixed, so sample i never depends on n)."""
    if spec.kind in ("D", "DBAR", "D2", "NN"):
        return spec.d + 2
    if spec.kind == "KINK":
        return 2
    if spec.kind == "DRIFT":
        return 1
    if spec.kind == "C":
        return spec.k * (spec.d + 2)
    raise ParameterError(f"unknown distribution kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# per-sample draws (single source of truth for the layout inside a window)


def _draw_mask_y(stream: Stream, base: int, d: int, p: float):
    bits = stream.bits(base, d, p)
    u_y = stream.uniforms(base + d, 1)[0]
    return bits, u_y


def sample_D(delta: float, p: float, a: int, d: int, stream: Stream, base: int = 0) -> SampleA:
    spec_D(delta, p, a, d)  # validate
    bits, u_y = _draw_mask_y(stream, base, d, p)
    y = 1 if u_y < 0.5 + delta else -1
    return SampleA(BitMask.from_bools(bits), y, a)


def sample_Dbar(delta: float, c_n: float, v: int, d: int, stream: Stream, base: int = 0) -> SampleB:
    spec_Dbar(delta, c_n, v, d)
    bits, _ = _draw_mask_y(stream, base, d, c_n + delta)
    return SampleB(BitMask.from_bools(bits), v)


def sample_D2(j_tilde: int, d: int, stream: Stream, base: int = 0) -> SampleB:
    spec_D2(j_tilde, d)
    bits, _ = _draw_mask_y(stream, base, d, 0.5)
    bits[j_tilde] = False
    return SampleB(BitMask.from_bools(bits), 0)


def sample_kink(n: int, stream: Stream, base: int = 0) -> SampleKink:
    N = float(n) ** 1.25
    m = math.ceil(4.0 * N)
    idx = int(stream.integers(base, 1, 1, m + 1)[0])
    y = int(stream.signs(base + 1, 1)[0])
    return SampleKink(0.25 + idx / (8.0 * N), y)


def sample_drift(stream: Stream, base: int = 0) -> SampleDrift:
    return SampleDrift(int(stream.signs(base, 1)[0]))


def sample_C(k: int, d: int, jstar: int, stream: Stream, base: int = 0) -> SampleC:
    blocks = []
    for s in range(k):
        blocks.append(sample_D(0.1, 0.5, jstar, d, stream, base + s * (d + 2)))
    return SampleC(tuple(blocks))


def sample_NN(d: int, stream: Stream, base: int = 0) -> SampleNN:
    bits, u_y = _draw_mask_y(stream, base, d, 0.5)
    return SampleNN(BitMask.from_bools(bits), 1 if u_y < 0.25 else 0)


# ---------------------------------------------------------------------------
# datasets


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, d) bool matrix into (n, ceil(d/64)) uint64 rows."""
    by = np.packbits(bits, axis=1, bitorder="little")
    pad = (-by.shape[1]) % 8
    if pad:
        by = np.concatenate([by, np.zeros((by.shape[0], pad), dtype=np.uint8)], axis=1)
    return by.view(np.uint64)


def _unpack_rows(words: np.ndarray, d: int) -> np.ndarray:
    flat = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :d]
    return flat.astype(np.float64)


class Dataset:
    """Seeded, ordered sample collection with columnar storage.

    Regenerating from (spec, n, seed) reproduces the arrays bit-exactly.
    ``cache`` holds derived structures (dense unpacks, sorted views); it is
    never serialized.
    """

    def __init__(self, spec: DistSpec, n: int, seed: int, arrays: dict, stream_ids=()):
        self.spec = spec
        self.n = n
        self.seed = seed
        self.stream_ids = tuple(stream_ids)
        self.arrays = arrays
        self.cache = {}
        for name, value in arrays.items():
            setattr(self, name, value)

    def __len__(self) -> int:
        return self.n

    @property
    def alpha(self) -> int:
        return self.spec.alpha

    def dense_x(self) -> np.ndarray:
        if "dense_x" not in self.cache:
            if self.spec.kind == "C":
                n, k = self.n, self.spec.k
                flat = _unpack_rows(self.X.reshape(n * k, -1), self.spec.d)
                self.cache["dense_x"] = flat.reshape(n, k, self.spec.d)
            else:
                self.cache["dense_x"] = _unpack_rows(self.X, self.spec.d)
        return self.cache["dense_x"]

    def __getitem__(self, i: int):
        if not 0 <= i < self.n:
            raise IndexError(i)
        kind = self.spec.kind
        if kind == "D":
            return SampleA(BitMask(self.spec.d, self.X[i]), int(self.y[i]), self.spec.alpha)
        if kind in ("DBAR", "D2"):
            return SampleB(BitMask(self.spec.d, self.X[i]), self.spec.alpha)
        if kind == "KINK":
            return SampleKink(float(self.beta[i]), int(self.y[i]))
        if kind == "DRIFT":
            return SampleDrift(int(self.z[i]))
        if kind == "C":
            blocks = tuple(
                SampleA(BitMask(self.spec.d, self.X[i, s]), int(self.y[i, s]), self.spec.alpha)
                for s in range(self.spec.k)
            )
            return SampleC(blocks)
        if kind == "NN":
            return SampleNN(BitMask(self.spec.d, self.X[i]), int(self.y[i]))
        raise ParameterError(f"unknown dataset kind {kind!r}")

    @property
    def samples(self) -> list:
        return [self[i] for i in range(self.n)]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.spec == other.spec
            and self.n == other.n
            and self.seed == other.seed
            and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays)
        )


def dataset_stream(seed: int, *extra_ids) -> Stream:
    return Stream(seed, "dataset", *extra_ids)


def make_dataset(spec: DistSpec, n: int, seed: int, stream_ids=()) -> Dataset:
    """Draw n i.i.d. samples; sample i is a pure function of (seed, i)."""
    stream = dataset_stream(seed, *stream_ids)
    B = _budget(spec)
    base = np.arange(n, dtype=np.int64) * B

    def mask_block(offset_base, p):
        ctr = (offset_base[:, None] + np.arange(spec.d, dtype=np.int64)[None, :]).astype(np.uint64)
        return stream.uniforms_at(ctr.ravel()).reshape(n, spec.d) < p

    kind = spec.kind
    if kind == "D":
        bits = mask_block(base, spec.p)
        u_y = stream.uniforms_at((base + spec.d).astype(np.uint64))
        y = np.where(u_y < 0.5 + spec.delta, 1, -1).astype(np.int8)
        arrays = {"X": _pack_rows(bits), "y": y}
    elif kind == "DBAR":
        bits = mask_block(base, spec.c_n + spec.delta)
        arrays = {"X": _pack_rows(bits)}
    elif kind == "D2":
        bits = mask_block(base, 0.5)
        bits[:, spec.j_tilde] = False
        arrays = {"X": _pack_rows(bits)}
    elif kind == "KINK":
        N = float(spec.n_param) ** 1.25
        m = math.ceil(4.0 * N)
        idx = stream.u64_at((2 * np.arange(n, dtype=np.int64)).astype(np.uint64)) % np.uint64(m)
        beta = 0.25 + (idx.astype(np.float64) + 1.0) / (8.0 * N)
        u_y = stream.u64_at((2 * np.arange(n, dtype=np.int64) + 1).astype(np.uint64))
        y = np.where(u_y >> np.uint64(63), 1, -1).astype(np.int8)
        arrays = {"beta": beta, "y": y}
    elif kind == "DRIFT":
        z = np.where(stream.u64(0, n) >> np.uint64(63), 1, -1).astype(np.int8)
        arrays = {"z": z}
    elif kind == "C":
        words = None
        ys = np.empty((n, spec.k), dtype=np.int8)
        for s in range(spec.k):
            off = base + s * (spec.d + 2)
            bits = mask_block(off, spec.p)
            packed = _pack_rows(bits)
            if words is None:
                words = np.empty((n, spec.k, packed.shape[1]), dtype=np.uint64)
            words[:, s, :] = packed
            u_y = stream.uniforms_at((off + spec.d).astype(np.uint64))
            ys[:, s] = np.where(u_y < 0.5 + spec.delta, 1, -1)
        arrays = {"X": words, "y": ys}
    elif kind == "NN":
        bits = mask_block(base, 0.5)
        u_y = stream.uniforms_at((base + spec.d).astype(np.uint64))
        arrays = {"X": _pack_rows(bits), "y": (u_y < 0.25).astype(np.int8)}
    else:
        raise ParameterError(f"unknown distribution kind {kind!r}")

    return Dataset(spec, n, seed, arrays, stream_ids)


class CompositeDataset:
    """Parallel datasets for a direct-sum loss; sample i is the tuple of the
    component samples."""

    def __init__(self, parts):
        ns = {len(p) for p in parts}
        if len(ns) != 1:
            raise ConfigurationError("component datasets must share the sample count")
        self.parts = tuple(parts)
        self.n = ns.pop()

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int):
        return tuple(p[i] for p in self.parts)


def make_composite_dataset(specs, n: int, seed: int) -> CompositeDataset:
    return CompositeDataset(
        [make_dataset(spec, n, seed, stream_ids=("comp", idx)) for idx, spec in enumerate(specs)]
    )


# ---------------------------------------------------------------------------
# binary serialization (regression fixtures)

_ARRAY_ORDER = {
    "D": ("X", "y"),
    "DBAR": ("X",),
    "D2": ("X",),
    "KINK": ("beta", "y"),
    "DRIFT": ("z",),
    "C": ("X", "y"),
    "NN": ("X", "y"),
}

_DTYPES = {"X": "<u8", "y": "<i1", "z": "<i1", "beta": "<f8"}


def save_dataset(ds: Dataset, path) -> None:
    header = {
        "kind": ds.spec.kind,
        "n": ds.n,
        "seed": ds.seed,
        "stream_ids": list(ds.stream_ids),
        "spec": {
            "d": ds.spec.d,
            "n_param": ds.spec.n_param,
            "k": ds.spec.k,
            "delta": ds.spec.delta,
            "p": ds.spec.p,
            "c_n": ds.spec.c_n,
            "alpha": ds.spec.alpha,
            "j_tilde": ds.spec.j_tilde,
        },
        "shapes": {name: list(ds.arrays[name].shape) for name in _ARRAY_ORDER[ds.spec.kind]},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in _ARRAY_ORDER[ds.spec.kind]:
            raw = np.ascontiguousarray(ds.arrays[name]).astype(_DTYPES[name]).tobytes()
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ConfigurationError(f"bad magic {magic!r}; expected {_MAGIC!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        spec = DistSpec(kind=header["kind"], **header["spec"])
        arrays = {}
        for name in _ARRAY_ORDER[spec.kind]:
            (nbytes,) = struct.unpack("<Q", fh.read(8))
            flat = np.frombuffer(fh.read(nbytes), dtype=_DTYPES[name])
            arrays[name] = flat.reshape(header["shapes"][name]).copy()
    return Dataset(spec, header["n"], header["seed"], arrays, tuple(header["stream_ids"]))
