"""Piecewise-linear to ReLU compilation, smooth-function approximation, and
the restricted diagonal networks that reproduce the anchored losses exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .losses import _alpha_coord


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on R: slope m0 left of a1, slope
    m_i on (a_i, a_{i+1}), slope m_K right of a_K, pinned by value_at_a1."""

    endpoints: tuple
    value_at_a1: float
    slopes: tuple  # K+1 slopes for K endpoints

    def __post_init__(self):
        a = np.asarray(self.endpoints, dtype=float)
        if a.size < 1:
            raise ParameterError("need at least one endpoint")
        if not np.all(np.diff(a) > 0):
            raise ParameterError("endpoints must be strictly increasing")
        if len(self.slopes) != a.size + 1:
            raise DimensionError(
                f"need {a.size + 1} slopes for {a.size} endpoints, got {len(self.slopes)}"
            )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.endpoints)
        m = np.asarray(self.slopes)
        # cumulative value at each endpoint
        va = np.concatenate([[self.value_at_a1], self.value_at_a1 + np.cumsum(m[1:-1] * np.diff(a))])
        seg = np.searchsorted(a, x, side="right")  # 0 => left of a1
        out = np.where(
            seg == 0,
            self.value_at_a1 + m[0] * (x - a[0]),
            va[np.maximum(seg - 1, 0)] + m[seg] * (x - a[np.maximum(seg - 1, 0)]),
        )
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ReluCombo:
    """bias + sum of coeff * relu(orient * (x - knot)) terms."""

    bias: float
    terms: tuple  # ((coeff, orient, knot), ...) with orient in {+1, -1}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.bias, dtype=float)
        for coeff, orient, knot in self.terms:
            out = out + coeff * np.maximum(orient * (x - knot), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for coeff, orient, knot in self.terms:
            out = out + coeff * orient * (orient * (x - knot) > 0.0)
        return out if out.ndim else float(out)

    def to_json(self) -> str:
        return json.dumps(
            {"bias": self.bias, "terms": [list(t) for t in self.terms]}, sort_keys=False
        )


def pwl_to_relu(f: PiecewiseLinear) -> ReluCombo:
    """Exact ReLU representation with K+2 terms; coefficients are slope
    differences, so they stay within twice the largest slope magnitude."""
    a = f.endpoints
    m = f.slopes
    terms = [(-m[0], -1, a[0]), (m[0], +1, a[0])]
    for i in range(1, len(a) + 1):
        knot = a[i - 1]
        terms.append((m[i] - m[i - 1], +1, knot))
    # first interior term merges with the slope anchor at a1 mathematically,
    # but is kept separate to preserve the K+2 count and the coefficient bound
    return ReluCombo(bias=f.value_at_a1, terms=tuple(terms))


def approx_smooth(f, fprime, a: float, b: float, L: float, alpha: float, eps: float) -> ReluCombo:
    """Interpolate an L-Lipschitz, alpha-smooth f on ceil((b-a)max(L,alpha)/eps)
    equal intervals and compile the interpolant; the result carries
    ``n_intervals`` and matches f within eps in value, and within eps in slope
    away from the knots."""
    if eps <= 0:
        raise ParameterError("eps must be > 0")
    if b <= a:
        raise ParameterError("need b > a")
    n = math.ceil((b - a) * max(L, alpha) / eps)
    xs = a + (b - a) * np.arange(n + 1) / n
    ys = np.array([f(x) for x in xs], dtype=float)
    slopes = np.diff(ys) / np.diff(xs)
    if n == 1:
        pwl = PiecewiseLinear((xs[0],), float(ys[0]), (float(slopes[0]), float(slopes[0])))
    else:
        # interior knots only; first/last segment slopes extend outward, and
        # slope i covers (knot i, knot i+1) so the tuple is exactly the
        # per-interval slopes
        pwl = PiecewiseLinear(
            tuple(xs[1:-1]),
            float(ys[1]),
            tuple(float(s) for s in slopes),
        )
    combo = pwl_to_relu(pwl)
    object.__setattr__(combo, "_n_intervals", n)
    object.__setattr__(combo, "_knots", xs)
    return combo


def n_intervals(combo: ReluCombo) -> int:
    return getattr(combo, "_n_intervals")


def interpolation_knots(combo: ReluCombo) -> np.ndarray:
    return getattr(combo, "_knots")


# ---------------------------------------------------------------------------
# restricted diagonal networks


def diag_forward(w1: np.ndarray, w2: np.ndarray, x: np.ndarray) -> float:
    """relu(w2 . relu(w1 * x))."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (w1.shape == w2.shape == x.shape):
        raise DimensionError("w1, w2, x must share a shape")
    return float(max(np.maximum(w1 * x, 0.0) @ w2, 0.0))


@dataclass(frozen=True)
class LayeredNet:
    """Fixed-architecture network whose only trainable slots are the w entries
    of the first layer; ``layers`` documents each stage for inspection."""

    name: str
    d: int
    layers: tuple
    c_n: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "d": self.d, "c_n": self.c_n, "layers": list(self.layers)},
            sort_keys=False,
        )

    def preprocess(self, x: np.ndarray, alpha: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        neg_alpha_x = np.zeros(self.d)
        a = _alpha_coord(alpha)
        if a is not None:
            neg_alpha_x[a] = -x[a]
        if self.name == "fa":
            return np.concatenate([x, neg_alpha_x])
        neg_alpha = np.zeros(self.d)
        if a is not None:
            neg_alpha[a] = -1.0
        ones = np.ones(self.d)
        return np.concatenate([x, neg_alpha_x, ones, neg_alpha, ones, ones])

    def forward(self, w: np.ndarray, x_tilde: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        d = self.d
        if self.name == "fa":
            h1 = np.concatenate([w * x_tilde[:d], x_tilde[d:]])          # linear
            h2 = (h1[:d] + h1[d:]) ** 2                                  # square pairs
            return float(math.sqrt(h2 @ np.ones(d)))                     # sqrt of the sum
        h1 = np.concatenate(
            [w * x_tilde[:d], x_tilde[d : 2 * d],
             w * x_tilde[2 * d : 3 * d], x_tilde[3 * d : 4 * d],
             w * x_tilde[4 * d : 5 * d], x_tilde[5 * d :]]
        )
        h2 = np.concatenate(
            [(h1[:d] + h1[d : 2 * d]) ** 2,
             (h1[2 * d : 3 * d] + h1[3 * d : 4 * d]) ** 2,
             (h1[4 * d : 5 * d]) ** 2]
        )
        node1 = 0.5 * float(h2[:d].sum()) - 0.5 * self.c_n * float(h2[d : 2 * d].sum())
        node2 = max(1.0, float(h2[2 * d :].sum()) ** 2)                   # max{1, a^2} of ||w||^2
        return node1 + node2

    def loss(self, w: np.ndarray, z) -> float:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        x_tilde = self.preprocess(x, z.alpha)
        out = self.forward(w, x_tilde)
        if self.name == "fa":
            return z.y * out
        return out


def build_fa_network(d: int) -> LayeredNet:
    layers = (
        ["diag(w, 1)", "linear"],
        ["pair-sum", "square"],
        ["ones", "sqrt"],
    )
    return LayeredNet("fa", d, layers)


def build_fb_network(d: int, c_n: float) -> LayeredNet:
    if c_n > 0.25:
        raise ParameterError(f"c_n must be <= 1/4, got {c_n}")
    layers = (
        ["diag(w, 1, w, 1, w, 1)", "linear"],
        ["pair-sum / pair-sum / pass", "square"],
        ["(1/2, -c_n/2 | 1)", "linear | max1-square"],
        ["(1, 1)", "linear"],
    )
    return LayeredNet("fb", d, layers, c_n=c_n)
