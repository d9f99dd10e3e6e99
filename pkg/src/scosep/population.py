"""Population risk F(w), its minimum, and excess risk.

Closed forms are used wherever the constructions admit one; the rest is
seeded, chunked Monte Carlo with a 95% normal-approximation interval.
Anchors use the {0, 1..d} encoding (0 = zero vector, j = e_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError
from .losses import FnLoss
from .rng import Stream

MC_DEFAULT = 20_000
_Z95 = 1.959963984540054
_MC_CHUNK = 4096
_EXACT_SUPPORT_MAX = 12


@dataclass(frozen=True)
class PopEstimate:
    mean: float
    half_width_95: float
    n_samples: int
    method: str  # CLOSED_FORM | MONTE_CARLO

    def __post_init__(self):
        if (self.method == "CLOSED_FORM") != (self.half_width_95 == 0.0):
            raise ParameterError("half_width_95 must be 0 exactly for CLOSED_FORM")


def _closed(mean: float) -> PopEstimate:
    return PopEstimate(float(mean), 0.0, 0, "CLOSED_FORM")


def _mc(values_sum: float, sq_sum: float, count: int) -> PopEstimate:
    mean = values_sum / count
    var = max(sq_sum / count - mean * mean, 0.0)
    hw = _Z95 * math.sqrt(var / count)
    return PopEstimate(float(mean), float(hw), count, "MONTE_CARLO")


def _anchor_diff(w: np.ndarray, a: int) -> np.ndarray:
    diff = np.asarray(w, dtype=float).copy()
    if a != 0:
        diff[a - 1] -= 1.0
    return diff


# ---------------------------------------------------------------------------
# anchored-norm loss


def fa_jensen_bound(w, delta: float, p: float, a: int) -> float:
    """Lower bound 2*delta*p*||w - a|| on the population risk."""
    diff = _anchor_diff(w, a)
    return 2.0 * delta * p * float(np.sqrt(diff @ diff))


def _expected_masked_norm_exact(v2: np.ndarray, p: float) -> float:
    """E sqrt(sum_j v2[j] * B_j), B_j ~ Bernoulli(p), by support enumeration."""
    s = v2.size
    total = 0.0
    for mask in range(1 << s):
        ssum, ones = 0.0, 0
        m = mask
        j = 0
        while m:
            if m & 1:
                ssum += v2[j]
                ones += 1
            m >>= 1
            j += 1
        total += p**ones * (1.0 - p) ** (s - ones) * math.sqrt(ssum)
    return total


def pop_fa(
    w,
    delta: float,
    p: float,
    a: int,
    mc_samples: int = MC_DEFAULT,
    seed: int = 0,
) -> PopEstimate:
    """Population risk 2*delta*E||(w-a).x||; exact when w-a is sparse enough
    to enumerate, Monte Carlo over the mask otherwise."""
    if mc_samples < 100:
        raise ParameterError(f"mc_samples must be >= 100, got {mc_samples}")
    diff = _anchor_diff(w, a)
    supp = np.flatnonzero(diff)
    if supp.size == 0:
        return _closed(0.0)
    if supp.size <= _EXACT_SUPPORT_MAX:
        return _closed(2.0 * delta * _expected_masked_norm_exact(diff[supp] ** 2, p))
    v2 = diff[supp] ** 2
    stream = Stream(seed, "pop-fa")
    rows = max(1, min(_MC_CHUNK, (1 << 22) // supp.size))
    vsum = sqsum = 0.0
    done = 0
    ctr = 0
    while done < mc_samples:
        m = min(rows, mc_samples - done)
        u = stream.uniforms(ctr, m * supp.size).reshape(m, supp.size)
        vals = 2.0 * delta * np.sqrt((u < p) @ v2)
        vsum += float(vals.sum())
        sqsum += float((vals * vals).sum())
        ctr += m * supp.size
        done += m
    return _mc(vsum, sqsum, mc_samples)


# ---------------------------------------------------------------------------
# closed forms


def pop_fb(w, delta: float, c_n: float, v: int) -> PopEstimate:
    """F(w) = (delta/2)||w - e_v||^2 + max{1, ||w||^4}; minimum 1 at e_v."""
    w = np.asarray(w, dtype=float)
    diff = _anchor_diff(w, v)
    n2 = float(w @ w)
    return _closed(0.5 * delta * float(diff @ diff) + max(1.0, n2 * n2))


def pop_fb_batch(W: np.ndarray, delta: float, v: int) -> np.ndarray:
    diff = W.copy()
    if v != 0:
        diff[:, v - 1] -= 1.0
    n2 = np.einsum("ij,ij->i", W, W)
    return 0.5 * delta * np.einsum("ij,ij->i", diff, diff) + np.maximum(1.0, n2 * n2)


def pop_general_lb(w, which: str, c_n: float, j_tilde: int) -> PopEstimate:
    """Closed-form risks of the two indistinguishable-instance distributions;
    j_tilde is 0-based."""
    w = np.asarray(w, dtype=float)
    n2 = float(w @ w)
    quart = max(1.0, n2 * n2)
    if which == "D1":
        return _closed(0.5 * (0.5 - c_n) * n2 + quart)
    if which == "D2":
        wj2 = float(w[j_tilde]) ** 2
        return _closed(0.5 * (0.5 - c_n) * (n2 - wj2) - 0.5 * c_n * wj2 + quart)
    raise ParameterError(f"which must be D1 or D2, got {which!r}")


def pop_general_lb_batch(W: np.ndarray, which: str, c_n: float, j_tilde: int) -> np.ndarray:
    n2 = np.einsum("ij,ij->i", W, W)
    quart = np.maximum(1.0, n2 * n2)
    if which == "D1":
        return 0.5 * (0.5 - c_n) * n2 + quart
    wj2 = W[:, j_tilde] ** 2
    return 0.5 * (0.5 - c_n) * (n2 - wj2) - 0.5 * c_n * wj2 + quart


def pop_kink(w: float, n: int) -> PopEstimate:
    return _closed(float(n) ** -0.375 * max(-float(w), -1.0))


def pop_drift(w: float, n: int) -> PopEstimate:
    return _closed(abs(float(w)) / (4.0 * math.sqrt(n)))


# ---------------------------------------------------------------------------
# composites


def pop_fc(
    w,
    n: int,
    k: int,
    jstar: int,
    delta: float = 0.1,
    p: float = 0.5,
    mc_samples: int = MC_DEFAULT,
    seed: int = 0,
) -> PopEstimate:
    """Chained-loss population risk: worst-case-function part and ramp are
    closed form, the anchored-norm block goes through pop_fa. Minimum is 0."""
    w = np.asarray(w, dtype=float)
    nv = n + 1
    u, v, tau = float(w[0]), w[1 : 1 + nv], w[1 + nv :]
    fn = FnLoss(n).eval(v).value
    ramp = 2.0 / math.sqrt(k * n)
    offset = ramp + 1.0 / (2.0 + 2.0 * math.sqrt(nv))
    fa = pop_fa(tau, delta, p, jstar, mc_samples=mc_samples, seed=seed)
    mean = fn + fa.mean - ramp * min(u, 1.0) + offset
    if fa.method == "CLOSED_FORM":
        return _closed(mean)
    return PopEstimate(float(mean), fa.half_width_95, fa.n_samples, "MONTE_CARLO")


def pop_nn(w, mc_samples: int = MC_DEFAULT, seed: int = 0) -> PopEstimate:
    """Monte-Carlo population risk of the diagonal net's absolute loss;
    minimum 1/4 at w = 0.  The network output only reads mask coordinates in
    the first layer's support, so only those are drawn."""
    w = np.asarray(w, dtype=float)
    d = w.shape[0] // 2
    w1, w2 = w[:d], w[d:]
    supp = np.flatnonzero(w1)
    w1s, w2s = w1[supp], w2[supp]
    s = supp.size
    stream = Stream(seed, "pop-nn")
    vsum = sqsum = 0.0
    done = 0
    ctr = 0
    while done < mc_samples:
        m = min(_MC_CHUNK, mc_samples - done)
        u = stream.uniforms(ctr, m * (s + 1)).reshape(m, s + 1)
        x = (u[:, :s] < 0.5).astype(np.float64)
        y = (u[:, s] < 0.25).astype(np.float64)
        h = np.maximum(np.maximum(w1s[None, :] * x, 0.0) @ w2s, 0.0)
        vals = np.abs(y - h)
        vsum += float(vals.sum())
        sqsum += float((vals * vals).sum())
        ctr += m * (s + 1)
        done += m
    return _mc(vsum, sqsum, mc_samples)


# ---------------------------------------------------------------------------
# models and excess risk


@dataclass(frozen=True)
class PopModel:
    """A population risk with (optionally) a known minimum value."""

    name: str
    risk_fn: object
    fstar: float = None
    risk_batch_fn: object = None

    def risk(self, w) -> PopEstimate:
        return self.risk_fn(w)

    def risk_batch(self, W: np.ndarray) -> np.ndarray:
        if self.risk_batch_fn is None:
            return np.array([self.risk_fn(W[i]).mean for i in range(W.shape[0])])
        return self.risk_batch_fn(W)


def excess(w, model: PopModel) -> PopEstimate:
    """F(w) - F*, interval carried through."""
    if model.fstar is None:
        raise ConfigurationError(f"population model {model.name!r} has no known minimum")
    est = model.risk(w)
    return PopEstimate(est.mean - model.fstar, est.half_width_95, est.n_samples, est.method)


def model_fa(delta, p, a, mc_samples=MC_DEFAULT, seed=0) -> PopModel:
    return PopModel(
        "fa",
        lambda w: pop_fa(w, delta, p, a, mc_samples=mc_samples, seed=seed),
        fstar=0.0,
    )


def model_fb(delta, c_n, v) -> PopModel:
    return PopModel(
        "fb",
        lambda w: pop_fb(w, delta, c_n, v),
        fstar=1.0,
        risk_batch_fn=lambda W: pop_fb_batch(W, delta, v),
    )


def model_general_lb(which, c_n, j_tilde) -> PopModel:
    fstar = 1.0 if which == "D1" else 1.0 - 0.5 * c_n
    return PopModel(
        f"general-lb-{which}",
        lambda w: pop_general_lb(w, which, c_n, j_tilde),
        fstar=fstar,
        risk_batch_fn=lambda W: pop_general_lb_batch(W, which, c_n, j_tilde),
    )


def model_kink(n) -> PopModel:
    return PopModel(
        "kink",
        lambda w: pop_kink(float(np.atleast_1d(w)[0]), n),
        fstar=-(float(n) ** -0.375),
        risk_batch_fn=lambda W: float(n) ** -0.375 * np.maximum(-W[:, 0], -1.0),
    )


def model_drift(n) -> PopModel:
    return PopModel(
        "drift",
        lambda w: pop_drift(float(np.atleast_1d(w)[0]), n),
        fstar=0.0,
        risk_batch_fn=lambda W: np.abs(W[:, 0]) / (4.0 * math.sqrt(n)),
    )


def model_fc(n, k, jstar, delta=0.1, p=0.5, mc_samples=MC_DEFAULT, seed=0) -> PopModel:
    return PopModel(
        "fc",
        lambda w: pop_fc(w, n, k, jstar, delta, p, mc_samples=mc_samples, seed=seed),
        fstar=0.0,
    )


def model_nn(mc_samples=MC_DEFAULT, seed=0) -> PopModel:
    return PopModel(
        "nn",
        lambda w: pop_nn(w, mc_samples=mc_samples, seed=seed),
        fstar=0.25,
    )
