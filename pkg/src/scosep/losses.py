"""Stochastic loss constructions: values and subgradients.

Conventions used throughout (recorded once here):
  * sign(0) = 0;
  * at a max-branch tie the inactive branch's zero derivative is used
    (w = 1 for the scalar hinge, ||w|| = 1 for the quartic barrier,
    u = 1 for the ramp);
  * argmax ties break to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, ParameterError

_REG_EPS = 1e-15


@dataclass(frozen=True)
class EvalResult:
    """Loss value and a subgradient of the same length as w."""

    value: float
    subgrad: np.ndarray


def _alpha_coord(alpha_enc: int):
    """Decode the {0, 1..d} anchor encoding: 0 is the zero vector, j is e_j."""
    return None if alpha_enc == 0 else alpha_enc - 1


def _masked_diff(w: np.ndarray, x: np.ndarray, alpha_enc: int) -> np.ndarray:
    """(w - alpha) . x for a 0/1 vector x and encoded anchor."""
    diff = w * x
    a = _alpha_coord(alpha_enc)
    if a is not None and x[a] != 0.0:
        diff[a] = w[a] - 1.0
    return diff


# ---------------------------------------------------------------------------
# anchored-norm loss (bit mask x, label y, anchor alpha)


@dataclass(frozen=True)
class FaLoss:
    kind = "FA"
    d: int

    @property
    def dim(self) -> int:
        return self.d

    def eval(self, w: np.ndarray, z) -> EvalResult:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        if w.shape[0] != self.d or x.shape[0] != self.d:
            raise DimensionError(f"expected dimension {self.d}")
        diff = _masked_diff(w, x, z.alpha)
        nrm = math.sqrt(float(diff @ diff))
        if nrm == 0.0:
            return EvalResult(0.0, np.zeros_like(w))
        return EvalResult(z.y * nrm, (z.y / nrm) * diff)

    def eval_idx(self, w, dataset, i) -> EvalResult:
        X = dataset.dense_x()
        diff = _masked_diff(w, X[i], int(dataset.alpha))
        nrm = math.sqrt(float(diff @ diff))
        y = float(dataset.y[i])
        if nrm == 0.0:
            return EvalResult(0.0, np.zeros_like(w))
        return EvalResult(y * nrm, (y / nrm) * diff)

    def _batch_parts(self, w, dataset):
        X = dataset.dense_x()
        diff = w[None, :] * X
        a = _alpha_coord(int(dataset.alpha))
        if a is not None:
            diff[:, a] = (w[a] - 1.0) * X[:, a]
        nrms = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return diff, nrms

    def empirical_value(self, w, dataset) -> float:
        diff, nrms = self._batch_parts(w, dataset)
        return float(np.mean(dataset.y * nrms))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        diff, nrms = self._batch_parts(w, dataset)
        coef = np.where(nrms > 0, dataset.y / np.where(nrms > 0, nrms, 1.0), 0.0)
        return (coef @ diff) / len(dataset)

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        diff = W * x[None, :]
        a = _alpha_coord(z.alpha)
        if a is not None and x[a] != 0.0:
            diff[:, a] = W[:, a] - 1.0
        return z.y * np.sqrt(np.einsum("ij,ij->i", diff, diff))


def fa_eval(w, z) -> EvalResult:
    return FaLoss(len(w)).eval(np.asarray(w, dtype=float), z)


# ---------------------------------------------------------------------------
# quadratic/quartic loss with concave correction (mask x, anchor alpha)


def _quartic_term(w: np.ndarray):
    n2 = float(w @ w)
    value = max(1.0, n2 * n2)
    if n2 > 1.0:
        return value, 4.0 * n2 * w
    return value, np.zeros_like(w)


@dataclass(frozen=True)
class FbLoss:
    kind = "FB"
    d: int
    c_n: float

    def __post_init__(self):
        if self.c_n > 0.25:
            raise ParameterError(f"c_n must be <= 1/4, got {self.c_n}")

    @property
    def dim(self) -> int:
        return self.d

    def eval(self, w: np.ndarray, z) -> EvalResult:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        diff_x = _masked_diff(w, x, z.alpha)
        diff = w.copy()
        a = _alpha_coord(z.alpha)
        if a is not None:
            diff[a] -= 1.0
        q, qg = _quartic_term(w)
        value = 0.5 * float(diff_x @ diff_x) - 0.5 * self.c_n * float(diff @ diff) + q
        grad = diff_x - self.c_n * diff + qg
        return EvalResult(value, grad)

    def eval_idx(self, w, dataset, i) -> EvalResult:
        return self.eval(w, dataset[i])

    def empirical_value(self, w, dataset) -> float:
        return float(np.mean([self.eval(w, dataset[i]).value for i in range(len(dataset))]))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        g = np.zeros_like(w)
        for i in range(len(dataset)):
            g += self.eval(w, dataset[i]).subgrad
        return g / len(dataset)

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        diff_x = W * x[None, :]
        diff = W.copy()
        a = _alpha_coord(z.alpha)
        if a is not None:
            if x[a] != 0.0:
                diff_x[:, a] = W[:, a] - 1.0
            diff[:, a] -= 1.0
        n2 = np.einsum("ij,ij->i", W, W)
        return (
            0.5 * np.einsum("ij,ij->i", diff_x, diff_x)
            - 0.5 * self.c_n * np.einsum("ij,ij->i", diff, diff)
            + np.maximum(1.0, n2 * n2)
        )


def fb_eval(w, z, c_n: float) -> EvalResult:
    return FbLoss(len(w), c_n).eval(np.asarray(w, dtype=float), z)


def c_n_from_gamma(n: int, gamma: float = 0.125) -> float:
    if gamma <= 0:
        raise ParameterError("gamma must be > 0")
    return float(n) ** -(0.25 - gamma)


# ---------------------------------------------------------------------------
# deterministic worst-case function over n+1 coordinates


@dataclass(frozen=True)
class FnLoss:
    kind = "FN"
    n: int

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def _coefs(self):
        sq = math.sqrt(self.n + 1)
        return sq / (1.0 + sq), 1.0 / (2.0 + 2.0 * sq)

    def eval(self, v: np.ndarray, z=None) -> EvalResult:
        if v.shape[0] != self.n + 1:
            raise DimensionError(f"expected length {self.n + 1}, got {v.shape[0]}")
        cmax, cquad = self._coefs
        i = int(np.argmax(v))
        value = cmax * float(v[i]) + cquad * float(v @ v)
        grad = (2.0 * cquad) * v
        grad[i] += cmax
        return EvalResult(value, grad)

    def value_batch(self, V: np.ndarray, z=None) -> np.ndarray:
        cmax, cquad = self._coefs
        return cmax * V.max(axis=1) + cquad * np.einsum("ij,ij->i", V, V)

    def minimum(self):
        """Minimizer -(1/sqrt(n+1))*ones and its value."""
        sq = math.sqrt(self.n + 1)
        vstar = np.full(self.n + 1, -1.0 / sq)
        return vstar, -1.0 / (2.0 + 2.0 * sq)


def fn_eval(v, n: int) -> EvalResult:
    return FnLoss(n).eval(np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# chained loss on (u, v, tau): ramp in u gates which block of the sample is seen


def active_block(u: float, k: int) -> int:
    """1-based interval index of u: I_1 = (-inf, 1/k], I_s = ((s-1)/k, s/k],
    I_k = ((k-1)/k, inf)."""
    if k == 1:
        return 1
    return min(max(int(math.ceil(u * k)), 1), k)


@dataclass(frozen=True)
class FcLoss:
    kind = "FC"
    n: int
    k: int
    d: int

    @property
    def dim(self) -> int:
        return 1 + (self.n + 1) + self.d

    @property
    def ramp_coef(self) -> float:
        return 2.0 / math.sqrt(self.k * self.n)

    @property
    def offset(self) -> float:
        return self.ramp_coef + 1.0 / (2.0 + 2.0 * math.sqrt(self.n + 1))

    def split(self, w: np.ndarray):
        nv = self.n + 1
        return float(w[0]), w[1 : 1 + nv], w[1 + nv :]

    def eval(self, w: np.ndarray, z) -> EvalResult:
        if w.shape[0] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {w.shape[0]}")
        u, v, tau = self.split(w)
        s = active_block(u, self.k)
        block = z.blocks[s - 1]
        fa = FaLoss(self.d).eval(tau, block)
        fn = FnLoss(self.n).eval(v)
        value = fn.value + fa.value - self.ramp_coef * min(u, 1.0) + self.offset
        grad = np.empty_like(w)
        grad[0] = -self.ramp_coef if u < 1.0 else 0.0
        grad[1 : 2 + self.n] = fn.subgrad
        grad[2 + self.n :] = fa.subgrad
        return EvalResult(value, grad)

    def eval_idx(self, w, dataset, i) -> EvalResult:
        u, v, tau = self.split(w)
        s = active_block(u, self.k)
        X = dataset.dense_x()  # (n, k, d)
        diff = _masked_diff(tau, X[i, s - 1], int(dataset.alpha))
        nrm = math.sqrt(float(diff @ diff))
        y = float(dataset.y[i, s - 1])
        fn = FnLoss(self.n).eval(v)
        value = fn.value + (y * nrm) - self.ramp_coef * min(u, 1.0) + self.offset
        grad = np.empty_like(w)
        grad[0] = -self.ramp_coef if u < 1.0 else 0.0
        grad[1 : 2 + self.n] = fn.subgrad
        grad[2 + self.n :] = (y / nrm) * diff if nrm > 0 else 0.0
        return EvalResult(value, grad)

    def empirical_value(self, w, dataset, indices=None) -> float:
        idx = range(len(dataset)) if indices is None else indices
        vals = [self.eval_idx(w, dataset, i).value for i in idx]
        return float(np.mean(vals))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        g = np.zeros_like(w)
        for i in range(len(dataset)):
            g += self.eval_idx(w, dataset, i).subgrad
        return g / len(dataset)

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        out = np.empty(W.shape[0])
        for r in range(W.shape[0]):
            out[r] = self.eval(W[r], z).value
        return out


def fc_eval(w, z, n: int, k: int) -> EvalResult:
    w = np.asarray(w, dtype=float)
    d = w.shape[0] - 1 - (n + 1)
    return FcLoss(n, k, d).eval(w, z)


# ---------------------------------------------------------------------------
# scalar kink loss


def kink_h(w: float, n: int):
    """Zero-mean perturbation unit: 5 linear branches, first match in listed
    order decides the boundary gradient."""
    N = float(n) ** 1.25
    slope = float(n) ** 0.625
    b1, b3, b4 = 1.0 / (64.0 * N), 3.0 / (64.0 * N), 1.0 / (16.0 * N)
    if w < 0.0:
        return 0.0, 0.0
    if w < b1:
        return -slope * w, -slope
    if w <= b3:
        return slope * w - 2.0 / (64.0 * slope), slope
    if w <= b4:
        return -slope * w + 4.0 / (64.0 * slope), -slope
    return 0.0, 0.0


@dataclass(frozen=True)
class KinkLoss:
    kind = "KINK"
    n: int

    dim = 1

    @property
    def lin(self) -> float:
        return float(self.n) ** -0.375

    def eval_scalar(self, w: float, beta: float, y: float):
        hv, hg = kink_h(w - beta, self.n)
        value = self.lin * max(-w, -1.0) + y * hv
        grad = (-self.lin if w < 1.0 else 0.0) + y * hg
        return value, grad

    def eval(self, w: np.ndarray, z) -> EvalResult:
        value, grad = self.eval_scalar(float(w[0]), z.beta, z.y)
        return EvalResult(value, np.array([grad]))

    def eval_idx(self, w, dataset, i) -> EvalResult:
        value, grad = self.eval_scalar(float(w[0]), float(dataset.beta[i]), float(dataset.y[i]))
        return EvalResult(value, np.array([grad]))

    def _sorted(self, dataset):
        cache = dataset.cache
        if "kink_sorted" not in cache:
            order = np.argsort(dataset.beta, kind="stable")
            bs = dataset.beta[order]
            ys = dataset.y[order].astype(np.float64)
            cache["kink_sorted"] = (bs, np.concatenate([[0.0], np.cumsum(ys)]))
        return cache["kink_sorted"]

    def batch_grad_scalar(self, w: float, dataset) -> float:
        """Mean subgradient over the dataset via sorted kink locations; same
        branch boundaries as eval (membership computed on beta, so it can
        differ from per-sample w-beta rounding only on exact-tie inputs)."""
        bs, pref = self._sorted(dataset)
        n = len(dataset)
        N = float(self.n) ** 1.25
        slope = float(self.n) ** 0.625
        b1, b3, b4 = 1.0 / (64.0 * N), 3.0 / (64.0 * N), 1.0 / (16.0 * N)

        def signed(lo, lo_side, hi, hi_side):
            i0 = np.searchsorted(bs, lo, side=lo_side)
            i1 = np.searchsorted(bs, hi, side=hi_side)
            return pref[i1] - pref[i0] if i1 > i0 else 0.0

        s1 = signed(w - b1, "right", w, "right")      # 0 <= u < b1
        s2 = signed(w - b3, "left", w - b1, "right")  # b1 <= u <= b3
        s3 = signed(w - b4, "left", w - b3, "left")   # b3 < u <= b4
        g = (-self.lin if w < 1.0 else 0.0)
        return g + (slope / n) * (-s1 + s2 - s3)

    def empirical_value(self, w, dataset) -> float:
        ws = float(w[0])
        vals = [self.eval_scalar(ws, float(b), float(y))[0]
                for b, y in zip(dataset.beta, dataset.y)]
        return float(np.mean(vals))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        return np.array([self.batch_grad_scalar(float(w[0]), dataset)])

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        return np.array([self.eval_scalar(float(r[0]), z.beta, z.y)[0] for r in W])


def kink_loss_eval(w: float, z, n: int) -> EvalResult:
    return KinkLoss(n).eval(np.array([float(w)]), z)


# ---------------------------------------------------------------------------
# scalar drift loss


@dataclass(frozen=True)
class DriftLoss:
    kind = "DRIFT"
    n: int

    dim = 1

    @property
    def coef(self) -> float:
        return 1.0 / (4.0 * math.sqrt(self.n))

    def eval_scalar(self, w: float, z: float):
        c = self.coef + z
        return c * abs(w), c * float(np.sign(w))

    def eval(self, w: np.ndarray, z) -> EvalResult:
        value, grad = self.eval_scalar(float(w[0]), float(z.z))
        return EvalResult(value, np.array([grad]))

    def eval_idx(self, w, dataset, i) -> EvalResult:
        value, grad = self.eval_scalar(float(w[0]), float(dataset.z[i]))
        return EvalResult(value, np.array([grad]))

    def mean_z(self, dataset) -> float:
        cache = dataset.cache
        if "drift_mean_z" not in cache:
            cache["drift_mean_z"] = float(np.mean(dataset.z.astype(np.float64)))
        return cache["drift_mean_z"]

    def empirical_value(self, w, dataset) -> float:
        return (self.coef + self.mean_z(dataset)) * abs(float(w[0]))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        ws = float(w[0])
        return np.array([(self.coef + self.mean_z(dataset)) * float(np.sign(ws))])

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        return (self.coef + float(z.z)) * np.abs(W[:, 0])


def drift_eval(w: float, z, n: int) -> EvalResult:
    return DriftLoss(n).eval(np.array([float(w)]), z)


# ---------------------------------------------------------------------------
# diagonal two-layer relu network with absolute loss


@dataclass(frozen=True)
class NnLoss:
    kind = "NN"
    d: int

    @property
    def dim(self) -> int:
        return 2 * self.d

    def _forward(self, w1, w2, x):
        hidden = np.maximum(w1 * x, 0.0)
        inner = float(w2 @ hidden)
        return hidden, inner, max(inner, 0.0)

    def eval_arrays(self, w: np.ndarray, x: np.ndarray, y: float) -> EvalResult:
        d = self.d
        w1, w2 = w[:d], w[d:]
        hidden, inner, h = self._forward(w1, w2, x)
        value = abs(y - h)
        sgn = float(np.sign(y - h))
        outer = 1.0 if inner > 0.0 else 0.0
        g1 = (-sgn * outer) * (w2 * (w1 * x > 0.0) * x)
        g2 = (-sgn * outer) * hidden
        return EvalResult(value, np.concatenate([g1, g2]))

    def eval(self, w: np.ndarray, z) -> EvalResult:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        return self.eval_arrays(w, x, float(z.y))

    def eval_idx(self, w, dataset, i) -> EvalResult:
        return self.eval_arrays(w, dataset.dense_x()[i], float(dataset.y[i]))

    def empirical_value(self, w, dataset) -> float:
        X = dataset.dense_x()
        d = self.d
        hidden = np.maximum(w[None, :d] * X, 0.0)
        h = np.maximum(hidden @ w[d:], 0.0)
        return float(np.mean(np.abs(dataset.y.astype(np.float64) - h)))

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        g = np.zeros_like(w)
        X = dataset.dense_x()
        for i in range(len(dataset)):
            g += self.eval_arrays(w, X[i], float(dataset.y[i])).subgrad
        return g / len(dataset)

    def value_batch(self, W: np.ndarray, z) -> np.ndarray:
        x = z.x.to_dense() if hasattr(z.x, "to_dense") else np.asarray(z.x, dtype=float)
        d = self.d
        hidden = np.maximum(W[:, :d] * x[None, :], 0.0)
        h = np.maximum(np.einsum("ij,ij->i", hidden, W[:, d:]), 0.0)
        return np.abs(float(z.y) - h)


def nn_eval(w, z) -> EvalResult:
    w = np.asarray(w, dtype=float)
    return NnLoss(w.shape[0] // 2).eval(w, z)


# ---------------------------------------------------------------------------
# combinators


@dataclass(frozen=True)
class SumLoss:
    """Direct sum over disjoint variable slices; z is the matching tuple of
    component samples."""

    kind = "SUM"
    parts: tuple
    weights: tuple = None
    scales: tuple = None

    def __post_init__(self):
        if not self.parts:
            raise ConfigurationError("sum_combine needs at least one component")
        k = len(self.parts)
        object.__setattr__(self, "weights", tuple(self.weights or (1.0,) * k))
        object.__setattr__(self, "scales", tuple(self.scales or (1.0,) * k))
        if len(self.weights) != k or len(self.scales) != k:
            raise ConfigurationError("weights/scales must match component count")
        offs, pos = [], 0
        for p in self.parts:
            offs.append(pos)
            pos += p.dim
        object.__setattr__(self, "_offsets", tuple(offs))
        object.__setattr__(self, "_dim", pos)

    @property
    def dim(self) -> int:
        return self._dim

    def slices(self):
        for p, off in zip(self.parts, self._offsets):
            yield slice(off, off + p.dim)

    def _accumulate(self, w, term):
        value = 0.0
        grad = np.zeros_like(w)
        for idx, (part, sl) in enumerate(zip(self.parts, self.slices())):
            wt, sc = self.weights[idx], self.scales[idx]
            res = term(idx, part, sc * w[sl])
            value += wt * res.value
            grad[sl] = (wt * sc) * res.subgrad
        return EvalResult(value, grad)

    def eval(self, w: np.ndarray, zs) -> EvalResult:
        if w.shape[0] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {w.shape[0]}")
        return self._accumulate(w, lambda idx, part, ws: part.eval(ws, zs[idx]))

    def eval_idx(self, w, dataset, i) -> EvalResult:
        return self._accumulate(
            w, lambda idx, part, ws: part.eval_idx(ws, dataset.parts[idx], i)
        )

    def empirical_value(self, w, dataset) -> float:
        total = 0.0
        for idx, (part, sl) in enumerate(zip(self.parts, self.slices())):
            total += self.weights[idx] * part.empirical_value(
                self.scales[idx] * w[sl], dataset.parts[idx]
            )
        return total

    def empirical_subgrad(self, w, dataset) -> np.ndarray:
        g = np.zeros_like(w)
        for idx, (part, sl) in enumerate(zip(self.parts, self.slices())):
            wt, sc = self.weights[idx], self.scales[idx]
            g[sl] = (wt * sc) * part.empirical_subgrad(sc * w[sl], dataset.parts[idx])
        return g

    def value_batch(self, W: np.ndarray, zs) -> np.ndarray:
        out = np.zeros(W.shape[0])
        for idx, (part, sl) in enumerate(zip(self.parts, self.slices())):
            out += self.weights[idx] * part.value_batch(self.scales[idx] * W[:, sl], zs[idx])
        return out


def sum_combine(parts, weights=None) -> SumLoss:
    return SumLoss(parts=tuple(parts), weights=tuple(weights) if weights else None)


def step_size_grid(n: int):
    """Log grid of step sizes {gamma^i / n^3} covering [1/n^3, 1), gamma = sqrt(3/2)."""
    gamma = math.sqrt(1.5)
    count = math.ceil(3.0 * math.log(n) / math.log(gamma)) + 1
    return tuple((gamma ** i) / n**3 for i in range(count))


def horizon_grid(n: int):
    """Dyadic grid {2^j} covering [1, n^3)."""
    count = math.ceil(3.0 * math.log2(n)) + 1
    return tuple(2**j for j in range(count))


@dataclass(frozen=True)
class GridLoss(SumLoss):
    """1/M-weighted mixture of per-(step size, horizon) components on disjoint
    slices, each seeing its variable rescaled by log(n)."""

    kind = "GRID"
    etas: tuple = ()
    horizons: tuple = ()
    n: int = 0

    @property
    def M(self) -> int:
        return len(self.parts)

    def effective_eta(self, eta: float) -> float:
        """Per-component step size when the mixture is trained with eta."""
        return eta / self.M

    def cell_for(self, eta: float, T: int):
        """Grid cell (eta_bar, T_bar) whose component covers (eta, T)."""
        e = [e for e in self.etas if e <= eta * (1 + _REG_EPS)]
        t = [h for h in self.horizons if h <= T]
        if not e or not t:
            raise ParameterError(f"(eta={eta}, T={T}) outside the covered grid")
        return e[-1], t[-1]


def grid_combine(component_factory, n: int) -> GridLoss:
    """Build the grid mixture from a factory (eta, T) -> loss."""
    etas = step_size_grid(n)
    horizons = horizon_grid(n)
    parts = tuple(component_factory(e, t) for e in etas for t in horizons)
    M = len(parts)
    scale = math.log(n)
    return GridLoss(
        parts=parts,
        weights=(1.0 / M,) * M,
        scales=(scale,) * M,
        etas=etas,
        horizons=horizons,
        n=n,
    )
