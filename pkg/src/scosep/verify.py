"""Executable oracles for the per-draw and per-step bounds the constructions
are built on.

Each oracle is deterministic given (seed, parameters).  Frequency oracles
state their threshold as the claimed bound minus an explicit slack; the slack
is stored in the report.  Rate statements are exercised by the experiment
runner instead, not here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .losses import (
    DriftLoss,
    FaLoss,
    FbLoss,
    FcLoss,
    FnLoss,
    KinkLoss,
    NnLoss,
    SumLoss,
    grid_combine,
)
from .distributions import (
    SampleA,
    SampleB,
    SampleC,
    SampleDrift,
    SampleKink,
    SampleNN,
    grid_H,
)
from .population import (
    model_drift,
    model_fb,
    model_general_lb,
    model_kink,
    pop_fb,
)
from .rng import Stream
from .vecspace import BitMask

FREQ_SLACK = 0.05


@dataclass(frozen=True)
class OracleReport:
    oracle: str
    trials: int
    passes: int
    threshold: float
    verdict: str  # PASS | FAIL | INCONCLUSIVE
    slack: float = 0.0
    seed: int = 0
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "oracle": self.oracle,
            "trials": self.trials,
            "passes": self.passes,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "slack": self.slack,
            "seed": self.seed,
            "details": self.details,
        }

    def row(self) -> str:
        return (
            f"{self.oracle:<20} {self.verdict:<13} {self.passes:>9}/{self.trials:<9} "
            f"threshold={self.threshold:.6g}"
        )


def _deterministic_report(name, trials, failures, seed, details) -> OracleReport:
    verdict = "PASS" if failures == 0 else "FAIL"
    return OracleReport(name, trials, trials - failures, 1.0, verdict, 0.0, seed, details)


def _frequency_report(name, trials, hits, bound, seed, details) -> OracleReport:
    threshold = bound - FREQ_SLACK
    if threshold <= 0:
        return OracleReport(
            name, trials, hits, threshold, "INCONCLUSIVE", FREQ_SLACK, seed,
            dict(details, note="bound is vacuous at these parameters"),
        )
    verdict = "PASS" if hits / trials >= threshold else "FAIL"
    return OracleReport(name, trials, hits, threshold, verdict, FREQ_SLACK, seed, details)


# ---------------------------------------------------------------------------
# single-step iterate boundedness and Lipschitz fuzz (quartic-barrier loss)


def _fb_fuzz_batch(stream, base, trials, d, c_n, boundary_frac=0.01):
    """Random (w, z) with ||w|| <= 2.5, a slice pinned to the boundary."""
    g = stream.gaussians(base, trials * d).reshape(trials, d)
    nrm = np.sqrt(np.einsum("ij,ij->i", g, g))
    nrm[nrm == 0] = 1.0
    radii = 2.5 * stream.uniforms(base + 2 * trials * d, trials) ** (1.0 / d)
    nb = max(1, int(trials * boundary_frac))
    radii[:nb] = 2.5
    W = g * (radii / nrm)[:, None]
    X = stream.bits(base + 3 * trials * d, trials * d, 0.5).reshape(trials, d).astype(float)
    alpha = stream.integers(base + 5 * trials * d, trials, 0, d + 1)
    diff_x = W * X
    diff = W.copy()
    rows = np.flatnonzero(alpha > 0)
    cols = (alpha[rows] - 1).astype(int)
    diff[rows, cols] -= 1.0
    diff_x[rows, cols] = np.where(X[rows, cols] > 0, W[rows, cols] - 1.0, 0.0)
    n2 = np.einsum("ij,ij->i", W, W)
    G = diff_x - c_n * diff + np.where(n2 > 1.0, 4.0 * n2, 0.0)[:, None] * W
    return W, G


def oracle_bounded_iterates(trials: int = 100_000, d: int = 6, eta: float = 0.01, seed: int = 0):
    """A single step from inside the 2.5-ball stays inside it."""
    stream = Stream(seed, "oracle", "bounded")
    W, G = _fb_fuzz_batch(stream, 0, trials, d, c_n=0.25)
    Wp = W - eta * G
    norms = np.sqrt(np.einsum("ij,ij->i", Wp, Wp))
    failures = int(np.sum(norms > 2.5 + 1e-12))
    return _deterministic_report(
        "bounded-iterates", trials, failures, seed,
        {"d": d, "eta": eta, "max_successor_norm": float(norms.max())},
    )


def oracle_lipschitz_fb(trials: int = 100_000, d: int = 6, seed: int = 0):
    """Subgradient norm stays <= 70 on the 2.5-ball."""
    stream = Stream(seed, "oracle", "lipschitz")
    _, G = _fb_fuzz_batch(stream, 0, trials, d, c_n=0.25)
    norms = np.sqrt(np.einsum("ij,ij->i", G, G))
    failures = int(np.sum(norms > 70.0))
    return _deterministic_report(
        "lipschitz-fb", trials, failures, seed, {"d": d, "max_subgrad_norm": float(norms.max())}
    )


# ---------------------------------------------------------------------------
# kink gradient variance


def oracle_variance_kink(mc: int = 20_000_000, n: int = 64, seed: int = 0):
    """Monte-Carlo E|grad f - grad F|^2 at the worst-aligned point stays under
    0.26 (claimed bound 1/4), and vanishes far from every kink."""
    N = float(n) ** 1.25
    H = grid_H(n)
    m = H.size
    # center the active window on one grid point
    w_hot = float(H[m // 2]) + 1.0 / (32.0 * N)
    w_cold = 0.125  # left of the entire grid
    stream = Stream(seed, "oracle", "variance")
    slope2 = float(n) ** 1.25
    hot_sum = 0.0
    cold_hits = 0
    done, ctr = 0, 0
    chunk = 1 << 20
    b1, b3, b4 = 1.0 / (64.0 * N), 3.0 / (64.0 * N), 1.0 / (16.0 * N)
    while done < mc:
        msz = min(chunk, mc - done)
        idx = (stream.u64(ctr, msz) % np.uint64(m)).astype(np.int64)
        beta = H[idx]
        u = w_hot - beta
        active = (u >= 0.0) & (u <= b4)  # |h'| = n^{5/8} on the whole window
        hot_sum += float(np.sum(active)) * slope2
        u2 = w_cold - beta
        cold_hits += int(np.sum((u2 >= 0.0) & (u2 <= b4)))
        ctr += msz
        done += msz
    est_hot = hot_sum / mc
    est_cold = cold_hits * slope2 / mc
    failures = int(est_hot > 0.26) + int(est_cold != 0.0)
    return _deterministic_report(
        "variance-kink", 2, failures, seed,
        {"n": n, "mc": mc, "variance_at_kink": est_hot, "variance_far_field": est_cold},
    )


# ---------------------------------------------------------------------------
# population minimizer stays in the unit ball (quartic barrier)


def oracle_minimizer_bound(grid_points: int = 40, directions: int = 8, seed: int = 0,
                           delta: float = 0.1, d: int = 8):
    """Closed-form scan: risk at every ||w|| in (1, 3] exceeds the risk floor
    inside the unit ball."""
    stream = Stream(seed, "oracle", "minimizer")
    f0 = pop_fb(np.zeros(d), delta, 0.25, 1).mean
    dirs = [np.eye(d)[0], -np.eye(d)[0]]
    g = stream.gaussians(0, directions * d).reshape(directions, d)
    dirs.extend(g / np.sqrt(np.einsum("ij,ij->i", g, g))[:, None])
    radii = 1.0 + 2.0 * np.arange(1, grid_points + 1) / grid_points
    failures = 0
    worst = math.inf
    for u in dirs:
        for r in radii:
            fv = pop_fb(r * u, delta, 0.25, 1).mean
            worst = min(worst, fv - f0)
            if fv <= f0:
                failures += 1
    return _deterministic_report(
        "minimizer-bound", len(dirs) * grid_points, failures, seed,
        {"risk_at_zero": f0, "min_margin": worst, "delta": delta},
    )


# ---------------------------------------------------------------------------
# balls-and-bins event frequency


def balls_and_bins_k(n: int) -> int:
    """Search horizon ceil((ln n / 2) * n^(1/4)) over the leading order
    statistics."""
    return math.ceil(0.5 * math.log(n) * float(n) ** 0.25)


def oracle_balls_and_bins(n: int = 4096, trials: int = 2000, seed: int = 0):
    """Frequency of: some j <= k has the first j+1 kink locations pairwise
    distinct and the j-th smallest labelled +1.  Claimed bound 1 - 2/n^(1/4)."""
    k = balls_and_bins_k(n)
    bound = 1.0 - 2.0 / float(n) ** 0.25
    m = math.ceil(4.0 * float(n) ** 1.25)
    stream = Stream(seed, "oracle", "bnb")
    hits = 0
    for t in range(trials):
        base = t * 2 * n
        bins = (stream.u64(base, n) % np.uint64(m)).astype(np.int64)
        ys = np.where(stream.u64(base + n, n) >> np.uint64(63), 1, -1)
        order = np.argsort(bins, kind="stable")
        b = bins[order]
        y = ys[order]
        limit = min(k, n - 1)
        distinct = np.diff(b[: limit + 1]) != 0
        ok = False
        for j in range(1, limit + 1):
            if not distinct[j - 1]:
                break
            if y[j - 1] == 1:
                ok = True
                break
        hits += ok
    return _frequency_report(
        "balls-and-bins", trials, hits, bound, seed, {"n": n, "k": k, "frequency": hits / trials}
    )


# ---------------------------------------------------------------------------
# linearizable inequality for the diagonal net


def oracle_linearizable_nn(points: int = 1000, mc: int = 2000, d: int = 32, seed: int = 0):
    """Paired per-sample estimator of F(w) - F(0) - (1/2)<grad F(w), w>; the
    mean must not exceed 3 standard errors for any probed w in the unit ball."""
    stream = Stream(seed, "oracle", "linearizable")
    loss = NnLoss(d)
    violations = 0
    worst = -math.inf
    for pt in range(points):
        base = pt * (2 * d * 2 + mc * (d + 1)) * 2
        g = stream.gaussians(base, 2 * d)
        w = g / float(np.sqrt(g @ g))
        w *= stream.uniforms(base + 4 * d, 1)[0] ** (1.0 / (2 * d))
        zbase = base + 4 * d + 1
        u = stream.uniforms(zbase, mc * (d + 1)).reshape(mc, d + 1)
        X = (u[:, :d] < 0.5).astype(np.float64)
        Y = (u[:, d] < 0.25).astype(np.float64)
        w1, w2 = w[:d], w[d:]
        hidden = np.maximum(w1[None, :] * X, 0.0)
        inner = hidden @ w2
        h = np.maximum(inner, 0.0)
        fw = np.abs(Y - h)
        f0 = np.abs(Y)
        sgn = np.sign(Y - h)
        outer = (inner > 0.0).astype(np.float64)
        # <grad f, w> = -sgn*outer*(<w1, dL/dw1-part> + <w2, hidden>) = -2*sgn*outer*inner
        gw = -2.0 * sgn * outer * inner
        a = fw - f0 - 0.5 * gw
        mean = float(a.mean())
        se = float(a.std(ddof=1) / math.sqrt(mc)) if mc > 1 else 0.0
        margin = mean - 3.0 * se
        worst = max(worst, margin)
        if margin > 1e-12:
            violations += 1
    return _deterministic_report(
        "linearizable-nn", points, violations, seed,
        {"d": d, "mc": mc, "worst_margin": worst},
    )


# ---------------------------------------------------------------------------
# convexity probes on the closed-form population losses


def oracle_convexity(pairs: int = 10_000, seed: int = 0):
    """Midpoint convexity within 1e-9 for every closed-form population risk."""
    stream = Stream(seed, "oracle", "convexity")
    d = 8
    cases = [
        ("fb", model_fb(0.1, 0.25, 1), d, 3.0),
        ("general-lb-D1", model_general_lb("D1", 0.25, 0), d, 3.0),
        ("kink", model_kink(64), 1, 3.0),
        ("drift", model_drift(64), 1, 3.0),
    ]
    failures = 0
    details = {}
    base = 0
    for name, model, dim, scale in cases:
        u = stream.uniforms(base, 2 * pairs * dim).reshape(2, pairs, dim)
        base += 2 * pairs * dim
        W1 = scale * (2.0 * u[0] - 1.0)
        W2 = scale * (2.0 * u[1] - 1.0)
        fmid = model.risk_batch(0.5 * (W1 + W2))
        favg = 0.5 * (model.risk_batch(W1) + model.risk_batch(W2))
        bad = int(np.sum(fmid > favg + 1e-9))
        failures += bad
        details[name] = {"violations": bad, "max_gap": float(np.max(fmid - favg))}
    # closed parts of the chained loss: worst-case function and ramp
    fn = FnLoss(7)
    u = stream.uniforms(base, 2 * pairs * 8).reshape(2, pairs, 8)
    V1, V2 = 3.0 * (2.0 * u[0] - 1.0), 3.0 * (2.0 * u[1] - 1.0)
    fmid = fn.value_batch(0.5 * (V1 + V2))
    favg = 0.5 * (fn.value_batch(V1) + fn.value_batch(V2))
    bad = int(np.sum(fmid > favg + 1e-9))
    failures += bad
    details["fn"] = {"violations": bad, "max_gap": float(np.max(fmid - favg))}
    return _deterministic_report("convexity", pairs * (len(cases) + 1), failures, seed, details)


# ---------------------------------------------------------------------------
# finite-difference gradient checks


def _fd_check(value_batch, W, G, loci_dist, h=1e-6, tol=1e-5, min_dist=1e-4):
    """Central differences vs claimed gradients at points at least min_dist
    from every non-differentiability locus; returns (#checked, #failed)."""
    keep = loci_dist >= min_dist
    W, G = W[keep], G[keep]
    if W.shape[0] == 0:
        return 0, 0
    err = np.zeros(W.shape[0])
    for j in range(W.shape[1]):
        Wp, Wm = W.copy(), W.copy()
        Wp[:, j] += h
        Wm[:, j] -= h
        fd = (value_batch(Wp) - value_batch(Wm)) / (2.0 * h)
        err = np.maximum(err, np.abs(fd - G[:, j]))
    scale = np.maximum(1.0, np.sqrt(np.einsum("ij,ij->i", G, G)))
    failed = int(np.sum(err / scale > tol))
    return W.shape[0], failed


def _grad_rows(loss, W, z):
    return np.stack([loss.eval(W[i], z).subgrad for i in range(W.shape[0])])


def oracle_grad_fd(points: int = 10_000, seed: int = 0):
    """Finite-difference agreement (rel err <= 1e-5) for every loss kind at
    points away from the non-differentiability loci."""
    stream = Stream(seed, "oracle", "fd")
    details = {}
    failures = 0
    total = 0
    d = 6

    def record(name, checked, failed):
        nonlocal failures, total
        details[name] = {"checked": checked, "failed": failed}
        failures += failed
        total += checked

    # FA: locus is (w - a) . x = 0
    xa = BitMask.from_bools(stream.bits(0, d, 0.5))
    za = SampleA(xa, -1, 1)
    W = 3.0 * (2.0 * stream.uniforms(10_000, points * d).reshape(points, d) - 1.0)
    fa = FaLoss(d)
    diff = np.stack([W[i] * xa.to_dense() for i in range(points)])
    diff[:, 0] = np.where(xa.to_dense()[0] > 0, W[:, 0] - 1.0, 0.0)
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    record("fa", *_fd_check(lambda WW: fa.value_batch(WW, za), W, _grad_rows(fa, W, za), dist))

    # FB: locus is ||w|| = 1
    zb = SampleB(xa, 1)
    fb = FbLoss(d, 0.25)
    W = 2.0 * (2.0 * stream.uniforms(200_000, points * d).reshape(points, d) - 1.0)
    dist = np.abs(np.sqrt(np.einsum("ij,ij->i", W, W)) - 1.0)
    record("fb", *_fd_check(lambda WW: fb.value_batch(WW, zb), W, _grad_rows(fb, W, zb), dist))

    # FN: locus is an argmax tie
    fn = FnLoss(d - 1)
    V = 3.0 * (2.0 * stream.uniforms(400_000, points * d).reshape(points, d) - 1.0)
    part = np.partition(V, d - 2, axis=1)
    dist = part[:, -1] - part[:, -2]
    record("fn", *_fd_check(fn.value_batch, V, _grad_rows(fn, V, None), dist))

    # KINK at small n (wide branches): loci are the four branch edges and w=1
    nk = 4
    kink = KinkLoss(nk)
    zk = SampleKink(float(grid_H(nk)[2]), 1)
    Wk = (4.0 * stream.uniforms(600_000, points) - 2.0).reshape(points, 1)
    N = float(nk) ** 1.25
    edges = np.array([0.0, 1.0 / (64 * N), 3.0 / (64 * N), 1.0 / (16 * N)])
    u = Wk[:, 0] - zk.beta
    dist = np.minimum(np.min(np.abs(u[:, None] - edges[None, :]), axis=1), np.abs(Wk[:, 0] - 1.0))
    record("kink", *_fd_check(lambda WW: kink.value_batch(WW, zk), Wk, _grad_rows(kink, Wk, zk), dist))

    # DRIFT: loci are w = 0 and the hinge at w = 1 is absent (pure |w|)
    drift = DriftLoss(16)
    zd = SampleDrift(1)
    Wd = (4.0 * stream.uniforms(700_000, points) - 2.0).reshape(points, 1)
    record(
        "drift",
        *_fd_check(lambda WW: drift.value_batch(WW, zd), Wd, _grad_rows(drift, Wd, zd), np.abs(Wd[:, 0])),
    )

    # FC: loci are block boundaries in u, u=1, and the FA/FN loci of the parts
    nfc, kfc = 3, 4
    fc = FcLoss(nfc, kfc, d)
    blocks = tuple(
        SampleA(BitMask.from_bools(stream.bits(800_000 + 16 * s, d, 0.5)), 1 if s % 2 else -1, 1)
        for s in range(kfc)
    )
    zc = SampleC(blocks)
    dim = fc.dim
    Wc = 2.0 * (2.0 * stream.uniforms(900_000, points * dim).reshape(points, dim) - 1.0)
    uu = Wc[:, 0]
    bdry = np.min(np.abs(uu[:, None] - np.arange(1, kfc + 1)[None, :] / kfc), axis=1)
    Vv = Wc[:, 1 : nfc + 2]
    partv = np.partition(Vv, nfc, axis=1)
    dfn = partv[:, -1] - partv[:, -2]
    dfa = np.empty(points)
    for i in range(points):
        s = min(max(int(math.ceil(uu[i] * kfc)), 1), kfc)
        xb = blocks[s - 1].x.to_dense()
        dv = Wc[i, nfc + 2 :] * xb
        if xb[0] > 0:
            dv[0] = Wc[i, nfc + 2] - 1.0
        dfa[i] = math.sqrt(float(dv @ dv))
    dist = np.minimum(np.minimum(bdry, dfn), dfa)
    record("fc", *_fd_check(lambda WW: fc.value_batch(WW, zc), Wc, _grad_rows(fc, Wc, zc), dist))

    # NN: loci are y-h = 0, the outer preactivation 0, and first-layer kinks
    nn = NnLoss(d)
    xn = stream.bits(1_000_000, d, 0.5)
    zn = SampleNN(BitMask.from_bools(xn), 1)
    Wn = 2.0 * (2.0 * stream.uniforms(1_100_000, points * 2 * d).reshape(points, 2 * d) - 1.0)
    xd = zn.x.to_dense()
    hidden = np.maximum(Wn[:, :d] * xd[None, :], 0.0)
    inner = np.einsum("ij,ij->i", hidden, Wn[:, d:])
    h = np.maximum(inner, 0.0)
    first = np.abs(np.where(xd[None, :] > 0, Wn[:, :d], np.inf)).min(axis=1)
    dist = np.minimum(np.minimum(np.abs(1.0 - h), np.abs(inner)), first)
    record("nn", *_fd_check(lambda WW: nn.value_batch(WW, zn), Wn, _grad_rows(nn, Wn, zn), dist))

    # SUM and GRID combinators over drift components: locus is any w slice at 0
    sl = SumLoss(parts=(DriftLoss(16), DriftLoss(16)))
    zs = (SampleDrift(1), SampleDrift(-1))
    Ws = 2.0 * (2.0 * stream.uniforms(1_200_000, points * 2).reshape(points, 2) - 1.0)
    dist = np.min(np.abs(Ws), axis=1)
    record("sum", *_fd_check(lambda WW: sl.value_batch(WW, zs), Ws, _grad_rows(sl, Ws, zs), dist))

    gl = grid_combine(lambda eta, T: DriftLoss(4), 4)
    zg = tuple(SampleDrift(1 if i % 2 else -1) for i in range(gl.M))
    Wg = 2.0 * (2.0 * stream.uniforms(1_300_000, points * gl.M).reshape(points, gl.M) - 1.0)
    dist = np.min(np.abs(Wg), axis=1)
    record("grid", *_fd_check(lambda WW: gl.value_batch(WW, zg), Wg, _grad_rows(gl, Wg, zg), dist))

    return _deterministic_report("grad-fd", total, failures, seed, details)


# ---------------------------------------------------------------------------
# registry


ORACLES = {
    "bounded-iterates": oracle_bounded_iterates,
    "lipschitz-fb": oracle_lipschitz_fb,
    "variance-kink": oracle_variance_kink,
    "minimizer-bound": oracle_minimizer_bound,
    "balls-and-bins": oracle_balls_and_bins,
    "linearizable-nn": oracle_linearizable_nn,
    "convexity": oracle_convexity,
    "grad-fd": oracle_grad_fd,
}


def run_oracles(ids=None, seed: int = 0):
    names = list(ORACLES) if not ids else list(ids)
    unknown = [x for x in names if x not in ORACLES]
    if unknown:
        raise ParameterError(f"unknown oracle ids: {unknown}; known: {sorted(ORACLES)}")
    return [ORACLES[name](seed=seed) for name in names]


def reports_table(reports) -> str:
    lines = [f"{'oracle':<20} {'verdict':<13} {'passes':>19}"]
    lines += [r.row() for r in reports]
    return "\n".join(lines)


def reports_json(reports) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2, sort_keys=False)
