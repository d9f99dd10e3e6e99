"""Experiment bodies for the command-line runner.

Each experiment maps a trial index to a list of metric rows; trials are pure
functions of (spec, master seed, trial index), so they can run on any worker
layout and still produce identical records.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .distributions import (
    CompositeDataset,
    d_for,
    make_dataset,
    spec_C,
    spec_D,
    spec_NN,
    spec_drift,
    spec_kink,
)
from .errors import ParameterError
from .losses import DriftLoss, FaLoss, FcLoss, KinkLoss, NnLoss, sum_combine
from .optimizers import OptConfig, initial_point, run_gd, run_multipass, run_sgd
from .population import excess, model_fa, model_fc, model_nn, pop_drift, pop_fa, pop_kink
from .rerm import separation_certificate
from .rng import Stream
from .vecspace import BallSpec

EXPERIMENT_IDS = (
    "sgd-rate",
    "sgd-vs-rerm",
    "gd-kink-trap",
    "gd-drift",
    "gd-vs-sgd-composite",
    "multipass-gain",
    "nn-erm-fail",
)

# what each experiment probes, as a rate/threshold in the summary
TARGETS = {
    "sgd-rate": "mean excess = O(n**-0.5)",
    "sgd-vs-rerm": "lambda-swept restricted RERM keeps Omega(1) excess while SGD learns",
    "gd-kink-trap": "small-step GD stays left of 3/4 with excess >= 1/(4 n**(3/8))",
    "gd-drift": "full-batch iterates grow by eta*(T-1)/(4 sqrt(n)) on bad draws",
    "gd-vs-sgd-composite": "GD excess >= SGD excess across the (eta, T) grid",
    "multipass-gain": "selected excess shrinks like 1/sqrt(n*k)",
    "nn-erm-fail": "zero-training-loss point keeps 1/4 population excess",
}

PRIMARY_METRIC = {
    "sgd-rate": "excess",
    "sgd-vs-rerm": "separated",
    "gd-kink-trap": "gd_excess",
    "gd-drift": "bad",
    "gd-vs-sgd-composite": "gd_excess",
    "multipass-gain": "selected_excess",
    "nn-erm-fail": "erm_pop_excess",
}

MC_DENSE = 4096  # Monte-Carlo draws for dense-support population estimates


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    n: int = None
    d: int = None
    k: int = None
    eta: float = None
    T: int = None
    trials: int = None
    seed: int = 0
    schedule: str = "FIXED"
    loss: str = None
    workers: int = 1

    def resolved(self) -> "ExperimentSpec":
        if self.id not in EXPERIMENT_IDS:
            raise ParameterError(f"unknown experiment id {self.id!r}; known: {EXPERIMENT_IDS}")
        dflt = _DEFAULTS[self.id]
        values = {f: getattr(self, f) for f in ("n", "d", "k", "eta", "T", "trials", "loss")}
        for name, value in dflt.items():
            if values.get(name) is None:
                values[name] = value(values) if callable(value) else value
        return replace(self, **values)


_DEFAULTS = {
    "sgd-rate": dict(n=400, d=lambda v: 64, k=1, trials=50, loss="drift",
                     eta=lambda v: 1.0 / math.sqrt(v["n"]), T=lambda v: v["n"]),
    "sgd-vs-rerm": dict(n=12, d=lambda v: d_for(v["n"]), k=1, trials=100,
                        eta=lambda v: 1.0 / math.sqrt(v["n"]), T=lambda v: v["n"], loss="fa"),
    "gd-kink-trap": dict(n=4096, d=1, k=1, trials=50, T=100_000, loss="kink",
                         eta=lambda v: 1.0 / (128.0 * float(v["n"]) ** 1.25)),
    "gd-drift": dict(n=64, d=1, k=1, trials=2000, loss="drift",
                     eta=lambda v: 1.0 / math.sqrt(v["n"]), T=lambda v: v["n"]),
    "gd-vs-sgd-composite": dict(n=64, d=8, k=1, trials=20, loss="composite",
                                eta=lambda v: 1.0 / math.sqrt(v["n"]), T=lambda v: v["n"]),
    "multipass-gain": dict(n=64, d=64, k=4, trials=30, loss="fc",
                           eta=lambda v: None, T=lambda v: v["n"] // 2),
    "nn-erm-fail": dict(n=12, d=lambda v: d_for(v["n"]), k=1, trials=100, loss="nn",
                        eta=lambda v: 1.0 / 16.0, T=lambda v: 256),
}


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    trial: int
    seed: int
    n: int
    d: int
    k: int
    eta: float
    T: int
    metric: str
    value: float


def _derive_seed(master: int, *tokens) -> int:
    return int(Stream(master, *tokens).key)


def _row(metric, value, eta=None, T=None):
    return {"metric": metric, "value": float(value), "eta": eta, "T": T}


# ---------------------------------------------------------------------------
# trial bodies


def _trial_sgd_rate(spec: ExperimentSpec, t: int):
    n = spec.n
    if spec.loss == "drift":
        ds = make_dataset(spec_drift(), n, spec.seed, stream_ids=("sgd-rate", t))
        loss = DriftLoss(n)
        res = run_sgd(loss, ds, OptConfig(eta=spec.eta, T=spec.T), np.array([1.0]))
        return [_row("excess", pop_drift(float(res.averaged[0]), n).mean)]
    if spec.loss == "fa":
        ds = make_dataset(spec_D(0.1, 0.5, 1, spec.d), n, spec.seed, stream_ids=("sgd-rate", t))
        loss = FaLoss(spec.d)
        res = run_sgd(loss, ds, OptConfig(eta=spec.eta, T=spec.T), np.zeros(spec.d))
        model = model_fa(0.1, 0.5, 1, mc_samples=MC_DENSE, seed=_derive_seed(spec.seed, "mc", t))
        return [_row("excess", excess(res.averaged, model).mean)]
    if spec.loss == "nn":
        ds = make_dataset(spec_NN(spec.d), n, spec.seed, stream_ids=("sgd-rate", t))
        loss = NnLoss(spec.d)
        w1 = initial_point("UNIT_SPHERE", 2 * spec.d, seed=_derive_seed(spec.seed, "init", t))
        cfg = OptConfig(eta=spec.eta, T=spec.T, projection=BallSpec(w1.copy(), 1.0))
        res = run_sgd(loss, ds, cfg, w1)
        model = model_nn(mc_samples=MC_DENSE, seed=_derive_seed(spec.seed, "mc", t))
        return [_row("excess", excess(res.averaged, model).mean)]
    raise ParameterError(f"sgd-rate has no loss mode {spec.loss!r}")


def _trial_sgd_vs_rerm(spec: ExperimentSpec, t: int):
    ds = make_dataset(spec_D(0.1, 0.5, 1, spec.d), spec.n, spec.seed, stream_ids=("rerm", t))
    cert = separation_certificate(ds)
    rows = [_row("special_found", 0.0 if cert["inconclusive"] else 1.0)]
    if not cert["inconclusive"]:
        rows.append(_row("separated", 1.0 if cert["separated"] else 0.0))
        rows.append(_row("winner_excess_min", cert["min_winner_excess"]))
        rows.append(_row("fhat_e_jhat", cert["fhat_e_jhat"]))
    res = run_sgd(FaLoss(spec.d), ds, OptConfig(eta=spec.eta, T=spec.T), np.zeros(spec.d))
    model = model_fa(0.1, 0.5, 1, mc_samples=MC_DENSE, seed=_derive_seed(spec.seed, "mc", t))
    rows.append(_row("sgd_excess", excess(res.averaged, model).mean))
    return rows


def _gd_kink_scalar(loss: KinkLoss, ds, eta: float, T: int, w0: float = 0.0):
    """Full-batch GD on the scalar kink loss.  While the whole remaining run
    sits left of every kink the gradient is the constant -1/n^(3/8), so that
    stretch is advanced in closed form; a gradient of exactly zero pins the
    iterate for good (flat kink region, or past the hinge and every kink);
    everywhere else it steps one by one through the structured batch
    subgradient."""
    lin = loss.lin
    zone = float(np.min(ds.beta))  # no kink active left of the smallest location
    w, acc, t = w0, 0.0, 0
    while t < T:
        if w < zone and w + (T - t) * eta * lin < zone:
            steps = T - t
            acc += steps * w + eta * lin * (steps * (steps - 1) / 2.0)
            w += steps * eta * lin
            t = T
            break
        g = loss.batch_grad_scalar(w, ds)
        if g == 0.0:  # stationary: nothing will ever move again
            acc += (T - t) * w
            t = T
            break
        acc += w
        t += 1
        w -= eta * g
    return w, acc / T


def _trial_gd_kink_trap(spec: ExperimentSpec, t: int):
    n = spec.n
    ds = make_dataset(spec_kink(n), n, spec.seed, stream_ids=("kink", t))
    loss = KinkLoss(n)
    w_final, w_avg = _gd_kink_scalar(loss, ds, spec.eta, spec.T)
    lin = float(n) ** -0.375
    rows = [
        _row("gd_final", w_final),
        _row("gd_trapped", 1.0 if w_final <= 0.75 else 0.0),
        _row("gd_excess", pop_kink(w_avg, n).mean + lin),  # F* = -1/n^(3/8)
    ]
    # single-pass SGD at the large step size reaches the far side
    eta_sgd = 1.0 / math.sqrt(n)
    res = run_sgd(loss, ds, OptConfig(eta=eta_sgd, T=n), np.array([0.0]))
    wf = float(res.final[0])
    rows.append(_row("sgd_final", wf, eta=eta_sgd, T=n))
    rows.append(_row("sgd_reached", 1.0 if wf >= 0.75 else 0.0, eta=eta_sgd, T=n))
    return rows


def _trial_gd_drift(spec: ExperimentSpec, t: int):
    n = spec.n
    ds = make_dataset(spec_drift(), n, spec.seed, stream_ids=("drift", t))
    zsum = float(np.sum(ds.z.astype(np.float64)))
    bad = zsum <= -math.sqrt(n) / 2.0
    rows = [_row("bad", 1.0 if bad else 0.0)]
    if not bad:
        return rows
    eta, T = spec.eta, spec.T
    coef = 1.0 / (4.0 * math.sqrt(n)) + zsum / n
    w, acc = 0.25, 0.0
    for _ in range(T):
        acc += w
        w -= eta * coef * float(np.sign(w))
    w_avg = acc / T
    lb_final = 0.25 + (T - 1) * eta / (4.0 * math.sqrt(n))
    lb_avg = 0.25 + eta * (T - 1) / (8.0 * math.sqrt(n))
    rows.append(_row("iterate_lb_ok", 1.0 if w >= lb_final else 0.0))
    rows.append(_row("avg_lb_ok", 1.0 if w_avg >= lb_avg else 0.0))
    rows.append(_row("gd_excess", pop_drift(w_avg, n).mean))
    return rows


def composite_grid(n: int):
    """Published (eta, T) grid for the composite comparison."""
    etas = [n ** -1.5, 1.0 / (128.0 * float(n) ** 1.25), 1.0 / n, 1.0 / math.sqrt(n)]
    horizons = [max(1, n // 4), n, 4 * n]
    return etas, horizons


def _composite_parts(n: int, d: int):
    loss = sum_combine([DriftLoss(n), KinkLoss(n), FaLoss(d)])
    specs = [spec_drift(), spec_kink(n), spec_D(0.1, 0.5, 1, d)]
    return loss, specs


def _composite_excess(w, n: int, d: int) -> float:
    """Exact population excess of the composite point (F* = -1/n^(3/8))."""
    drift_part = pop_drift(float(w[0]), n).mean
    kink_part = pop_kink(float(w[1]), n).mean + float(n) ** -0.375
    fa_part = pop_fa(w[2:], 0.1, 0.5, 1).mean  # d is small: exact enumeration
    return drift_part + kink_part + fa_part


def _trial_gd_vs_sgd_composite(spec: ExperimentSpec, t: int):
    n, d = spec.n, spec.d
    loss, specs = _composite_parts(n, d)
    parts = [
        make_dataset(specs[i], n, spec.seed, stream_ids=("composite", t, i)) for i in range(3)
    ]
    ds = CompositeDataset(parts)
    w0 = np.zeros(loss.dim)
    w0[0] = 0.25  # drift slice needs a nonzero start for the lower bound to bind
    rows = []
    etas, horizons = composite_grid(n)
    for eta in etas:
        for T in horizons:
            res = run_gd(loss, ds, OptConfig(eta=eta, T=T), w0)
            rows.append(_row("gd_excess", _composite_excess(res.averaged, n, d), eta=eta, T=T))
    eta_sgd = 1.0 / math.sqrt(n)
    res = run_sgd(loss, ds, OptConfig(eta=eta_sgd, T=n), w0)
    rows.append(_row("sgd_excess", _composite_excess(res.averaged, n, d), eta=eta_sgd, T=n))
    return rows


def _trial_multipass_gain(spec: ExperimentSpec, t: int):
    n, d, k = spec.n, spec.d, spec.k
    ds = make_dataset(spec_C(k, d, 1), n, spec.seed, stream_ids=("multipass", t))
    loss = FcLoss(n, k, d)
    res = run_multipass(loss, ds, k, schedule=spec.schedule, eta_fixed=spec.eta, B=2.5)
    traversal_ok = all(
        abs(float(res.pass_end_points[s - 1][0]) - s / k) < 1e-9 for s in range(1, k + 1)
    )
    # the recorded step size: the fixed one, or the first pass of the schedule
    if spec.eta is not None:
        eta_used = spec.eta
    elif spec.schedule == "FIXED":
        eta_used = 1.0 / math.sqrt(k * n)
    else:
        eta_used = 1.0 / math.sqrt(n)
    model = model_fc(n, k, 1, mc_samples=MC_DENSE, seed=_derive_seed(spec.seed, "mc", t))
    rows = [
        _row("selected_excess", excess(res.selected, model).mean, eta=eta_used),
        _row("u_traversal_ok", 1.0 if traversal_ok else 0.0, eta=eta_used),
        _row("selected_pass", float(res.selected_pass), eta=eta_used),
    ]
    return rows


def _trial_nn_erm_fail(spec: ExperimentSpec, t: int):
    from .rerm import find_special_coordinate

    ds = make_dataset(spec_NN(spec.d), spec.n, spec.seed, stream_ids=("nn-erm", t))
    loss = NnLoss(spec.d)
    jhat = find_special_coordinate(ds, "LABEL_MATCH")
    rows = [_row("label_match_found", 0.0 if jhat is None else 1.0)]
    if jhat is not None:
        w = np.zeros(2 * spec.d)
        w[jhat] = 1.0
        w[spec.d + jhat] = 1.0
        rows.append(_row("erm_emp_loss", loss.empirical_value(w, ds)))
        model = model_nn(mc_samples=20_000, seed=_derive_seed(spec.seed, "mc", t))
        rows.append(_row("erm_pop_excess", excess(w, model).mean))
    # projected SGD arm at its own desk scale
    n_sgd, d_sgd = 256, 64
    ds2 = make_dataset(spec_NN(d_sgd), n_sgd, spec.seed, stream_ids=("nn-sgd", t))
    w1 = initial_point("UNIT_SPHERE", 2 * d_sgd, seed=_derive_seed(spec.seed, "init", t))
    cfg = OptConfig(eta=1.0 / math.sqrt(n_sgd), T=n_sgd, projection=BallSpec(w1.copy(), 1.0))
    res = run_sgd(NnLoss(d_sgd), ds2, cfg, w1)
    model2 = model_nn(mc_samples=MC_DENSE, seed=_derive_seed(spec.seed, "mc2", t))
    rows.append(_row("sgd_excess", excess(res.averaged, model2).mean, eta=cfg.eta, T=n_sgd))
    return rows


_TRIALS = {
    "sgd-rate": _trial_sgd_rate,
    "sgd-vs-rerm": _trial_sgd_vs_rerm,
    "gd-kink-trap": _trial_gd_kink_trap,
    "gd-drift": _trial_gd_drift,
    "gd-vs-sgd-composite": _trial_gd_vs_sgd_composite,
    "multipass-gain": _trial_multipass_gain,
    "nn-erm-fail": _trial_nn_erm_fail,
}


def _run_one(args):
    spec, t = args
    return t, _TRIALS[spec.id](spec, t)


def run_experiment(spec: ExperimentSpec):
    """All trials of one experiment; records come back in trial order no
    matter how many workers executed them."""
    spec = spec.resolved()
    jobs = [(spec, t) for t in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = dict(pool.map(_run_one, jobs, chunksize=1))
        ordered = [results[t] for t in range(spec.trials)]
    else:
        ordered = [_TRIALS[spec.id](spec, t) for t in range(spec.trials)]
    records = []
    for t, rows in enumerate(ordered):
        for row in rows:
            records.append(
                TrialRecord(
                    experiment=spec.id,
                    trial=t,
                    seed=spec.seed,
                    n=spec.n,
                    d=spec.d,
                    k=spec.k,
                    eta=row["eta"] if row["eta"] is not None else spec.eta,
                    T=row["T"] if row["T"] is not None else spec.T,
                    metric=row["metric"],
                    value=row["value"],
                )
            )
    return spec, records


def summarize(spec: ExperimentSpec, records) -> dict:
    """Fixed-key-order summary with per-metric mean and standard error."""
    metrics = {}
    for rec in records:
        metrics.setdefault(rec.metric, []).append(rec.value)
    out = {
        "experiment": spec.id,
        "params": {
            "n": spec.n, "d": spec.d, "k": spec.k, "eta": spec.eta, "T": spec.T,
            "trials": spec.trials, "seed": spec.seed, "schedule": spec.schedule,
            "loss": spec.loss,
        },
        "metrics": {},
        "target": TARGETS[spec.id],
    }
    for name in sorted(metrics):
        vals = np.array(metrics[name])
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        out["metrics"][name] = {"mean": float(vals.mean()), "stderr": se, "count": int(vals.size)}
    return out


def fit_loglog_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        raise ParameterError("need at least two positive points for a log-log fit")
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])
