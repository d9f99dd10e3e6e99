"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every threshold is pinned here; the experiment and oracle modules expose the
raw numbers.  Run with `pytest tests/test_acceptance.py -s` to see the lines.
"""

import time

import numpy as np

from scosep import d_for
from scosep.experiments import ExperimentSpec, fit_loglog_slope, run_experiment
from scosep.expcli import main
from scosep.relunet import (
    PiecewiseLinear,
    approx_smooth,
    build_fa_network,
    build_fb_network,
    interpolation_knots,
    n_intervals,
    pwl_to_relu,
)
from scosep.verify import reports_json, run_oracles

SEED = 20260810


def _report(num, name, ok, detail):
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'}: {name} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


def _means(spec_id, metric, records):
    vals = [r.value for r in records if r.metric == metric]
    return vals


def test_criterion_1_sgd_rate_slope():
    t0 = time.monotonic()
    ns = [64, 256, 1024, 4096]
    means = []
    for n in ns:
        spec, records = run_experiment(
            ExperimentSpec(id="sgd-rate", n=n, trials=50, seed=SEED)
        )
        means.append(np.mean(_means("sgd-rate", "excess", records)))
    slope = fit_loglog_slope(ns, means)
    elapsed = time.monotonic() - t0
    ok = -0.65 <= slope <= -0.35 and elapsed < 60
    _report(1, "single-pass rate slope", ok, f"slope={slope:.3f}, {elapsed:.1f}s")


def test_criterion_2_rerm_separation():
    t0 = time.monotonic()
    spec, records = run_experiment(ExperimentSpec(id="sgd-vs-rerm", trials=100, seed=SEED))
    assert spec.n == 12 and spec.d == 9432
    found = _means(spec.id, "special_found", records)
    sep = _means(spec.id, "separated", records)
    sgd = _means(spec.id, "sgd_excess", records)
    freq_found = np.mean(found)
    freq_sep = np.mean(sep)  # rows exist only when the coordinate was found
    sgd_mean = np.mean(sgd)
    elapsed = time.monotonic() - t0
    ok = freq_found >= 0.85 and freq_sep >= 0.6 and sgd_mean <= 0.3 and elapsed < 300
    _report(
        2,
        "restricted RERM fails while SGD learns",
        ok,
        f"found={freq_found:.2f}, separated|found={freq_sep:.2f}, "
        f"sgd_excess={sgd_mean:.3f}, {elapsed:.1f}s",
    )


def test_criterion_3_kink_trap():
    t0 = time.monotonic()
    n = 4096
    spec, records = run_experiment(ExperimentSpec(id="gd-kink-trap", trials=50, seed=SEED))
    assert spec.n == n and spec.T == 100_000
    assert spec.eta == 1.0 / (128.0 * n**1.25)
    trapped = np.array(_means(spec.id, "gd_trapped", records))
    gd_excess = np.array(_means(spec.id, "gd_excess", records))
    reached = np.array(_means(spec.id, "sgd_reached", records))
    freq_trap = trapped.mean()
    floor = 1.0 / (4.0 * n**0.375)
    cond_ok = bool(np.all(gd_excess[trapped == 1.0] >= floor))
    freq_reach = reached.mean()
    elapsed = time.monotonic() - t0
    ok = freq_trap >= 0.6 and cond_ok and freq_reach >= 0.9 and elapsed < 180
    _report(
        3,
        "small-step trap vs large-step escape",
        ok,
        f"trap={freq_trap:.2f}, min_cond_excess={gd_excess[trapped == 1.0].min():.4f} "
        f">= {floor:.4f}, reach={freq_reach:.2f}, {elapsed:.1f}s",
    )


def test_criterion_4_drift_lower_bound():
    t0 = time.monotonic()
    spec, records = run_experiment(ExperimentSpec(id="gd-drift", trials=2000, seed=SEED))
    assert spec.n == 64
    bad = _means(spec.id, "bad", records)
    it_ok = _means(spec.id, "iterate_lb_ok", records)
    avg_ok = _means(spec.id, "avg_lb_ok", records)
    freq_bad = np.mean(bad)
    elapsed = time.monotonic() - t0
    ok = (
        freq_bad >= 0.012
        and len(it_ok) == int(sum(bad))
        and all(v == 1.0 for v in it_ok)
        and all(v == 1.0 for v in avg_ok)
        and elapsed < 60
    )
    _report(
        4,
        "drift growth inequality on bad draws",
        ok,
        f"bad={freq_bad:.3f}, exact holds on {len(it_ok)}/{len(it_ok)} draws, {elapsed:.1f}s",
    )


def test_criterion_5_multipass_gain():
    t0 = time.monotonic()
    excesses = {}
    traversal_all = True
    for k in (1, 4, 16):
        spec, records = run_experiment(
            ExperimentSpec(id="multipass-gain", k=k, trials=30, seed=SEED, schedule="FIXED")
        )
        assert spec.n == 64 and spec.d == 64
        excesses[k] = float(np.mean(_means(spec.id, "selected_excess", records)))
        traversal_all &= all(v == 1.0 for v in _means(spec.id, "u_traversal_ok", records))
    decreasing = excesses[1] > excesses[4] > excesses[16]
    gain = excesses[16] <= 0.6 * excesses[1]
    elapsed = time.monotonic() - t0
    ok = traversal_all and decreasing and gain and elapsed < 180
    _report(
        5,
        "multi-pass gain",
        ok,
        f"excess: k1={excesses[1]:.4f} k4={excesses[4]:.4f} k16={excesses[16]:.4f}, "
        f"traversal={traversal_all}, {elapsed:.1f}s",
    )


def test_criterion_6_nn_separation():
    t0 = time.monotonic()
    spec, records = run_experiment(ExperimentSpec(id="nn-erm-fail", trials=100, seed=SEED))
    assert spec.n == 12 and spec.d == d_for(12)
    found = np.mean(_means(spec.id, "label_match_found", records))
    emp = _means(spec.id, "erm_emp_loss", records)
    pop = _means(spec.id, "erm_pop_excess", records)
    sgd = np.mean(_means(spec.id, "sgd_excess", records))
    emp_exact = all(v == 0.0 for v in emp)
    pop_mean = float(np.mean(pop))
    elapsed = time.monotonic() - t0
    ok = (
        found >= 0.85
        and emp_exact
        and abs(pop_mean - 0.25) <= 0.01
        and sgd <= 0.3
        and elapsed < 180
    )
    _report(
        6,
        "diagonal-net zero-loss point keeps constant excess",
        ok,
        f"found={found:.2f}, emp_loss_exact={emp_exact}, pop_excess={pop_mean:.4f}, "
        f"sgd_excess={sgd:.4f}, {elapsed:.1f}s",
    )


def test_criterion_7_oracle_suite():
    t0 = time.monotonic()
    reports = run_oracles(seed=SEED)
    by = {r.oracle: r for r in reports}
    checks = {
        "bounded-iterates": by["bounded-iterates"].verdict == "PASS"
        and by["bounded-iterates"].trials == 100_000,
        "lipschitz-fb": by["lipschitz-fb"].verdict == "PASS"
        and by["lipschitz-fb"].trials == 100_000,
        "variance-kink": by["variance-kink"].verdict == "PASS"
        and by["variance-kink"].details["variance_at_kink"] <= 0.26,
        "convexity": by["convexity"].verdict == "PASS",
        "grad-fd": by["grad-fd"].verdict == "PASS",
        "balls-and-bins": by["balls-and-bins"].verdict == "PASS"
        and by["balls-and-bins"].details["frequency"] >= 0.70,
        "linearizable-nn": by["linearizable-nn"].verdict == "PASS",
        "minimizer-bound": by["minimizer-bound"].verdict == "PASS",
    }
    elapsed = time.monotonic() - t0
    ok = all(checks.values()) and elapsed < 300
    _report(
        7,
        "oracle suite",
        ok,
        f"{sum(checks.values())}/8 oracles pass, {elapsed:.1f}s",
    )


def test_criterion_8_relu_compiler():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED)
    exact = True
    for _ in range(100):
        K = int(rng.integers(1, 8))
        endpoints = np.sort(rng.uniform(-2, 2, K))
        if np.any(np.diff(endpoints) == 0):
            continue
        slopes = rng.uniform(-4, 4, K + 1)
        f = PiecewiseLinear(tuple(endpoints), float(rng.normal()), tuple(slopes))
        h = pwl_to_relu(f)
        xs = rng.uniform(-3, 3, 1000)
        exact &= bool(np.max(np.abs(h(xs) - f(xs))) <= 1e-12 * max(1.0, np.abs(slopes).max() * 5))

    h = approx_smooth(lambda x: x * x, lambda x: 2 * x, 0.0, 1.0, L=2.0, alpha=2.0, eps=0.1)
    intervals_ok = n_intervals(h) == 20
    grid = np.linspace(0, 1, 2001)
    value_ok = bool(np.max(np.abs(h(grid) - grid**2)) <= 0.1)
    knots = interpolation_knots(h)
    mids = 0.5 * (knots[:-1] + knots[1:])
    deriv_ok = bool(np.max(np.abs(h.derivative(mids) - 2 * mids)) <= 0.1)

    from scosep import Stream, fa_eval, fb_eval
    from scosep.distributions import SampleA, SampleB
    from scosep.vecspace import BitMask

    st = Stream(SEED)
    d = 6
    fa_net = build_fa_network(d)
    fb_net = build_fb_network(d, 0.2)
    max_fa = max_fb = 0.0
    for i in range(1000):
        w = 2.0 * (2.0 * st.uniforms(i * 32, d) - 1.0)
        bits = st.bits(i * 32 + 8, d, 0.5)
        alpha = int(st.integers(i * 32 + 20, 1, 0, d + 1)[0])
        za = SampleA(BitMask.from_bools(bits), 1 if i % 2 else -1, alpha)
        zb = SampleB(BitMask.from_bools(bits), alpha)
        max_fa = max(max_fa, abs(fa_eval(w, za).value - fa_net.loss(w, za)))
        max_fb = max(max_fb, abs(fb_eval(w, zb, 0.2).value - fb_net.loss(w, zb)))
    nets_ok = max_fa <= 1e-12 and max_fb <= 1e-12
    elapsed = time.monotonic() - t0
    ok = exact and intervals_ok and value_ok and deriv_ok and nets_ok and elapsed < 30
    _report(
        8,
        "relu compiler and restricted nets",
        ok,
        f"pwl_exact={exact}, intervals={n_intervals(h)}, nets max err "
        f"({max_fa:.2e}, {max_fb:.2e}), {elapsed:.1f}s",
    )


def test_criterion_9_reproducibility(tmp_path):
    runs = []
    for name, workers in (("a", 1), ("b", 2), ("c", 1)):
        out = tmp_path / name
        rc = main(
            [
                "run", "sgd-vs-rerm", "--trials", "6", "--seed", "77",
                "--workers", str(workers), "--out", str(out),
            ]
        )
        assert rc == 0
        runs.append((out.with_suffix(".csv").read_bytes(), out.with_suffix(".json").read_bytes()))
    csv_same = runs[0][0] == runs[1][0] == runs[2][0]
    json_same = runs[0][1] == runs[1][1] == runs[2][1]
    v1 = reports_json(run_oracles(["balls-and-bins", "convexity"], seed=5))
    v2 = reports_json(run_oracles(["balls-and-bins", "convexity"], seed=5))
    verify_same = v1 == v2
    ok = csv_same and json_same and verify_same
    _report(
        9,
        "byte-identical outputs across repeats and worker counts",
        ok,
        f"csv={csv_same}, json={json_same}, verify={verify_same}",
    )
