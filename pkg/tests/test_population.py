import math

import numpy as np
import pytest

from scosep import (
    excess,
    fa_jensen_bound,
    pop_drift,
    pop_fa,
    pop_fb,
    pop_fc,
    pop_general_lb,
    pop_kink,
    pop_nn,
)
from scosep.errors import ConfigurationError, ParameterError
from scosep.population import (
    PopEstimate,
    PopModel,
    model_drift,
    model_fa,
    model_fb,
    model_general_lb,
    model_kink,
)


def _e(d, j, scale=1.0):
    v = np.zeros(d)
    v[j] = scale
    return v


def test_pop_fa_short_circuits():
    est = pop_fa(_e(5, 2), 0.1, 0.5, 3)  # w equals the anchor
    assert est.mean == 0.0 and est.method == "CLOSED_FORM"
    with pytest.raises(ParameterError):
        pop_fa(np.ones(3), 0.1, 0.5, 0, mc_samples=50)


def test_pop_fa_single_coordinate_exact():
    # one active coordinate: E||v . x|| = p*|v|, so risk = 2*delta*p*|v|
    est = pop_fa(np.array([1.0, 0.0]), 0.1, 0.5, 0)
    assert est.method == "CLOSED_FORM"
    assert est.mean == pytest.approx(0.1, abs=1e-15)
    # two coordinates by hand: patterns {}, {1}, {2}, {1,2}
    est = pop_fa(_e(4, 1) - _e(4, 0) + _e(4, 0), 0.1, 0.5, 1)  # w = e_1(0-based), anchor e_0
    byhand = 2 * 0.1 * (0.25 * 0 + 0.25 * 1 + 0.25 * 1 + 0.25 * math.sqrt(2))
    assert est.mean == pytest.approx(byhand, abs=1e-15)


def test_pop_fa_mc_vs_exact_and_jensen():
    rng = np.random.default_rng(0)
    w = np.zeros(30)
    w[:8] = rng.normal(size=8)  # sparse enough for the exact path
    exact = pop_fa(w, 0.1, 0.5, 1)
    dense = w + rng.normal(size=30) * 1e-9  # full support forces Monte Carlo
    mc = pop_fa(dense, 0.1, 0.5, 1, mc_samples=40_000, seed=3)
    assert mc.method == "MONTE_CARLO"
    assert abs(mc.mean - exact.mean) <= 3 * mc.half_width_95 + 1e-6
    jb = fa_jensen_bound(dense, 0.1, 0.5, 1)
    assert mc.mean >= jb - mc.half_width_95


def test_pop_fa_ci_shrinks_with_sqrt():
    w = np.linspace(0.1, 1.0, 40)  # dense support
    a = pop_fa(w, 0.1, 0.5, 0, mc_samples=4000, seed=1)
    b = pop_fa(w, 0.1, 0.5, 0, mc_samples=8000, seed=1)
    ratio = a.half_width_95 / b.half_width_95
    assert 1.3 <= ratio <= 1.5


def test_pop_fb_closed_forms():
    d = 6
    assert pop_fb(_e(d, 0), 0.1, 0.25, 1).mean == 1.0
    assert pop_fb(np.zeros(d), 0.1, 0.25, 1).mean == pytest.approx(1.05, abs=1e-15)
    assert pop_fb(_e(d, 0, 2.0), 0.1, 0.25, 1).mean == pytest.approx(0.05 + 16.0, abs=1e-12)


def test_pop_general_lb():
    d = 5
    c_n = 0.2
    assert pop_general_lb(np.zeros(d), "D1", c_n, 2).mean == 1.0
    assert pop_general_lb(_e(d, 2), "D2", c_n, 2).mean == pytest.approx(1 - c_n / 2, abs=1e-15)
    m = model_general_lb("D2", c_n, 2)
    assert m.fstar == pytest.approx(1 - c_n / 2)
    with pytest.raises(ParameterError):
        pop_general_lb(np.zeros(d), "D3", c_n, 0)


def test_pop_kink_drift():
    n = 16
    assert pop_kink(1.0, n).mean == pytest.approx(-(n ** -0.375), abs=1e-15)
    assert pop_kink(1.0, n).mean == model_kink(n).fstar
    assert pop_drift(2.0, n).mean == pytest.approx(2.0 / 16.0, abs=1e-15)
    assert pop_drift(0.0, n).mean == 0.0


def test_pop_fc_minimum_is_zero():
    n, k, d = 8, 2, 6
    w = np.zeros(1 + (n + 1) + d)
    w[0] = 1.0
    w[1 : n + 2] = -1.0 / math.sqrt(n + 1)
    w[n + 2] = 1.0  # tau = e_0 = anchor e_1 in the {0,1..d} encoding
    est = pop_fc(w, n, k, 1)
    assert est.method == "CLOSED_FORM"  # sparse tau goes through enumeration
    assert est.mean == pytest.approx(0.0, abs=1e-12)


def test_pop_nn_at_zero_and_fit():
    est = pop_nn(np.zeros(8), mc_samples=40_000, seed=2)
    assert abs(est.mean - 0.25) <= max(est.half_width_95 * 2, 0.01)
    # w1 = w2 = e_j has risk E|y - x_j| = 1/2
    w = np.zeros(8)
    w[1] = 1.0
    w[5] = 1.0
    est = pop_nn(w, mc_samples=40_000, seed=2)
    assert abs(est.mean - 0.5) <= max(2 * est.half_width_95, 0.01)


def test_excess():
    m = model_fb(0.1, 0.25, 1)
    e = excess(np.zeros(4), m)
    assert e.mean == pytest.approx(0.05, abs=1e-15)  # delta/2
    e = excess(_e(4, 0), m)
    assert e.mean == 0.0
    unknown = PopModel("anon", lambda w: PopEstimate(1.0, 0.0, 0, "CLOSED_FORM"))
    with pytest.raises(ConfigurationError):
        excess(np.zeros(2), unknown)


def test_excess_never_below_interval():
    m = model_fa(0.1, 0.5, 1, mc_samples=2000, seed=4)
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = rng.normal(size=25)
        e = excess(w, m)
        assert e.mean >= -e.half_width_95


def test_suboptimality_distance_implication():
    """Excess eps under the anchored loss pins the point within eps/(2 delta p)."""
    delta, p = 0.1, 0.5
    rng = np.random.default_rng(6)
    for _ in range(50):
        w = np.zeros(20)
        w[:6] = rng.normal(size=6) * 0.5
        est = pop_fa(w, delta, p, 1)
        dist = np.linalg.norm(w - _e(20, 0))
        assert dist <= est.mean / (2 * delta * p) + 1e-9


def test_convexity_probe_closed_forms():
    rng = np.random.default_rng(7)
    for model, dim in ((model_fb(0.1, 0.25, 1), 6), (model_general_lb("D1", 0.25, 0), 6),
                       (model_kink(16), 1), (model_drift(16), 1)):
        W1 = rng.uniform(-3, 3, size=(2000, dim))
        W2 = rng.uniform(-3, 3, size=(2000, dim))
        mid = model.risk_batch(0.5 * (W1 + W2))
        avg = 0.5 * (model.risk_batch(W1) + model.risk_batch(W2))
        assert np.all(mid <= avg + 1e-9)


def test_popestimate_invariant():
    with pytest.raises(ParameterError):
        PopEstimate(1.0, 0.1, 0, "CLOSED_FORM")
    with pytest.raises(ParameterError):
        PopEstimate(1.0, 0.0, 100, "MONTE_CARLO")


def test_general_lb_closed_forms_match_samplers():
    """Empirical means over the two indistinguishable distributions agree with
    the closed forms."""
    from scosep.distributions import make_dataset, spec_D2, spec_Dbar
    from scosep.losses import FbLoss

    d, c_n, j_tilde = 6, 0.2, 2
    rng = np.random.default_rng(8)
    w = rng.normal(size=d) * 0.8
    fb = FbLoss(d, c_n)
    # D1 is the fair-coin mask with a zero anchor
    ds1 = make_dataset(spec_Dbar(0.3, c_n, 0, d), 40_000, 11)
    emp1 = fb.empirical_value(w, ds1)
    assert emp1 == pytest.approx(pop_general_lb(w, "D1", c_n, j_tilde).mean, abs=0.01)
    ds2 = make_dataset(spec_D2(j_tilde, d), 40_000, 12)
    emp2 = fb.empirical_value(w, ds2)
    assert emp2 == pytest.approx(pop_general_lb(w, "D2", c_n, j_tilde).mean, abs=0.01)
