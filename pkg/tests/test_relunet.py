import json
import math

import numpy as np
import pytest

from scosep import (
    BitMask,
    PiecewiseLinear,
    Stream,
    approx_smooth,
    build_fa_network,
    build_fb_network,
    diag_forward,
    fa_eval,
    fb_eval,
    n_intervals,
    pwl_to_relu,
)
from scosep.distributions import SampleA, SampleB
from scosep.errors import DimensionError, ParameterError
from scosep.relunet import interpolation_knots


def test_pwl_abs():
    f = PiecewiseLinear((0.0,), 0.0, (-1.0, 1.0))
    h = pwl_to_relu(f)
    xs = np.random.default_rng(0).uniform(-5, 5, 1000)
    assert np.max(np.abs(h(xs) - np.abs(xs))) <= 1e-12
    assert len(h.terms) == 3  # K + 2


def test_pwl_identity():
    f = PiecewiseLinear((0.0,), 0.0, (1.0, 1.0))
    h = pwl_to_relu(f)
    xs = np.linspace(-3, 3, 101)
    assert np.max(np.abs(h(xs) - xs)) <= 1e-12


def test_pwl_random_instances_exact():
    rng = np.random.default_rng(1)
    for _ in range(100):
        K = int(rng.integers(1, 9))
        endpoints = np.sort(rng.uniform(-2, 2, K))
        while np.any(np.diff(endpoints) == 0):
            endpoints = np.sort(rng.uniform(-2, 2, K))
        slopes = rng.uniform(-4, 4, K + 1)
        f = PiecewiseLinear(tuple(endpoints), float(rng.normal()), tuple(slopes))
        h = pwl_to_relu(f)
        assert len(h.terms) == K + 2
        maxslope = np.max(np.abs(slopes))
        assert all(abs(c) <= 2 * maxslope + 1e-12 for c, _, _ in h.terms)
        xs = rng.uniform(-3, 3, 1000)
        assert np.max(np.abs(h(xs) - f(xs))) <= 1e-12 * max(1, maxslope * 3)


def test_pwl_validation():
    with pytest.raises(ParameterError):
        PiecewiseLinear((1.0, 1.0), 0.0, (0.0, 1.0, 2.0))
    with pytest.raises(DimensionError):
        PiecewiseLinear((0.0, 1.0), 0.0, (0.0, 1.0))


def test_approx_smooth_square():
    h = approx_smooth(lambda x: x * x, lambda x: 2 * x, 0.0, 1.0, L=2.0, alpha=2.0, eps=0.1)
    assert n_intervals(h) == 20
    assert len(h.terms) == 21  # n + 1 relu units
    grid = np.linspace(0, 1, 2001)
    assert np.max(np.abs(h(grid) - grid**2)) <= 0.1
    knots = interpolation_knots(h)
    mids = 0.5 * (knots[:-1] + knots[1:])
    assert np.max(np.abs(h.derivative(mids) - 2 * mids)) <= 0.1


def test_approx_smooth_constant():
    h = approx_smooth(lambda x: 1.5, lambda x: 0.0, 0.0, 1.0, L=0.5, alpha=0.5, eps=0.3)
    xs = np.linspace(0, 1, 101)
    assert np.max(np.abs(h(xs) - 1.5)) <= 1e-12


def test_approx_smooth_sqrt_shift():
    f = lambda x: math.sqrt(x + 1.0)
    fp = lambda x: 0.5 / math.sqrt(x + 1.0)
    h = approx_smooth(f, fp, 0.0, 1.0, L=0.5, alpha=0.25, eps=0.05)
    grid = np.linspace(0, 1, 1001)
    ref = np.sqrt(grid + 1.0)
    assert np.max(np.abs(h(grid) - ref)) <= 0.05


def test_fa_network_matches_loss():
    d = 7
    net = build_fa_network(d)
    st = Stream(3)
    fa_vals = []
    for i in range(1000):
        w = 2.0 * (2.0 * st.uniforms(i * 32, d) - 1.0)
        bits = st.bits(i * 32 + 8, d, 0.5)
        alpha = int(st.integers(i * 32 + 20, 1, 0, d + 1)[0])
        y = 1 if i % 2 else -1
        z = SampleA(BitMask.from_bools(bits), y, alpha)
        direct = fa_eval(w, z).value
        vianet = net.loss(w, z)
        fa_vals.append(abs(direct - vianet))
    assert max(fa_vals) <= 1e-12


def test_fa_network_zero_at_anchor():
    net = build_fa_network(3)
    z = SampleA(BitMask.from_bools([True, True, False]), 1, 2)
    w = np.array([0.0, 1.0, 0.0])
    assert net.loss(w, z) == 0.0


def test_fb_network_matches_loss():
    d = 6
    c_n = 0.2
    net = build_fb_network(d, c_n)
    st = Stream(4)
    errs = []
    for i in range(1000):
        w = 2.0 * (2.0 * st.uniforms(i * 32, d) - 1.0)
        bits = st.bits(i * 32 + 10, d, 0.5)
        alpha = int(st.integers(i * 32 + 20, 1, 0, d + 1)[0])
        z = SampleB(BitMask.from_bools(bits), alpha)
        errs.append(abs(fb_eval(w, z, c_n).value - net.loss(w, z)))
    assert max(errs) <= 1e-12
    with pytest.raises(ParameterError):
        build_fb_network(4, 0.3)


def test_diag_forward():
    assert diag_forward([1.0, 0.0], [1.0, 0.0], [1.0, 0.0]) == 1.0
    assert diag_forward([2.0, 3.0], [5.0, 7.0], [0.0, 0.0]) == 0.0
    assert diag_forward([1.0], [-2.0], [1.0]) == 0.0  # outer relu clips
    with pytest.raises(DimensionError):
        diag_forward([1.0, 2.0], [1.0], [1.0, 0.0])


def test_json_serialization():
    h = pwl_to_relu(PiecewiseLinear((0.0,), 0.0, (-1.0, 1.0)))
    data = json.loads(h.to_json())
    assert data["bias"] == 0.0 and len(data["terms"]) == 3
    net = build_fb_network(3, 0.1)
    blob = json.loads(net.to_json())
    assert blob["name"] == "fb" and blob["c_n"] == 0.1 and len(blob["layers"]) == 4
