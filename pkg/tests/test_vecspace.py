import numpy as np
import pytest

from scosep import BallSpec, BitMask, argmax_coord, hadamard, norm, norm_sq, project_ball
from scosep.errors import DimensionError, ParameterError


def test_hadamard_examples():
    assert np.array_equal(hadamard(np.array([1.0, 2, 3]), np.array([1.0, 0, 1])), [1, 0, 3])
    assert np.array_equal(hadamard(np.zeros(2), np.ones(2)), [0, 0])
    assert np.array_equal(hadamard(np.array([-1.5, 4.0]), np.array([0.0, 1.0])), [0, 4])


def test_hadamard_bitmask_and_identity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = int(rng.integers(1, 80))
        w = rng.normal(size=d)
        mask = BitMask.from_bools(rng.random(d) < 0.5)
        assert np.array_equal(hadamard(w, mask), w * mask.to_dense())
        ones = BitMask.from_bools(np.ones(d, dtype=bool))
        assert np.array_equal(hadamard(w, ones), w)


def test_hadamard_length_mismatch():
    with pytest.raises(DimensionError):
        hadamard(np.ones(3), np.ones(4))


def test_norms():
    assert norm(np.array([3.0, 4.0])) == 5.0
    assert norm(np.zeros(7)) == 0.0
    e1 = np.zeros(11)
    e1[0] = 1.0
    assert norm(e1) == 1.0
    assert norm_sq(np.array([1.0, 2.0])) == 5.0


def test_project_ball_examples():
    ball = BallSpec(np.zeros(2), 1.0)
    inside = np.array([0.3, 0.0])
    assert np.array_equal(project_ball(inside, ball), inside)
    out = project_ball(np.array([3.0, 4.0]), ball)
    assert np.allclose(out, [0.6, 0.8], atol=1e-15)
    degenerate = BallSpec(np.array([1.0, 0.0]), 0.0)
    assert np.array_equal(project_ball(np.array([2.0, 0.0]), degenerate), [1.0, 0.0])


def test_project_ball_negative_radius():
    with pytest.raises(ParameterError):
        BallSpec(np.zeros(2), -1.0)
    ball = BallSpec.__new__(BallSpec)
    object.__setattr__(ball, "center", np.zeros(2))
    object.__setattr__(ball, "radius", -0.5)
    with pytest.raises(ParameterError):
        project_ball(np.ones(2), ball)


def test_project_ball_idempotent_bit_exact():
    rng = np.random.default_rng(1)
    for _ in range(200):
        d = int(rng.integers(1, 12))
        w = rng.normal(size=d) * 3
        ball = BallSpec(rng.normal(size=d), float(rng.random() * 2))
        p1 = project_ball(w, ball)
        p2 = project_ball(p1, ball)
        assert np.array_equal(p1, p2)


def test_project_ball_nonexpansive_toward_interior():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        d = int(rng.integers(1, 6))
        center = rng.normal(size=d)
        radius = float(rng.random() * 2 + 0.1)
        w = center + rng.normal(size=d) * 3
        u = rng.normal(size=d)
        nu = np.linalg.norm(u)
        interior = center if nu == 0 else center + (radius * rng.random()) * u / nu
        proj = project_ball(w, BallSpec(center, radius))
        assert np.linalg.norm(proj - interior) <= np.linalg.norm(w - interior) + 1e-12


def test_project_result_within_radius():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        w = rng.normal(size=4) * 5
        ball = BallSpec(rng.normal(size=4), float(rng.random()))
        proj = project_ball(w, ball)
        assert np.linalg.norm(proj - ball.center) <= ball.radius + 1e-12


def test_argmax_coord():
    assert argmax_coord(np.array([1.0, 3.0, 3.0])) == 1  # ties to the first (0-based)
    assert argmax_coord(np.array([-1.0, -2.0])) == 0
    assert argmax_coord(np.full(5, 2.5)) == 0
    with pytest.raises(DimensionError):
        argmax_coord(np.array([]))


def test_bitmask_roundtrip():
    rng = np.random.default_rng(4)
    for d in (1, 7, 64, 65, 130):
        bits = rng.random(d) < 0.4
        m = BitMask.from_bools(bits)
        assert len(m) == d
        assert np.array_equal(m.to_bools(), bits)
        assert m.count() == int(bits.sum())
        assert all(m[j] == int(bits[j]) for j in range(d))
