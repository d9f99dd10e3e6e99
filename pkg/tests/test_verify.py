import json

import pytest

from scosep.errors import ParameterError
from scosep.verify import (
    ORACLES,
    balls_and_bins_k,
    oracle_balls_and_bins,
    oracle_bounded_iterates,
    oracle_convexity,
    oracle_grad_fd,
    oracle_linearizable_nn,
    oracle_lipschitz_fb,
    oracle_minimizer_bound,
    oracle_variance_kink,
    reports_json,
    reports_table,
    run_oracles,
)


def test_bounded_iterates_small():
    r = oracle_bounded_iterates(trials=5000, seed=1)
    assert r.verdict == "PASS"
    assert r.details["max_successor_norm"] <= 2.5 + 1e-12


def test_lipschitz_small():
    r = oracle_lipschitz_fb(trials=5000, seed=1)
    assert r.verdict == "PASS"
    assert r.details["max_subgrad_norm"] <= 70.0


def test_variance_kink_small():
    r = oracle_variance_kink(mc=2_000_000, n=64, seed=1)
    assert r.verdict == "PASS"
    assert r.details["variance_far_field"] == 0.0
    assert 0.2 <= r.details["variance_at_kink"] <= 0.26


def test_minimizer_bound():
    r = oracle_minimizer_bound(seed=1)
    assert r.verdict == "PASS"
    assert r.details["min_margin"] > 0


def test_balls_and_bins_threshold_and_k():
    assert balls_and_bins_k(4096) == 34
    r = oracle_balls_and_bins(n=4096, trials=200, seed=1)
    assert r.threshold == pytest.approx(1 - 2 / 4096**0.25 - 0.05)
    assert r.verdict == "PASS"


def test_balls_and_bins_vacuous():
    r = oracle_balls_and_bins(n=1, trials=10, seed=0)
    assert r.verdict == "INCONCLUSIVE"


def test_linearizable_small():
    r = oracle_linearizable_nn(points=50, mc=500, seed=2)
    assert r.verdict == "PASS"


def test_convexity_small():
    r = oracle_convexity(pairs=500, seed=2)
    assert r.verdict == "PASS"


def test_grad_fd_small():
    r = oracle_grad_fd(points=300, seed=2)
    assert r.verdict == "PASS"
    assert set(r.details) == {"fa", "fb", "fn", "kink", "drift", "fc", "nn", "sum", "grid"}
    for name, info in r.details.items():
        assert info["failed"] == 0, name
        assert info["checked"] > 0, name


def test_reports_reproducible():
    a = run_oracles(["balls-and-bins"], seed=7)
    b = run_oracles(["balls-and-bins"], seed=7)
    assert reports_json(a) == reports_json(b)
    assert reports_table(a) == reports_table(b)
    c = run_oracles(["balls-and-bins"], seed=8)
    assert reports_json(a) != reports_json(c)


def test_report_shape():
    (r,) = run_oracles(["balls-and-bins"], seed=3)
    blob = json.loads(reports_json([r]))[0]
    assert list(blob) == ["oracle", "trials", "passes", "threshold", "verdict", "slack", "seed", "details"]
    assert blob["slack"] == 0.05


def test_unknown_oracle_id():
    with pytest.raises(ParameterError):
        run_oracles(["nope"])


def test_registry_complete():
    assert set(ORACLES) == {
        "bounded-iterates",
        "lipschitz-fb",
        "variance-kink",
        "minimizer-bound",
        "balls-and-bins",
        "linearizable-nn",
        "convexity",
        "grad-fd",
    }
