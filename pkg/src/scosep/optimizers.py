"""Training procedures: single-pass SGD, full-batch GD, and multi-pass SGD
with held-out validation.  All runs are strictly sequential in the iterate;
parallelism only ever happens across trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataExhaustedError, ParameterError
from .rng import Stream
from .vecspace import BallSpec, project_ball

TRACE_CAP = 4096


@dataclass(frozen=True)
class OptConfig:
    """Hyperparameters for a single run."""

    eta: float
    T: int
    k: int = 1
    seed: int = 0
    averaging: str = "AVERAGE_ALL"  # or LAST
    projection: BallSpec = None     # applied after every update when set
    trace: bool = False

    def __post_init__(self):
        if not (self.eta >= 0.0 and math.isfinite(self.eta)):
            raise ParameterError(f"eta must be finite and >= 0, got {self.eta}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")


@dataclass
class RunResult:
    final: np.ndarray
    averaged: np.ndarray
    per_pass_averages: list = None
    selected: np.ndarray = None
    selected_pass: int = None
    pass_end_points: list = None
    iterate_trace: list = None

    def point(self, averaging: str) -> np.ndarray:
        return self.final if averaging == "LAST" else self.averaged


def _trace_append(trace, stride_state, w):
    # keep at most TRACE_CAP points by doubling the stride when full
    stride, count = stride_state
    if count % stride == 0:
        trace.append(w.copy())
        if len(trace) > TRACE_CAP:
            trace[:] = trace[::2]
            stride *= 2
    return stride, count + 1


def run_sgd(loss, dataset, cfg: OptConfig, w1) -> RunResult:
    """One pass of single-sample subgradient steps in dataset order."""
    T = cfg.T
    if T > len(dataset):
        raise DataExhaustedError(f"T={T} exceeds dataset size {len(dataset)}")
    w = np.array(w1, dtype=float, copy=True)
    acc = np.zeros_like(w)
    trace = [] if cfg.trace else None
    stride_state = (1, 0)
    for i in range(T):
        acc += w
        if trace is not None:
            stride_state = _trace_append(trace, stride_state, w)
        g = loss.eval_idx(w, dataset, i).subgrad
        w = w - cfg.eta * g
        if cfg.projection is not None:
            w = project_ball(w, cfg.projection)
    return RunResult(final=w, averaged=acc / T, iterate_trace=trace)


def run_gd(loss, dataset, cfg: OptConfig, w1) -> RunResult:
    """Full-batch subgradient descent on the empirical risk."""
    w = np.array(w1, dtype=float, copy=True)
    acc = np.zeros_like(w)
    trace = [] if cfg.trace else None
    stride_state = (1, 0)
    for _ in range(cfg.T):
        acc += w
        if trace is not None:
            stride_state = _trace_append(trace, stride_state, w)
        g = loss.empirical_subgrad(w, dataset)
        w = w - cfg.eta * g
        if cfg.projection is not None:
            w = project_ball(w, cfg.projection)
    return RunResult(final=w, averaged=acc / cfg.T, iterate_trace=trace)


def run_multipass(
    loss,
    dataset,
    k: int,
    schedule: str = "PER_PASS",
    eta_fixed: float = None,
    B: float = 1.0,
    w1=None,
) -> RunResult:
    """k ordered passes over the first half of the data with an epoch-start
    ball projection, cumulative-average candidates after each pass, and
    held-out selection on the second half (ties to the earliest pass).

    PER_PASS uses eta_j = 1/sqrt(n*j); FIXED uses eta = 1/sqrt(k*n) (or the
    supplied eta_fixed) for every pass.
    """
    n = len(dataset)
    if n % 2 != 0:
        raise ParameterError(f"dataset size must be even, got {n}")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if schedule not in ("PER_PASS", "FIXED"):
        raise ParameterError(f"unknown schedule {schedule!r}")
    m = n // 2
    w = np.zeros(loss.dim) if w1 is None else np.array(w1, dtype=float, copy=True)
    ball = BallSpec(w.copy(), B)
    acc = np.zeros_like(w)
    t = 0
    per_pass, pass_ends = [], []
    for j in range(1, k + 1):
        w = project_ball(w, ball)
        eta_j = (1.0 / math.sqrt(n * j)) if schedule == "PER_PASS" else (
            eta_fixed if eta_fixed is not None else 1.0 / math.sqrt(k * n)
        )
        for i in range(m):
            acc += w
            t += 1
            g = loss.eval_idx(w, dataset, i).subgrad
            w = w - eta_j * g
        per_pass.append(acc / t)
        pass_ends.append(w.copy())

    # validation on the held-out half
    holdout = range(m, n)
    best_idx, best_val = 0, None
    for j, cand in enumerate(per_pass):
        val = _validation_value(loss, cand, dataset, holdout)
        if best_val is None or val < best_val:
            best_idx, best_val = j, val
    return RunResult(
        final=w,
        averaged=per_pass[-1],
        per_pass_averages=per_pass,
        selected=per_pass[best_idx],
        selected_pass=best_idx + 1,
        pass_end_points=pass_ends,
    )


def _validation_value(loss, w, dataset, indices) -> float:
    vals = [loss.eval_idx(w, dataset, i).value for i in indices]
    return float(np.mean(vals))


def initial_point(mode: str, dim: int, seed: int = 0, loss_kind: str = None) -> np.ndarray:
    """ZERO, UNIT_SPHERE (normalized Gaussian), or LOSS_DEFAULT, which is the
    zero vector for every construction except the diagonal net (sphere)."""
    if mode == "LOSS_DEFAULT":
        mode = "UNIT_SPHERE" if loss_kind == "NN" else "ZERO"
    if mode == "ZERO":
        return np.zeros(dim)
    if mode == "UNIT_SPHERE":
        g = Stream(seed, "init").gaussians(0, dim)
        nrm = float(np.sqrt(g @ g))
        if nrm == 0.0:  # unreachable in practice; Box-Muller never yields all-zeros
            raise ConfigurationError("degenerate Gaussian draw")
        return g / nrm
    raise ParameterError(f"unknown initial point mode {mode!r}")
