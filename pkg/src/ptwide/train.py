"""Full-batch gradient descent on W with scaling-dependent step size.

``run_training`` evolves the pre-activation matrix H directly through the
n x n kernel matrix of the (fixed) embedding instead of re-multiplying
W by Phi every step; the two are the same recursion written in different
bases, and a cross-check against the explicit forward/grad/step path is
part of the test suite. W itself is reconstructed at the end from the
accumulated per-neuron signals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import active_fraction, shrink_interval
from .embedding import embed_batch
from .errors import InvalidConfigError, NumericError
from .model import ForwardState, ModelConfig, Parameters, init_params

DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    delta: float = 1.0
    record_every: int = 1
    snapshot_steps: tuple[int, ...] = ()
    record_eta: bool = True

    def __post_init__(self):
        if self.steps < 0:
            raise InvalidConfigError("steps must be >= 0")
        if self.delta <= 0:
            raise InvalidConfigError("delta must be positive")
        if self.record_every < 1:
            raise InvalidConfigError("record_every must be >= 1")


@dataclass
class TrainingTrace:
    steps: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    eta_min: list[float] = field(default_factory=list)
    eta_per_point: list[np.ndarray] = field(default_factory=list)
    test_errors: list[float] = field(default_factory=list)
    snapshots: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    probe_snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    eta_tilde0: float = float("nan")
    interval: tuple[float, float] = (float("nan"), float("nan"))
    c_hat: float = float("nan")
    monotone_violations: list[int] = field(default_factory=list)
    diverged: bool = False
    final_params: Parameters | None = None


def loss(f_vals: np.ndarray, y: np.ndarray) -> float:
    """Empirical squared loss 1/2 sum (f_a - y_a)^2."""
    r = np.asarray(f_vals, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return 0.5 * float(r @ r)


def grad_W(config: ModelConfig, params: Parameters, X: np.ndarray,
           y: np.ndarray, state: ForwardState) -> np.ndarray:
    """Gradient of the loss with respect to W at the given forward state."""
    r = state.f - np.asarray(y, dtype=np.float64)
    Phi = embed_batch(config.embedding, params.embedding_weights, X)
    pref = (config.m ** (-config.scaling.output_exponent)
            * config.D ** (-config.scaling.hidden_exponent))
    P = params.c[:, None] * config.activation.deriv(state.H) * r[None, :]
    grad = pref * (P @ Phi)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return grad


def gd_step(config: ModelConfig, params: Parameters, grad: np.ndarray,
            delta: float) -> Parameters:
    """One update W <- W - m^lr * delta * grad; c and embedding untouched."""
    if grad.shape != params.W.shape:
        raise InvalidConfigError(f"grad shape {grad.shape} != W shape {params.W.shape}")
    step = config.m ** config.scaling.lr_exponent * delta
    return Parameters(W=params.W - step * grad, c=params.c,
                      embedding_weights=params.embedding_weights, c_hat=params.c_hat)


def run_training(config: ModelConfig, train_config: TrainConfig,
                 X: np.ndarray, y: np.ndarray,
                 test_X: np.ndarray | None = None,
                 test_y: np.ndarray | None = None,
                 test_metric: Callable[[np.ndarray, np.ndarray], float] | None = None,
                 init: Parameters | None = None,
                 probe_X: np.ndarray | None = None) -> TrainingTrace:
    """Train by full-batch GD and record losses, active fractions, snapshots.

    Divergence (loss above 1e12 or non-finite values) aborts with a partial
    trace flagged ``diverged``. Per-step loss increases are recorded in
    ``monotone_violations`` but are not fatal.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    params = init if init is not None else init_params(config)

    sigma, dsigma = config.activation.fn, config.activation.deriv
    m, D = config.m, config.D
    beta = m ** (-config.scaling.output_exponent)
    alpha = D ** (-config.scaling.hidden_exponent)
    lam = m ** config.scaling.lr_exponent
    delta = train_config.delta

    Phi = embed_batch(config.embedding, params.embedding_weights, X)      # (n, D)
    H = alpha * (params.W @ Phi.T)                                        # (m, n)
    # Kernel of the H-space recursion: H <- H - P (lam d beta a^2 Phi Phi^T)
    Kmat = (lam * delta * beta * alpha * alpha) * (Phi @ Phi.T)
    c = params.c

    has_test = test_X is not None
    if has_test:
        Phi_t = embed_batch(config.embedding, params.embedding_weights, test_X)
        H_test0 = alpha * (params.W @ Phi_t.T)
        Ktest = (lam * delta * beta * alpha * alpha) * (Phi @ Phi_t.T)
        if test_metric is None:
            test_metric = lambda f, t: float(np.mean((f - t) ** 2))

    has_probe = probe_X is not None
    if has_probe:
        Phi_p = embed_batch(config.embedding, params.embedding_weights, probe_X)
        H_probe0 = alpha * (params.W @ Phi_p.T)
        Kprobe = (lam * delta * beta * alpha * alpha) * (Phi @ Phi_p.T)

    trace = TrainingTrace(c_hat=params.c_hat,
                          interval=config.activation.active_region)
    Pacc = np.zeros_like(H)
    prev_loss = None
    snapshot_set = set(train_config.snapshot_steps)

    def record(step: int, f: np.ndarray, lval: float) -> None:
        trace.steps.append(step)
        trace.losses.append(lval)
        if train_config.record_eta:
            per_a, mn = active_fraction(H, config.activation.active_region)
            trace.eta_per_point.append(per_a)
            trace.eta_min.append(mn)
        if has_test:
            H_t = H_test0 if step == 0 else H_test0 - Pacc @ Ktest
            f_t = beta * (c @ sigma(H_t))
            trace.test_errors.append(test_metric(f_t, np.asarray(test_y, dtype=np.float64)))
    def snapshot(step: int, f: np.ndarray) -> None:
        trace.snapshots[step] = (H.copy(), f.copy())
        if has_probe:
            H_p = H_probe0 if step == 0 else H_probe0 - Pacc @ Kprobe
            trace.probe_snapshots[step] = H_p

    for step in range(train_config.steps + 1):
        sig = sigma(H)
        f = beta * (c @ sig)
        r = f - y
        lval = 0.5 * float(r @ r)
        if not np.isfinite(lval) or lval > DIVERGENCE_THRESHOLD:
            trace.diverged = True
            break
        if step == 0:
            _, trace.eta_tilde0 = active_fraction(
                H, shrink_interval(config.activation.active_region))
        if prev_loss is not None and lval > prev_loss:
            trace.monotone_violations.append(step)
        prev_loss = lval
        if step % train_config.record_every == 0 or step == train_config.steps:
            record(step, f, lval)
        if step in snapshot_set:
            snapshot(step, f)
        if step == train_config.steps:
            break
        P = c[:, None] * (dsigma(H) * r[None, :])
        H -= P @ Kmat
        Pacc += P

    W_final = params.W - (lam * delta * beta * alpha) * (Pacc @ Phi)
    trace.final_params = Parameters(W=W_final, c=c,
                                    embedding_weights=params.embedding_weights,
                                    c_hat=params.c_hat)
    return trace


def trace_to_csv(trace: TrainingTrace, path) -> None:
    """One row per recorded step: step, loss, eta_min, test_error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "eta_min", "test_error"])
        for i, step in enumerate(trace.steps):
            eta = "%.17g" % trace.eta_min[i] if trace.eta_min else ""
            te = "%.17g" % trace.test_errors[i] if trace.test_errors else ""
            writer.writerow([step, "%.17g" % trace.losses[i], eta, te])


def snapshots_to_npz(trace: TrainingTrace, path) -> None:
    """Sidecar binary with the recorded (H, f) feature snapshots."""
    arrays = {}
    for step, (H, f) in trace.snapshots.items():
        arrays[f"H_{step}"] = H
        arrays[f"f_{step}"] = f
    np.savez_compressed(path, **arrays)
