"""Dense float64 math with hand-derived gradients.

Everything the network needs and nothing more: affine maps, an LSTM cell and
its sequence unroll, the tanh GELU, inverted dropout, masked binary
cross-entropy on logits, Adam, a warmup-then-cosine learning rate schedule,
and a central-difference gradient checker. No autodiff; every backward pass
here is written and tested against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DataError, ShapeError

GATE_ORDER = ("input", "forget", "cell", "output")

_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def check_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{name}: non-finite values in input")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# Affine
# ---------------------------------------------------------------------------

def affine_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    """y = x @ W.T + b with W shaped (out, in); returns (y, cache)."""
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"affine: input dim {x.shape[-1]} != weight in-dim {W.shape[1]}")
    check_finite("affine", x)
    y = x @ W.T + b
    return y, (x, W)


def affine_backward(cache, dy: np.ndarray):
    x, W = cache
    dW = dy.T @ x
    db = dy.sum(axis=0)
    dx = dy @ W
    return dx, dW, db


# ---------------------------------------------------------------------------
# GELU (tanh approximation)
# ---------------------------------------------------------------------------

def gelu(x: np.ndarray) -> np.ndarray:
    """0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3)))."""
    check_finite("gelu", x)
    inner = _GELU_K * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    inner = _GELU_K * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    dinner = _GELU_K * (1.0 + 3.0 * _GELU_A * x**2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner)


# ---------------------------------------------------------------------------
# LSTM cell and sequence unroll
# ---------------------------------------------------------------------------

@dataclass
class LstmCellParams:
    """Weights of one LSTM direction; gate order [input, forget, cell, output].

    W_x maps the input (4h x d), W_h the previous hidden state (4h x h), and
    b is the 4h bias.
    """

    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        four_h, d = self.W_x.shape
        if four_h % 4 != 0:
            raise ShapeError(f"W_x first dim {four_h} not divisible by 4")
        h = four_h // 4
        if self.W_h.shape != (four_h, h):
            raise ShapeError(f"W_h shape {self.W_h.shape} != ({four_h}, {h})")
        if self.b.shape != (four_h,):
            raise ShapeError(f"b shape {self.b.shape} != ({four_h},)")

    @property
    def hidden_dim(self) -> int:
        return self.W_h.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W_x.shape[1]


def lstm_cell_step(params: LstmCellParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One step of the standard LSTM recurrence. Returns (h, c, cache).

    a = W_x x + W_h h_prev + b, gates i/f/o = sigma(.), g = tanh(.),
    c = f * c_prev + i * g, h = o * tanh(c).
    """
    h_dim = params.hidden_dim
    if x.shape != (params.input_dim,):
        raise ShapeError(f"lstm step: x shape {x.shape} != ({params.input_dim},)")
    if h_prev.shape != (h_dim,) or c_prev.shape != (h_dim,):
        raise ShapeError("lstm step: state shape mismatch")
    check_finite("lstm_cell_step", x, h_prev, c_prev)

    a = params.W_x @ x + params.W_h @ h_prev + params.b
    i = sigmoid(a[:h_dim])
    f = sigmoid(a[h_dim : 2 * h_dim])
    g = np.tanh(a[2 * h_dim : 3 * h_dim])
    o = sigmoid(a[3 * h_dim :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (x, h_prev, c_prev, i, f, g, o, tanh_c)
    return h, c, cache


def lstm_cell_backward(params: LstmCellParams, cache, dh: np.ndarray, dc: np.ndarray):
    """Backward of one cell step.

    Returns (dx, dh_prev, dc_prev, dW_x, dW_h, db) with dh/dc the gradients
    flowing into this step's outputs.
    """
    x, h_prev, c_prev, i, f, g, o, tanh_c = cache
    do = dh * tanh_c
    dc_total = dc + dh * o * (1.0 - tanh_c**2)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f

    da = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g**2), do * o * (1.0 - o)]
    )
    dW_x = np.outer(da, x)
    dW_h = np.outer(da, h_prev)
    db = da
    dx = params.W_x.T @ da
    dh_prev = params.W_h.T @ da
    return dx, dh_prev, dc_prev, dW_x, dW_h, db


def lstm_sequence_forward(params: LstmCellParams, X: np.ndarray, reverse: bool = False):
    """Unroll one direction over an (n, d) sequence; h0 = c0 = 0.

    ``reverse=True`` consumes the sequence back to front but returns hidden
    states aligned with the input positions. Returns (H, cache) with H shaped
    (n, h).
    """
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ShapeError(f"lstm: X shape {X.shape} incompatible with input dim {params.input_dim}")
    check_finite("lstm_sequence", X)
    n = X.shape[0]
    h_dim = params.hidden_dim
    X_run = X[::-1] if reverse else X

    # Input contributions for every step at once; the recurrent part loops.
    A_x = X_run @ params.W_x.T + params.b

    I = np.empty((n, h_dim))
    F = np.empty((n, h_dim))
    G = np.empty((n, h_dim))
    O = np.empty((n, h_dim))
    C = np.empty((n, h_dim))
    TanhC = np.empty((n, h_dim))
    H = np.empty((n, h_dim))
    h = np.zeros(h_dim)
    c = np.zeros(h_dim)
    Hprev = np.empty((n, h_dim))
    Cprev = np.empty((n, h_dim))
    for t in range(n):
        Hprev[t] = h
        Cprev[t] = c
        a = A_x[t] + params.W_h @ h
        i = sigmoid(a[:h_dim])
        f = sigmoid(a[h_dim : 2 * h_dim])
        g = np.tanh(a[2 * h_dim : 3 * h_dim])
        o = sigmoid(a[3 * h_dim :])
        c = f * c + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        I[t], F[t], G[t], O[t] = i, f, g, o
        C[t], TanhC[t], H[t] = c, tanh_c, h

    cache = (params, X_run, I, F, G, O, Cprev, TanhC, Hprev, reverse)
    H_out = H[::-1] if reverse else H
    return H_out, cache


def lstm_sequence_backward(cache, dH: np.ndarray):
    """Backward through a full unroll. Returns (grads, dX).

    ``grads`` is a dict with keys W_x, W_h, b; dX is aligned with the
    original input order.
    """
    params, X_run, I, F, G, O, Cprev, TanhC, Hprev, reverse = cache
    n, h_dim = I.shape
    if dH.shape != (n, h_dim):
        raise ShapeError(f"lstm backward: dH shape {dH.shape} != {(n, h_dim)}")
    dH_run = dH[::-1] if reverse else dH

    DA = np.empty((n, 4 * h_dim))
    dh_rec = np.zeros(h_dim)
    dc_rec = np.zeros(h_dim)
    for t in range(n - 1, -1, -1):
        dh = dH_run[t] + dh_rec
        i, f, g, o = I[t], F[t], G[t], O[t]
        tanh_c = TanhC[t]
        do = dh * tanh_c
        dc = dc_rec + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        df = dc * Cprev[t]
        dg = dc * i
        DA[t, :h_dim] = di * i * (1.0 - i)
        DA[t, h_dim : 2 * h_dim] = df * f * (1.0 - f)
        DA[t, 2 * h_dim : 3 * h_dim] = dg * (1.0 - g**2)
        DA[t, 3 * h_dim :] = do * o * (1.0 - o)
        da = DA[t]
        dh_rec = params.W_h.T @ da
        dc_rec = dc * f

    grads = {
        "W_x": DA.T @ X_run,
        "W_h": DA.T @ Hprev,
        "b": DA.sum(axis=0),
    }
    dX_run = DA @ params.W_x
    dX = dX_run[::-1] if reverse else dX_run
    return grads, dX


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------

def dropout_apply(
    x: np.ndarray, p: float, mode: str, rng: np.random.Generator | None = None
):
    """Inverted dropout. Returns (y, mask); mask is None in eval mode or p=0.

    Kept entries are scaled by 1/(1-p) so eval needs no rescaling.
    """
    if not (0.0 <= p < 1.0):
        raise DataError(f"dropout p must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise DataError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or p == 0.0:
        return x, None
    if rng is None:
        raise DataError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= p
    scale = 1.0 / (1.0 - p)
    return x * keep * scale, keep


def dropout_backward(dy: np.ndarray, mask, p: float) -> np.ndarray:
    if mask is None:
        return dy
    return dy * mask / (1.0 - p)


# ---------------------------------------------------------------------------
# Masked binary cross-entropy on logits
# ---------------------------------------------------------------------------

def masked_bce_with_logits(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray):
    """Mean BCE over masked positions, straight from logits.

    Per position: softplus(z) - y*z, computed stably. Returns (loss, grad)
    with grad = mask * (sigmoid(z) - y) / n_active and zero elsewhere.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if not (logits.shape == targets.shape == mask.shape):
        raise ShapeError(
            f"bce: shapes differ: logits {logits.shape}, targets {targets.shape}, mask {mask.shape}"
        )
    check_finite("masked_bce_with_logits", logits, targets, mask)
    n_active = mask.sum()
    if n_active == 0:
        raise DataError("bce: mask has no active positions")

    # softplus(z) = max(z, 0) + log1p(exp(-|z|))
    per_position = np.maximum(logits, 0.0) + np.log1p(np.exp(-np.abs(logits))) - targets * logits
    loss = float((per_position * mask).sum() / n_active)
    grad = mask * (sigmoid(logits) - targets) / n_active
    return loss, grad


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; functional, inputs are not mutated."""
    if lr < 0:
        raise DataError(f"adam: lr must be >= 0, got {lr}")
    if set(params) != set(grads):
        raise ShapeError("adam: params and grads have different keys")
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeError(f"adam: grad shape {g.shape} != param shape {p.shape} for {key!r}")
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[key] + (1.0 - state.beta2) * g**2
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[key] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamState(
        m=new_m, v=new_v, t=t, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )


# ---------------------------------------------------------------------------
# Learning rate schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrSchedule:
    peak: float = 5e-4
    min_lr: float = 5e-5
    warmup: int = 2600
    total: int = 30000

    def __post_init__(self):
        if not (0 <= self.warmup < self.total):
            raise DataError(f"warmup {self.warmup} must satisfy 0 <= warmup < total {self.total}")
        if not (0.0 < self.min_lr <= self.peak):
            raise DataError(f"need 0 < min_lr <= peak, got {self.min_lr}, {self.peak}")


def lr_at(step: int, schedule: LrSchedule) -> float:
    """Linear warmup from 0 to peak, then cosine decay from peak to min_lr."""
    if step < 0 or step > schedule.total:
        raise DataError(f"step {step} outside [0, {schedule.total}]")
    if step < schedule.warmup:
        return schedule.peak * step / schedule.warmup
    progress = (step - schedule.warmup) / (schedule.total - schedule.warmup)
    return schedule.min_lr + (schedule.peak - schedule.min_lr) * 0.5 * (
        1.0 + math.cos(math.pi * progress)
    )


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def grad_check(
    closure: Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]],
    params: dict[str, np.ndarray],
    epsilon: float = 1e-4,
) -> float:
    """Max relative error between the closure's gradients and central differences.

    ``closure(params)`` must return (loss, grads) deterministically; two
    baseline evaluations are compared to detect a stochastic closure. The
    relative error per coordinate is |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
    """
    if epsilon <= 0:
        raise DataError(f"grad_check epsilon must be > 0, got {epsilon}")
    loss_a, grads = closure(params)
    loss_b, _ = closure(params)
    if loss_a != loss_b:
        raise DataError(
            f"grad_check: closure is not deterministic ({loss_a!r} != {loss_b!r})"
        )

    worst = 0.0
    for key in sorted(params):
        p = params[key]
        g_analytic = grads[key]
        if g_analytic.shape != p.shape:
            raise ShapeError(f"grad_check: grad shape mismatch for {key!r}")
        flat = p.reshape(-1)
        g_flat = g_analytic.reshape(-1)
        for idx in range(flat.shape[0]):
            original = flat[idx]
            flat[idx] = original + epsilon
            loss_plus, _ = closure(params)
            flat[idx] = original - epsilon
            loss_minus, _ = closure(params)
            flat[idx] = original
            g_numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            g_a = g_flat[idx]
            err = abs(g_a - g_numeric) / max(1e-8, abs(g_a) + abs(g_numeric))
            if err > worst:
                worst = err
    return worst
