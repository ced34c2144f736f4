"""The sequence classifier itself.

Sentence vectors go through a stacked bidirectional LSTM; each position's
forward and backward hidden states are concatenated, adjacent positions are
paired by concatenation, and a three-layer GELU MLP maps each pair to one
boundary logit. Every problem is unrolled at its own true length, so there is
no padding anywhere and results cannot depend on batch composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DataError, ShapeError
from .featurize import SentenceMatrix
from .numerics import (
    LstmCellParams,
    affine_backward,
    affine_forward,
    check_finite,
    dropout_apply,
    dropout_backward,
    gelu,
    gelu_backward,
    lstm_sequence_backward,
    lstm_sequence_forward,
)


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dim: int = 256
    bilstm_layers: int = 5
    bilstm_dropout: float = 0.2
    mlp_hidden_dims: tuple[int, int] = (512, 128)
    mlp_dropout: float = 0.2
    seed: int = 0

    def __post_init__(self):
        dims = (self.input_dim, self.hidden_dim, self.bilstm_layers) + tuple(self.mlp_hidden_dims)
        if any(d < 1 for d in dims):
            raise DataError(f"all model dimensions must be >= 1: {self}")
        if not (0.0 <= self.bilstm_dropout < 1.0) or not (0.0 <= self.mlp_dropout < 1.0):
            raise DataError("dropout rates must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "bilstm_layers": self.bilstm_layers,
            "bilstm_dropout": self.bilstm_dropout,
            "mlp_hidden_dims": list(self.mlp_hidden_dims),
            "mlp_dropout": self.mlp_dropout,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        payload = dict(payload)
        payload["mlp_hidden_dims"] = tuple(payload.get("mlp_hidden_dims", (512, 128)))
        return cls(**payload)


@dataclass
class ModelParams:
    """All learnable tensors, keyed by name, plus the architecture config.

    Keys: ``bilstm.<layer>.<fwd|bwd>.<W_x|W_h|b>`` and ``mlp.<i>.<W|b>``.
    """

    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def lstm_cell(self, layer: int, direction: str) -> LstmCellParams:
        prefix = f"bilstm.{layer}.{direction}"
        return LstmCellParams(
            W_x=self.tensors[f"{prefix}.W_x"],
            W_h=self.tensors[f"{prefix}.W_h"],
            b=self.tensors[f"{prefix}.b"],
        )

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def checksum(self) -> str:
        """Hex digest over all tensors in key order; used for determinism checks."""
        import hashlib

        digest = hashlib.sha256()
        for key in sorted(self.tensors):
            digest.update(key.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.tensors[key]).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class BoundaryLogits:
    problem_id: str
    logits: np.ndarray  # (n - 1,)

    def __post_init__(self):
        if self.logits.ndim != 1:
            raise ShapeError(f"{self.problem_id}: logits must be a vector")
        if not np.all(np.isfinite(self.logits)):
            raise DataError(f"{self.problem_id}: non-finite logits")


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Shape of every tensor the architecture owns, keyed by name."""
    h = config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(config.bilstm_layers):
        in_dim = config.input_dim if layer == 0 else 2 * h
        for direction in ("fwd", "bwd"):
            prefix = f"bilstm.{layer}.{direction}"
            shapes[f"{prefix}.W_x"] = (4 * h, in_dim)
            shapes[f"{prefix}.W_h"] = (4 * h, h)
            shapes[f"{prefix}.b"] = (4 * h,)
    m1, m2 = config.mlp_hidden_dims
    mlp_dims = [(4 * h, m1), (m1, m2), (m2, 1)]
    for i, (d_in, d_out) in enumerate(mlp_dims):
        shapes[f"mlp.{i}.W"] = (d_out, d_in)
        shapes[f"mlp.{i}.b"] = (d_out,)
    return shapes


def init_model(config: ModelConfig) -> ModelParams:
    """Seeded initialization.

    LSTM weights are uniform(-1/sqrt(h), 1/sqrt(h)); biases are zero except
    the forget gate slice, which starts at 1.0. MLP weights are uniform with
    limit 1/sqrt(fan_in), biases zero.
    """
    rng = np.random.default_rng(config.seed)
    h = config.hidden_dim
    tensors: dict[str, np.ndarray] = {}
    lstm_limit = 1.0 / np.sqrt(h)
    for layer in range(config.bilstm_layers):
        in_dim = config.input_dim if layer == 0 else 2 * h
        for direction in ("fwd", "bwd"):
            prefix = f"bilstm.{layer}.{direction}"
            tensors[f"{prefix}.W_x"] = rng.uniform(-lstm_limit, lstm_limit, (4 * h, in_dim))
            tensors[f"{prefix}.W_h"] = rng.uniform(-lstm_limit, lstm_limit, (4 * h, h))
            b = np.zeros(4 * h)
            b[h : 2 * h] = 1.0  # forget gate bias
            tensors[f"{prefix}.b"] = b
    m1, m2 = config.mlp_hidden_dims
    for i, (d_in, d_out) in enumerate([(4 * h, m1), (m1, m2), (m2, 1)]):
        limit = 1.0 / np.sqrt(d_in)
        tensors[f"mlp.{i}.W"] = rng.uniform(-limit, limit, (d_out, d_in))
        tensors[f"mlp.{i}.b"] = np.zeros(d_out)
    return ModelParams(config, tensors)


def forward(
    params: ModelParams,
    x: SentenceMatrix,
    mode: str = "eval",
    rng: Optional[np.random.Generator] = None,
):
    """Run the full stack over one problem. Returns (BoundaryLogits, cache).

    The forward direction consumes sentences first to last, the backward
    direction last to first over the same layer input; their states are
    concatenated per position. Dropout applies between stacked layers and
    inside the MLP in train mode only. n = 1 yields an empty logit vector.
    """
    cfg = params.config
    X = np.asarray(x.rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.input_dim:
        raise ShapeError(
            f"{x.problem_id}: feature dim {X.shape[-1]} != model input dim {cfg.input_dim}"
        )
    check_finite("model.forward", X)
    if mode not in ("train", "eval"):
        raise DataError(f"mode must be 'train' or 'eval', got {mode!r}")

    n = X.shape[0]
    layer_caches = []
    layer_input = X
    for layer in range(cfg.bilstm_layers):
        H_f, cache_f = lstm_sequence_forward(params.lstm_cell(layer, "fwd"), layer_input)
        H_b, cache_b = lstm_sequence_forward(
            params.lstm_cell(layer, "bwd"), layer_input, reverse=True
        )
        H = np.concatenate([H_f, H_b], axis=1)
        mask = None
        if layer < cfg.bilstm_layers - 1:  # between stacked layers only
            H, mask = dropout_apply(H, cfg.bilstm_dropout, mode, rng)
        layer_caches.append((cache_f, cache_b, mask))
        layer_input = H

    H_top = layer_input
    if n >= 2:
        pairs = np.concatenate([H_top[:-1], H_top[1:]], axis=1)  # (n-1, 4h)
    else:
        pairs = np.zeros((0, 2 * H_top.shape[1]))

    mlp_caches = []
    act = pairs
    for i in range(3):
        W = params.tensors[f"mlp.{i}.W"]
        b = params.tensors[f"mlp.{i}.b"]
        pre, aff_cache = affine_forward(act, W, b)
        if i < 2:
            post = gelu(pre)
            post_dropped, mask = dropout_apply(post, cfg.mlp_dropout, mode, rng)
            mlp_caches.append((aff_cache, pre, mask))
            act = post_dropped
        else:
            mlp_caches.append((aff_cache, None, None))
            act = pre

    logits = act[:, 0] if act.size else np.zeros(0)
    cache = {
        "config": cfg,
        "n": n,
        "layer_caches": layer_caches,
        "mlp_caches": mlp_caches,
        "h_top_width": H_top.shape[1],
    }
    return BoundaryLogits(x.problem_id, logits), cache


def backward(params: ModelParams, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every tensor given d(loss)/d(logits) for one problem."""
    cfg = cache["config"]
    n = cache["n"]
    width = cache["h_top_width"]
    if dlogits.shape != (max(n - 1, 0),):
        raise ShapeError(f"backward: dlogits shape {dlogits.shape} != ({max(n - 1, 0)},)")

    grads = {key: np.zeros_like(value) for key, value in params.tensors.items()}

    d_act = dlogits[:, None]
    for i in range(2, -1, -1):
        aff_cache, pre, mask = cache["mlp_caches"][i]
        if i < 2:
            d_act = dropout_backward(d_act, mask, cfg.mlp_dropout)
            d_act = gelu_backward(pre, d_act)
        d_act, dW, db = affine_backward(aff_cache, d_act)
        grads[f"mlp.{i}.W"] += dW
        grads[f"mlp.{i}.b"] += db
    d_pairs = d_act  # (n-1, 4h)

    dH = np.zeros((n, width))
    if n >= 2:
        half = width
        dH[:-1] += d_pairs[:, :half]
        dH[1:] += d_pairs[:, half:]

    for layer in range(cfg.bilstm_layers - 1, -1, -1):
        cache_f, cache_b, mask = cache["layer_caches"][layer]
        dH = dropout_backward(dH, mask, cfg.bilstm_dropout)
        h = cfg.hidden_dim
        g_f, dX_f = lstm_sequence_backward(cache_f, dH[:, :h])
        g_b, dX_b = lstm_sequence_backward(cache_b, dH[:, h:])
        for direction, g in (("fwd", g_f), ("bwd", g_b)):
            prefix = f"bilstm.{layer}.{direction}"
            grads[f"{prefix}.W_x"] += g["W_x"]
            grads[f"{prefix}.W_h"] += g["W_h"]
            grads[f"{prefix}.b"] += g["b"]
        dH = dX_f + dX_b
    return grads


def predict(params: ModelParams, x: SentenceMatrix) -> tuple[int, ...]:
    """Hard labels: 1 where the boundary logit is strictly positive."""
    boundary, _ = forward(params, x, mode="eval")
    return tuple(int(v) for v in (boundary.logits > 0.0))
