"""Every backward pass in the package is hand-derived; this demo verifies
them against central finite differences, layer by layer and end to end.

Run from the repository root: python demos/03_gradient_checks.py
"""

import numpy as np

from sspc.featurize import SentenceMatrix
from sspc.model import ModelConfig, ModelParams, backward, forward, init_model
from sspc.numerics import (
    LstmCellParams,
    grad_check,
    lstm_sequence_backward,
    lstm_sequence_forward,
    masked_bce_with_logits,
)

rng = np.random.default_rng(0)

# One LSTM direction over a short sequence, gradient of a random projection.
d, h, n = 4, 3, 6
cell = LstmCellParams(
    W_x=rng.uniform(-0.5, 0.5, (4 * h, d)),
    W_h=rng.uniform(-0.5, 0.5, (4 * h, h)),
    b=rng.uniform(-0.5, 0.5, 4 * h),
)
X = rng.normal(size=(n, d))
dH = rng.normal(size=(n, h))

def lstm_closure(params):
    probe = LstmCellParams(params["W_x"], params["W_h"], params["b"])
    H, cache = lstm_sequence_forward(probe, X)
    grads, _ = lstm_sequence_backward(cache, dH)
    return float((H * dH).sum()), grads

err = grad_check(lstm_closure, {"W_x": cell.W_x, "W_h": cell.W_h, "b": cell.b}, epsilon=1e-5)
print(f"single LSTM direction: max relative error {err:.2e}")

# The full classifier: stacked BiLSTM, pair concatenation, GELU MLP, BCE.
cfg = ModelConfig(input_dim=8, hidden_dim=4, bilstm_layers=2, bilstm_dropout=0.0,
                  mlp_hidden_dims=(16, 8), mlp_dropout=0.0, seed=3)
params = init_model(cfg)
matrix = SentenceMatrix("p", rng.normal(size=(5, 8)))
targets = rng.integers(0, 2, size=4).astype(float)

def model_closure(tensors):
    run = ModelParams(cfg, tensors)
    boundary, cache = forward(run, matrix)
    loss, dlogits = masked_bce_with_logits(boundary.logits, targets, np.ones(4))
    return loss, backward(run, cache, dlogits)

n_params = sum(v.size for v in params.tensors.values())
err = grad_check(model_closure, params.tensors, epsilon=1e-4)
print(f"full model ({n_params} parameters): max relative error {err:.2e}")
