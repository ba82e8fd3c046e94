"""The pair classifier: forward pass, gradients and a few optimiser steps.

The encoder, loss and backward pass are plain numpy. A central-difference
check confirms the analytic gradient on a tiny float64 model.
"""
import numpy as np

from csfi.model import ModelConfig, init_parameters, loss_and_gradients, pair_forward, parameter_count, predict_probabilities
from csfi.optim import Adam

cfg = ModelConfig(vocab_size=31)
print("desk model parameters:", parameter_count(init_parameters(cfg)))
print("full-scale parameters:", parameter_count(init_parameters(ModelConfig.full_scale(31))))

tiny = ModelConfig(vocab_size=9, max_len=10, num_layers=1, num_heads=1, model_dim=8, dropout_rate=0.0)
params = init_parameters(tiny, np.float64)
rng = np.random.default_rng(0)
ab = rng.integers(3, 9, (4, 10))
ba = rng.integers(3, 9, (4, 10))
ab[:, 0] = ba[:, 0] = 0
ab[:, 7:] = ba[:, 7:] = tiny.pad_id
y = np.array([0, 1, 1, 0])

loss, grads = loss_and_gradients(ab, ba, y, params, tiny)
name, idx, h = "head.dense.w", (3, 2), 1e-6
params[name][idx] += h
up, _ = loss_and_gradients(ab, ba, y, params, tiny)
params[name][idx] -= 2 * h
down, _ = loss_and_gradients(ab, ba, y, params, tiny)
params[name][idx] += h
print(f"\nloss {loss:.6f}; d/d{name}{idx}: analytic {grads[name][idx]:.6e}, numeric {(up - down) / (2 * h):.6e}")

# Fitting four examples is easy; the loss drops quickly.
opt = Adam(params, lr=1e-2)
for step in range(60):
    loss, grads = loss_and_gradients(ab, ba, y, params, tiny)
    opt.step(params, grads)
    if step % 20 == 0:
        print(f"step {step:2d} loss {loss:.4f}")
print("probabilities:\n", predict_probabilities(pair_forward(ab, ba, params, tiny)).round(3))
