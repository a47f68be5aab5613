"""Central finite-difference oracle for the LM loss (float64 throughout)."""

import numpy as np

from lprnn.lstm import backward, forward_sequence, sequence_loss


def loss_of(model, tokens, targets):
    logits, _, _ = forward_sequence(tokens, model, record=False)
    return sequence_loss(logits, targets)[0]


def numeric_grads(model, tokens, targets, eps=1e-6):
    grads = {}
    for name, param in model.params().items():
        g = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            saved = param[idx]
            param[idx] = saved + eps
            up = loss_of(model, tokens, targets)
            param[idx] = saved - eps
            down = loss_of(model, tokens, targets)
            param[idx] = saved
            g[idx] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


def max_relative_error(model, tokens, targets, floor=1e-6):
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over every parameter entry."""
    _, tape, _ = forward_sequence(tokens, model)
    _, analytic = backward(tape, model, targets)
    numeric = numeric_grads(model, tokens, targets)
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(rel.max()))
    return worst
