"""Hot numeric kernels for the client MLP, with optional compiled backend.

The per-client forward/backward passes run every batch of every client of
every round, so they dominate simulator runtime. A Cython extension
(_ckernels) provides compiled versions; this module falls back to the numpy
reference implementations when the extension is unavailable or when
FEDSHIELD_PURE_PYTHON=1 is set. Both backends are deterministic; they agree
to floating-point tolerance (not bitwise, since summation order differs).
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "backend",
    "forward_probs",
    "loss_grad",
    "predict",
    "forward_probs_numpy",
    "loss_grad_numpy",
    "predict_numpy",
]


def forward_probs_numpy(w1, b1, w2, b2, x):
    """Softmax class probabilities of the one-hidden-layer ReLU MLP, (n, C)."""
    h = np.maximum(x @ w1 + b1, 0.0)
    logits = h @ w2 + b2
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def loss_grad_numpy(w1, b1, w2, b2, x, y):
    """Mean cross-entropy loss and its gradients in one fused pass.

    Returns (loss, gw1, gb1, gw2, gb2) with gradients of the batch-mean loss.
    """
    n = x.shape[0]
    h_pre = x @ w1 + b1
    h = np.maximum(h_pre, 0.0)
    logits = h @ w2 + b2
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    probs = logits / logits.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    # floor avoids -inf on underflow; unreachable at desk scale
    loss = float(-np.mean(np.log(np.maximum(probs[rows, y], 1e-300))))
    delta = probs
    delta[rows, y] -= 1.0
    delta /= n
    gw2 = h.T @ delta
    gb2 = delta.sum(axis=0)
    dh = delta @ w2.T
    dh[h_pre <= 0.0] = 0.0
    gw1 = x.T @ dh
    gb1 = dh.sum(axis=0)
    return loss, gw1, gb1, gw2, gb2


def predict_numpy(w1, b1, w2, b2, x):
    """Argmax class per row; ties break toward the lowest class index."""
    h = np.maximum(x @ w1 + b1, 0.0)
    logits = h @ w2 + b2
    return np.argmax(logits, axis=1).astype(np.int64)


def _load_backend():
    if os.environ.get("FEDSHIELD_PURE_PYTHON", "").strip() in ("1", "true", "yes"):
        return "numpy", forward_probs_numpy, loss_grad_numpy, predict_numpy
    try:
        from . import _ckernels
    except ImportError:
        return "numpy", forward_probs_numpy, loss_grad_numpy, predict_numpy
    return "cython", _ckernels.forward_probs, _ckernels.loss_grad, _ckernels.predict


_BACKEND, forward_probs, loss_grad, predict = _load_backend()


def backend() -> str:
    """Name of the kernel backend selected at import: 'cython' or 'numpy'."""
    return _BACKEND
