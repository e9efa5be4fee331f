"""Client model: a tiny one-hidden-layer ReLU/softmax MLP on flat parameters.

Parameters travel between server and clients as a single flat float64 vector
(canonical order W1, b1, W2, b2), which is what aggregation, attacks, and the
anomaly signals operate on. The numeric heavy lifting lives in kernels.py.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .config import ClientTrainConfig
from .rng import RngStream

__all__ = ["MlpModel", "local_train"]


class MlpModel:
    """Architecture d -> h (ReLU) -> C (softmax); parameter count dh+h+hC+C."""

    def __init__(self, input_dim: int, hidden_dim: int, output_dim: int):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.output_dim = output_dim

    @property
    def n_params(self) -> int:
        d, h, c = self.input_dim, self.hidden_dim, self.output_dim
        return d * h + h + h * c + c

    def init_params(self, rng: RngStream) -> np.ndarray:
        """Uniform(-a, a) weights with a = sqrt(6/(fan_in+fan_out)); zero biases."""
        d, h, c = self.input_dim, self.hidden_dim, self.output_dim
        a1 = np.sqrt(6.0 / (d + h))
        a2 = np.sqrt(6.0 / (h + c))
        params = np.zeros(self.n_params, dtype=np.float64)
        w1, _, w2, _ = self.unpack(params)
        w1[:] = rng.uniform(-a1, a1, size=(d, h))
        w2[:] = rng.uniform(-a2, a2, size=(h, c))
        return params

    def unpack(self, params: np.ndarray):
        """Views (w1, b1, w2, b2) into the flat vector; no copies."""
        d, h, c = self.input_dim, self.hidden_dim, self.output_dim
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        i1 = d * h
        i2 = i1 + h
        i3 = i2 + h * c
        return (
            params[:i1].reshape(d, h),
            params[i1:i2],
            params[i2:i3].reshape(h, c),
            params[i3:],
        )

    def pack(self, w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([np.ravel(w1), b1, np.ravel(w2), b2]).astype(np.float64)

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            if x.shape[0] != self.input_dim:
                raise ValueError(f"feature length {x.shape[0]} != input_dim {self.input_dim}")
            return x[None, :], True
        if x.shape[1] != self.input_dim:
            raise ValueError(f"feature dim {x.shape[1]} != input_dim {self.input_dim}")
        return x, False

    def forward(self, params: np.ndarray, x) -> np.ndarray:
        """Class probabilities; accepts one feature vector or a batch."""
        xb, single = self._as_batch(x)
        probs = kernels.forward_probs(*self.unpack(params), xb)
        return probs[0] if single else probs

    def loss_and_grad(self, params: np.ndarray, x, y):
        """Mean cross-entropy over the batch and its flat gradient."""
        xb, _ = self._as_batch(x)
        yb = np.atleast_1d(np.asarray(y, dtype=np.int64))
        loss, gw1, gb1, gw2, gb2 = kernels.loss_grad(*self.unpack(params), xb, yb)
        return loss, self.pack(gw1, gb1, gw2, gb2)

    def grad(self, params: np.ndarray, x, y) -> np.ndarray:
        return self.loss_and_grad(params, x, y)[1]

    def loss(self, params: np.ndarray, x, y) -> float:
        return self.loss_and_grad(params, x, y)[0]

    def predict(self, params: np.ndarray, x) -> np.ndarray:
        """Argmax labels; ties resolve to the lowest class index."""
        xb, single = self._as_batch(x)
        labels = kernels.predict(*self.unpack(params), xb)
        return int(labels[0]) if single else labels


def local_train(
    model: MlpModel,
    global_params: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: ClientTrainConfig,
    rng: RngStream,
) -> np.ndarray:
    """Mini-batch SGD from the global parameters on one client's data.

    Batch order is reshuffled from the client's stream every epoch; the final
    partial batch is kept. Returns the full updated parameter vector w_i^t.
    """
    if len(labels) == 0:
        raise ValueError("client has no training data")
    params = np.array(global_params, dtype=np.float64, copy=True)
    n = len(labels)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grad = model.loss_and_grad(params, features[idx], labels[idx])
            params -= cfg.learning_rate * grad
    return params
