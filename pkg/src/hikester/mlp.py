"""Small feed-forward network: one sigmoid hidden layer, sigmoid output.

Trained by full-batch gradient descent. Two heads share the machinery:
binary cross-entropy for classification and mean squared error for scalar
regression targets (which must be scaled into (0, 1) by the caller).
"""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """layers = [(W_hidden, b_hidden), (W_out, b_out)]; weights start uniform
    in [-0.5, 0.5] from the given seed."""

    def __init__(self, input_size: int, hidden_size: int, output_size: int = 1,
                 seed: int = 0, loss: str = "bce"):
        if input_size <= 0 or hidden_size <= 0 or output_size <= 0:
            raise ValueError("layer sizes must be positive")
        if loss not in ("bce", "mse"):
            raise ValueError(f"unknown loss {loss!r}")
        rng = np.random.RandomState(seed)
        self.layers = [
            (rng.uniform(-0.5, 0.5, (input_size, hidden_size)),
             rng.uniform(-0.5, 0.5, hidden_size)),
            (rng.uniform(-0.5, 0.5, (hidden_size, output_size)),
             rng.uniform(-0.5, 0.5, output_size)),
        ]
        self.loss = loss

    @property
    def input_size(self) -> int:
        return self.layers[0][0].shape[0]

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations per layer for a batch x of shape (m, input_size)."""
        activations = [np.asarray(x, dtype=float)]
        for w, b in self.layers:
            activations.append(sigmoid(activations[-1] @ w + b))
        return activations

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(np.atleast_2d(x))[-1]

    def loss_value(self, x: np.ndarray, y: np.ndarray) -> float:
        a = self.forward(x)[-1]
        y = np.asarray(y, dtype=float).reshape(a.shape)
        if self.loss == "bce":
            eps = 1e-12
            return float(-np.mean(y * np.log(a + eps) + (1 - y) * np.log(1 - a + eps)))
        return float(0.5 * np.mean((a - y) ** 2))

    def gradients(self, x: np.ndarray, y: np.ndarray):
        """Backprop gradients of the loss, same shapes as the layers."""
        acts = self.forward(x)
        a_out = acts[-1]
        y = np.asarray(y, dtype=float).reshape(a_out.shape)
        m = a_out.shape[0]
        n_out = a_out.shape[1]
        if self.loss == "bce":
            # d(bce)/dz for a sigmoid output collapses to (a - y)
            delta = (a_out - y) / (m * n_out)
        else:
            delta = (a_out - y) * a_out * (1 - a_out) / (m * n_out)
        grads = []
        for i in reversed(range(len(self.layers))):
            a_prev = acts[i]
            grads.append((a_prev.T @ delta, delta.sum(axis=0)))
            if i > 0:
                w, _ = self.layers[i]
                delta = (delta @ w.T) * a_prev * (1 - a_prev)
        grads.reverse()
        return grads

    def train(self, x: np.ndarray, y: np.ndarray, epochs: int,
              learning_rate: float) -> list[float]:
        """Full-batch gradient descent; returns the loss after each epoch."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        history = []
        for _ in range(epochs):
            grads = self.gradients(x, y)
            self.layers = [
                (w - learning_rate * gw, b - learning_rate * gb)
                for (w, b), (gw, gb) in zip(self.layers, grads)
            ]
            history.append(self.loss_value(x, y))
        return history

    # ------------------------------------------------------------- persistence

    def to_doc(self) -> dict:
        doc: dict = {"loss": self.loss}
        for li, (w, b) in enumerate(self.layers):
            doc[f"w{li}"] = _matrix_doc(w)
            doc[f"b{li}"] = _vector_doc(b)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "Mlp":
        w0 = _doc_matrix(doc["w0"])
        w1 = _doc_matrix(doc["w1"])
        net = cls(w0.shape[0], w0.shape[1], w1.shape[1], loss=doc.get("loss", "bce"))
        net.layers = [(w0, _doc_vector(doc["b0"])), (w1, _doc_vector(doc["b1"]))]
        return net


# Document trees have no arrays, so matrices persist as nested maps with
# stringified indices.

def _vector_doc(v: np.ndarray) -> dict:
    return {str(i): float(x) for i, x in enumerate(v)}


def _doc_vector(doc: dict) -> np.ndarray:
    return np.array([doc[str(i)] for i in range(len(doc))], dtype=float)


def _matrix_doc(m: np.ndarray) -> dict:
    return {str(i): _vector_doc(row) for i, row in enumerate(m)}


def _doc_matrix(doc: dict) -> np.ndarray:
    return np.stack([_doc_vector(doc[str(i)]) for i in range(len(doc))])


def numeric_gradients(net: Mlp, x: np.ndarray, y: np.ndarray, eps: float = 1e-5):
    """Central finite differences of the loss; the oracle for backprop."""
    grads = []
    for li, (w, b) in enumerate(net.layers):
        gw = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            orig = w[idx]
            w[idx] = orig + eps
            hi = net.loss_value(x, y)
            w[idx] = orig - eps
            lo = net.loss_value(x, y)
            w[idx] = orig
            gw[idx] = (hi - lo) / (2 * eps)
        gb = np.zeros_like(b)
        for i in range(b.shape[0]):
            orig = b[i]
            b[i] = orig + eps
            hi = net.loss_value(x, y)
            b[i] = orig - eps
            lo = net.loss_value(x, y)
            b[i] = orig
            gb[i] = (hi - lo) / (2 * eps)
        grads.append((gw, gb))
    return grads
