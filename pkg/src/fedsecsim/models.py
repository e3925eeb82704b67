"""Small differentiable classifiers with hand-derived gradients.

Two model families share one flat parameter layout so the whole pipeline
(aggregation, encryption, weighting) can treat parameters as a single
vector:

* ``logreg``  — softmax regression, theta = [W (C,m) row-major | b (C,)].
* ``mlp1``    — one tanh hidden layer, theta = [W1 (h,m) | b1 (h,) | W2 (C,h) | b2 (C,)].

Loss is mean cross-entropy. Gradients are closed-form; the test suite
checks every coordinate against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset


class ModelKind(str, Enum):
    LOGREG = "logreg"
    MLP1 = "mlp1"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError("input_dim must be >= 1 and num_classes >= 2")
        if self.kind == ModelKind.MLP1 and self.hidden_dim < 1:
            raise ValueError("mlp1 requires hidden_dim >= 1")

    @property
    def param_count(self) -> int:
        m, c, h = self.input_dim, self.num_classes, self.hidden_dim
        if self.kind == ModelKind.LOGREG:
            return m * c + c
        return h * m + h + c * h + c


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform init in [-0.05, 0.05], small and symmetric."""
    return rng.uniform(-0.05, 0.05, size=spec.param_count)


def _check_theta(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.param_count,):
        raise ValueError(
            f"theta has dim {theta.shape}, model expects ({spec.param_count},)"
        )
    return theta


def _unpack(spec: ModelSpec, theta: np.ndarray):
    m, c, h = spec.input_dim, spec.num_classes, spec.hidden_dim
    if spec.kind == ModelKind.LOGREG:
        W = theta[: m * c].reshape(c, m)
        b = theta[m * c :]
        return W, b
    o = 0
    W1 = theta[o : o + h * m].reshape(h, m)
    o += h * m
    b1 = theta[o : o + h]
    o += h
    W2 = theta[o : o + c * h].reshape(c, h)
    o += c * h
    b2 = theta[o : o + c]
    return W1, b1, W2, b2


def softmax(Z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = Z - Z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_batch(spec: ModelSpec, theta: np.ndarray, X: np.ndarray):
    """Class probabilities for a batch, plus the activation cache for backprop."""
    theta = _check_theta(spec, theta)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.input_dim:
        raise ValueError(f"input has dim {X.shape[1]}, model expects {spec.input_dim}")
    if spec.kind == ModelKind.LOGREG:
        W, b = _unpack(spec, theta)
        P = softmax(X @ W.T + b)
        return P, {"X": X}
    W1, b1, W2, b2 = _unpack(spec, theta)
    H = np.tanh(X @ W1.T + b1)
    P = softmax(H @ W2.T + b2)
    return P, {"X": X, "H": H}


def forward(spec: ModelSpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Probability vector for a single sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a single feature vector")
    P, _ = forward_batch(spec, theta, x[None, :])
    return P[0]


def backprop_params(
    spec: ModelSpec, theta: np.ndarray, cache: dict, dZ: np.ndarray
) -> np.ndarray:
    """Gradient w.r.t. theta given the upstream logit gradient ``dZ``.

    Shared by the cross-entropy loss (dZ = (P - onehot)/B) and the
    adversarial consistency term (dZ = (Q - target)/B).
    """
    X = cache["X"]
    if spec.kind == ModelKind.LOGREG:
        gW = dZ.T @ X
        gb = dZ.sum(axis=0)
        return np.concatenate([gW.ravel(), gb])
    W1, b1, W2, b2 = _unpack(spec, theta)
    H = cache["H"]
    gW2 = dZ.T @ H
    gb2 = dZ.sum(axis=0)
    dH = dZ @ W2
    dA = dH * (1.0 - H * H)
    gW1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


def backprop_inputs(spec: ModelSpec, theta: np.ndarray, cache: dict, dZ: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the inputs given the upstream logit gradient ``dZ``."""
    if spec.kind == ModelKind.LOGREG:
        W, _ = _unpack(spec, theta)
        return dZ @ W
    W1, _, W2, _ = _unpack(spec, theta)
    H = cache["H"]
    dA = (dZ @ W2) * (1.0 - H * H)
    return dA @ W1


def _onehot(y: np.ndarray, num_classes: int) -> np.ndarray:
    Y = np.zeros((y.shape[0], num_classes))
    Y[np.arange(y.shape[0]), y] = 1.0
    return Y


def cross_entropy(P: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of the true labels."""
    eps = 1e-300  # guards log(0) at saturation, far below float resolution
    return float(-np.mean(np.log(P[np.arange(y.shape[0]), y] + eps)))


def loss_and_grad(spec: ModelSpec, theta: np.ndarray, batch: Dataset):
    """Mean cross-entropy over the batch and its gradient w.r.t. theta."""
    if batch.n == 0:
        raise ValueError("batch must be non-empty")
    P, cache = forward_batch(spec, theta, batch.X)
    loss = cross_entropy(P, batch.y)
    dZ = (P - _onehot(batch.y, spec.num_classes)) / batch.n
    return loss, backprop_params(spec, theta, cache, dZ)


def input_grad_batch(spec: ModelSpec, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample gradient of that sample's cross-entropy w.r.t. its features."""
    P, cache = forward_batch(spec, theta, X)
    dZ = P - _onehot(np.asarray(y, dtype=np.int64), spec.num_classes)
    return backprop_inputs(spec, theta, cache, dZ)


def local_sgd_step(theta: np.ndarray, grad: np.ndarray, eta: float) -> np.ndarray:
    """One gradient-descent update: theta - eta * grad."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if theta.shape != grad.shape:
        raise ValueError(f"theta dim {theta.shape} != grad dim {grad.shape}")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    return theta - eta * grad


def evaluate(spec: ModelSpec, theta: np.ndarray, data: Dataset) -> tuple[float, float]:
    """(argmax accuracy, mean cross-entropy); argmax ties go to the smallest class."""
    if data.n == 0:
        raise ValueError("dataset must be non-empty")
    P, _ = forward_batch(spec, theta, data.X)
    pred = P.argmax(axis=1)  # np.argmax breaks ties toward the lowest index
    acc = float(np.mean(pred == data.y))
    return acc, cross_entropy(P, data.y)
