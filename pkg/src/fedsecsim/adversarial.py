"""Adversarial examples, the consistency training objective, and update poisoning."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import models
from .data import Dataset
from .models import ModelSpec
from .rng import np_rng


class PNorm(str, Enum):
    INF = "inf"
    TWO = "two"


class AttackKind(str, Enum):
    NONE = "none"
    LABEL_FLIP = "label_flip"
    GRAD_SCALE = "grad_scale"
    GRAD_NEGATE = "grad_negate"


@dataclass(frozen=True)
class AttackConfig:
    kind: AttackKind = AttackKind.NONE
    poison_fraction: float = 0.0
    scale: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.poison_fraction <= 1.0:
            raise ValueError("poison_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class PerturbSpec:
    """Projected gradient ascent budget; steps=1 with a full-size step is FGSM."""

    epsilon: float
    p_norm: PNorm = PNorm.INF
    steps: int = 1
    step_size: float | None = None  # default 2.5 * epsilon / steps

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be > 0")

    @property
    def effective_step(self) -> float:
        if self.step_size is not None:
            return self.step_size
        return 2.5 * self.epsilon / self.steps


def _project(delta: np.ndarray, spec: PerturbSpec) -> np.ndarray:
    if spec.p_norm == PNorm.INF:
        return np.clip(delta, -spec.epsilon, spec.epsilon)
    norms = np.linalg.norm(delta, axis=-1, keepdims=True)
    factor = np.ones_like(norms)
    over = norms > spec.epsilon
    factor[over] = spec.epsilon / norms[over]
    return delta * factor


def perturb_batch(
    model: ModelSpec,
    theta: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    spec: PerturbSpec,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Loss-ascending perturbation of every sample within the norm budget.

    After projection the result is clamped to the dataset's observed
    feature box (which never grows the perturbation when X lies inside).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if spec.epsilon == 0.0:
        return X.copy()
    delta = np.zeros_like(X)
    step = spec.effective_step
    for _ in range(spec.steps):
        g = models.input_grad_batch(model, theta, X + delta, y)
        if spec.p_norm == PNorm.INF:
            delta = delta + step * np.sign(g)
        else:
            norms = np.linalg.norm(g, axis=-1, keepdims=True)
            safe = np.where(norms > 0, norms, 1.0)
            delta = delta + step * g / safe
        delta = _project(delta, spec)
    x_adv = X + delta
    if box is not None:
        x_adv = np.clip(x_adv, box[0], box[1])
    return x_adv


def perturb(
    model: ModelSpec,
    theta: np.ndarray,
    x: np.ndarray,
    y: int,
    spec: PerturbSpec,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Single-sample adversarial feature vector."""
    return perturb_batch(model, theta, x[None, :], np.array([y]), spec, box)[0]


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise KL(P || Q) for probability rows."""
    eps = 1e-300
    return np.sum(P * (np.log(P + eps) - np.log(Q + eps)), axis=-1)


def composite_value_fixed(
    model: ModelSpec,
    theta: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    X_adv: np.ndarray,
    target: np.ndarray,
    lam: float,
) -> float:
    """Objective value with the perturbation AND the KL target frozen.

    This is the function whose gradient :func:`total_loss` returns (the
    clean distribution is gradient-detached); finite differences of it
    validate the analytic gradient.
    """
    P, _ = models.forward_batch(model, theta, X)
    Q, _ = models.forward_batch(model, theta, X_adv)
    ce = models.cross_entropy(P, y)
    return ce + lam * float(np.mean(kl_divergence(target, Q)))


def total_loss(
    model: ModelSpec,
    theta: np.ndarray,
    batch: Dataset,
    spec: PerturbSpec,
    lam: float,
    box: tuple[np.ndarray, np.ndarray] | None = None,
):
    """Mean CE plus lam * KL(stop-grad clean prediction || adversarial prediction).

    The perturbation is regenerated for this batch; with lam = 0 or
    epsilon = 0 the value and gradient reduce to the plain loss.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X, y = batch.X, batch.y
    n = batch.n
    P, cache = models.forward_batch(model, theta, X)
    ce = models.cross_entropy(P, y)
    dZ = (P - np.eye(model.num_classes)[y]) / n
    grad = models.backprop_params(model, theta, cache, dZ)
    if lam == 0.0 or spec.epsilon == 0.0:
        return ce, grad
    X_adv = perturb_batch(model, theta, X, y, spec, box)
    Q, cache_adv = models.forward_batch(model, theta, X_adv)
    value = ce + lam * float(np.mean(kl_divergence(P, Q)))
    dZ_adv = lam * (Q - P) / n  # d/dlogits of -sum(P_detached * log Q)
    grad = grad + models.backprop_params(model, theta, cache_adv, dZ_adv)
    return value, grad


def poison_update(honest_grad: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Transform an honest update into the attacker's submission.

    LABEL_FLIP corrupts the node's dataset upstream, so the update itself
    passes through unchanged here.
    """
    if cfg.kind == AttackKind.NONE:
        raise ValueError("poison_update requires an active attack kind")
    g = np.asarray(honest_grad, dtype=np.float64)
    if cfg.kind == AttackKind.GRAD_SCALE:
        return cfg.scale * g
    if cfg.kind == AttackKind.GRAD_NEGATE:
        return -g
    return g.copy()


def poisoned_node_ids(num_nodes: int, cfg: AttackConfig, seed: int) -> frozenset[int]:
    """floor(poison_fraction * N) node ids, drawn deterministically from the seed."""
    count = int(cfg.poison_fraction * num_nodes)
    if cfg.kind == AttackKind.NONE or count == 0:
        return frozenset()
    rng = np_rng("poisoned-nodes", seed)
    chosen = rng.choice(num_nodes, size=count, replace=False)
    return frozenset(int(i) for i in chosen)


def flip_labels(y: np.ndarray, num_classes: int) -> np.ndarray:
    """Cyclic label permutation y -> (y + 1) mod C."""
    return (np.asarray(y, dtype=np.int64) + 1) % num_classes
