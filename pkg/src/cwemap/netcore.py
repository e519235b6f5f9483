"""Per-node classifiers: forward pass, loss, gradients, Adam, training.

A node classifier is a bias-free single-layer network: one output neuron
per child class, each fully connected to the binary feature vector.  The
logit for class i is the sparse dot product of the feature vector with
weight column i; a sigmoid turns it into an independent per-class score
(multi-label, classes are not mutually exclusive).  Training minimizes
mean binary cross-entropy computed in the numerically stable logit form.

A two-layer variant (one sigmoid hidden layer) backs the over-fitting
baseline; it shares the loss, the Adam update, and the training loop
structure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .features import FeatureVector

LOSS_PLATEAU_DELTA = 1e-5


@dataclass
class TrainConfig:
    """Optimization and inference settings shared across the model."""

    learning_rate: float = 0.02
    max_epochs: int = 500
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    decision_threshold: float = 0.75
    early_stop_patience: int = 20
    seed: int = 0
    weight_init: str = "tfidf"
    min_term_count: int = 3

    def __post_init__(self):
        if not 0.0 < self.adam_beta1 < 1.0 or not 0.0 < self.adam_beta2 < 1.0:
            raise ConfigurationError("adam betas must lie in (0, 1)")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigurationError("decision_threshold must lie in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ConfigurationError("learning_rate must be positive")
        if self.max_epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("bad epoch/batch settings")
        if self.weight_init not in ("tfidf", "random"):
            raise ConfigurationError(f"unknown weight_init {self.weight_init!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "decision_threshold": self.decision_threshold,
            "early_stop_patience": self.early_stop_patience,
            "seed": self.seed,
            "weight_init": self.weight_init,
            "min_term_count": self.min_term_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class NodeClassifier:
    """Single-layer, bias-free classifier over one node's children."""

    node_id: str
    child_ids: tuple[str, ...]
    weights: np.ndarray  # shape (D, C), float64
    dictionary_fingerprint: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] != len(self.child_ids):
            raise ConfigurationError(
                f"{self.node_id}: weights shape {self.weights.shape} does not match "
                f"{len(self.child_ids)} children"
            )


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, weights: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(weights), np.zeros_like(weights), 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_dimension(clf, fv: FeatureVector) -> None:
    d = clf.weights.shape[0] if isinstance(clf, NodeClassifier) else clf.w_hidden.shape[0]
    if fv.dimension != d:
        raise ConfigurationError(
            f"{clf.node_id}: feature dimension {fv.dimension} != weight rows {d}"
        )


def forward_logits(clf: NodeClassifier, fv: FeatureVector) -> np.ndarray:
    """Pre-sigmoid outputs: sum of the weight rows selected by the on-bits."""
    _check_dimension(clf, fv)
    if not fv.on_positions:
        return np.zeros(clf.weights.shape[1], dtype=np.float64)
    return clf.weights[list(fv.on_positions)].sum(axis=0)


def forward_scores(clf: NodeClassifier, fv: FeatureVector) -> np.ndarray:
    return sigmoid(forward_logits(clf, fv))


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy over classes, stable for large |logit|."""
    x = np.asarray(logits, dtype=np.float64)
    z = np.asarray(targets, dtype=np.float64)
    if x.shape != z.shape:
        raise ConfigurationError(f"logits shape {x.shape} != targets shape {z.shape}")
    per_class = np.maximum(x, 0.0) - x * z + np.log1p(np.exp(-np.abs(x)))
    return float(per_class.mean())


Example = tuple[FeatureVector, np.ndarray]


def gradient(clf: NodeClassifier, batch: list[Example]) -> np.ndarray:
    """Exact gradient of the batch-mean BCE loss with respect to the weights."""
    if not batch:
        raise ConfigurationError("gradient of an empty batch")
    d, c = clf.weights.shape
    grad = np.zeros((d, c), dtype=np.float64)
    scale = 1.0 / (c * len(batch))
    for fv, targets in batch:
        if len(targets) != c:
            raise ConfigurationError(f"{clf.node_id}: target length {len(targets)} != {c}")
        residual = (sigmoid(forward_logits(clf, fv)) - targets) * scale
        if fv.on_positions:
            grad[list(fv.on_positions)] += residual
    return grad


def batch_loss(clf: NodeClassifier, batch: list[Example]) -> float:
    return float(
        np.mean([bce_with_logits(forward_logits(clf, fv), z) for fv, z in batch])
    )


def adam_step(
    weights: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new weights and state."""
    t = state.step_count + 1
    m = cfg.adam_beta1 * state.first_moment + (1.0 - cfg.adam_beta1) * grads
    v = cfg.adam_beta2 * state.second_moment + (1.0 - cfg.adam_beta2) * grads**2
    m_hat = m / (1.0 - cfg.adam_beta1**t)
    v_hat = v / (1.0 - cfg.adam_beta2**t)
    new_weights = weights - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return new_weights, AdamState(first_moment=m, second_moment=v, step_count=t)


def _write_loss_log(log_path, losses: list[float]) -> None:
    with Path(log_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(losses):
            writer.writerow([epoch, f"{loss:.10g}"])


def _epoch_order(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(n)


def train_node(
    clf: NodeClassifier,
    examples: list[Example],
    cfg: TrainConfig,
    log_path: str | Path | None = None,
) -> tuple[NodeClassifier, list[float]]:
    """Mini-batch Adam training with a training-loss plateau stop.

    Deterministic for a fixed (seed, data, config): shuffling is driven by a
    generator seeded from cfg.seed.  Stops early when the mean epoch loss
    has not improved by at least LOSS_PLATEAU_DELTA for
    ``early_stop_patience`` consecutive epochs (patience <= 0 disables).
    Returns the trained classifier and the per-epoch loss history.
    """
    if not examples:
        raise ConfigurationError(f"{clf.node_id}: no training examples")
    for fv, _ in examples:
        _check_dimension(clf, fv)

    weights = clf.weights.copy()
    state = AdamState.zeros_like(weights)
    rng = np.random.default_rng(cfg.seed)
    n = len(examples)
    losses: list[float] = []
    best = np.inf
    stale = 0
    for _ in range(cfg.max_epochs):
        order = _epoch_order(rng, n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            work = replace(clf, weights=weights)
            total += batch_loss(work, batch) * len(batch)
            grads = gradient(work, batch)
            weights, state = adam_step(weights, grads, state, cfg)
        epoch_loss = total / n
        losses.append(epoch_loss)
        if epoch_loss < best - LOSS_PLATEAU_DELTA:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience > 0 and stale >= cfg.early_stop_patience:
                break
    if log_path is not None:
        _write_loss_log(log_path, losses)
    return replace(clf, weights=weights), losses


@dataclass
class TwoLayerClassifier:
    """Baseline node classifier with one sigmoid hidden layer (no biases)."""

    node_id: str
    child_ids: tuple[str, ...]
    w_hidden: np.ndarray  # shape (D, H)
    w_out: np.ndarray  # shape (H, C)
    dictionary_fingerprint: str = ""

    def __post_init__(self):
        self.w_hidden = np.asarray(self.w_hidden, dtype=np.float64)
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        if self.w_hidden.shape[1] != self.w_out.shape[0]:
            raise ConfigurationError(f"{self.node_id}: hidden width mismatch")
        if self.w_out.shape[1] != len(self.child_ids):
            raise ConfigurationError(f"{self.node_id}: output width != number of children")


def two_layer_logits(clf: TwoLayerClassifier, fv: FeatureVector) -> np.ndarray:
    _check_dimension(clf, fv)
    if fv.on_positions:
        pre = clf.w_hidden[list(fv.on_positions)].sum(axis=0)
    else:
        pre = np.zeros(clf.w_hidden.shape[1], dtype=np.float64)
    return sigmoid(pre) @ clf.w_out


def two_layer_scores(clf: TwoLayerClassifier, fv: FeatureVector) -> np.ndarray:
    return sigmoid(two_layer_logits(clf, fv))


def two_layer_gradient(
    clf: TwoLayerClassifier, batch: list[Example]
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagated gradients (d_hidden, d_out) of the batch-mean BCE."""
    if not batch:
        raise ConfigurationError("gradient of an empty batch")
    g_hidden = np.zeros_like(clf.w_hidden)
    g_out = np.zeros_like(clf.w_out)
    c = clf.w_out.shape[1]
    scale = 1.0 / (c * len(batch))
    for fv, targets in batch:
        if fv.on_positions:
            pre = clf.w_hidden[list(fv.on_positions)].sum(axis=0)
        else:
            pre = np.zeros(clf.w_hidden.shape[1], dtype=np.float64)
        hidden = sigmoid(pre)
        residual = (sigmoid(hidden @ clf.w_out) - targets) * scale
        g_out += np.outer(hidden, residual)
        d_pre = (clf.w_out @ residual) * hidden * (1.0 - hidden)
        if fv.on_positions:
            g_hidden[list(fv.on_positions)] += d_pre
    return g_hidden, g_out


def two_layer_batch_loss(clf: TwoLayerClassifier, batch: list[Example]) -> float:
    return float(
        np.mean([bce_with_logits(two_layer_logits(clf, fv), z) for fv, z in batch])
    )


def train_two_layer(
    clf: TwoLayerClassifier,
    examples: list[Example],
    cfg: TrainConfig,
) -> tuple[TwoLayerClassifier, list[float]]:
    """Same loop as train_node, updating both layers with separate Adam state."""
    if not examples:
        raise ConfigurationError(f"{clf.node_id}: no training examples")
    w_hidden = clf.w_hidden.copy()
    w_out = clf.w_out.copy()
    state_h = AdamState.zeros_like(w_hidden)
    state_o = AdamState.zeros_like(w_out)
    rng = np.random.default_rng(cfg.seed)
    n = len(examples)
    losses: list[float] = []
    best = np.inf
    stale = 0
    for _ in range(cfg.max_epochs):
        order = _epoch_order(rng, n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            work = replace(clf, w_hidden=w_hidden, w_out=w_out)
            total += two_layer_batch_loss(work, batch) * len(batch)
            g_h, g_o = two_layer_gradient(work, batch)
            w_hidden, state_h = adam_step(w_hidden, g_h, state_h, cfg)
            w_out, state_o = adam_step(w_out, g_o, state_o, cfg)
        epoch_loss = total / n
        losses.append(epoch_loss)
        if epoch_loss < best - LOSS_PLATEAU_DELTA:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience > 0 and stale >= cfg.early_stop_patience:
                break
    return replace(clf, w_hidden=w_hidden, w_out=w_out), losses
