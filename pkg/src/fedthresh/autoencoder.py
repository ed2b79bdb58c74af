"""Dense autoencoder: forward pass, backprop, mini-batch training, checkpoints.

The model is a plain fully connected net with ReLU hidden layers and an
identity output layer, trained to reconstruct its input under per-feature
mean-squared error. Everything is numpy; models are immutable values and
training returns a new value, so a shared model can be evaluated from
multiple threads.
"""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergedTraining

MODEL_FORMAT_HEADER = "fedthresh-model v1"


@dataclass(frozen=True)
class ModelParams:
    """Layered weights/biases. weights[k] has shape (out_dim, in_dim)."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("weights and biases must be non-empty and parallel")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ConfigError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ConfigError(
                    f"layer {k}: in_dim {w.shape[1]} != previous out_dim "
                    f"{self.weights[k - 1].shape[0]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ConfigError(f"layer {k}: non-finite parameter")
            w.setflags(write=False)
            b.setflags(write=False)
        if self.input_dim != self.weights[-1].shape[0]:
            raise ConfigError("autoencoder must reconstruct its input dimension")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dims(self) -> tuple:
        """Layer size chain: (input_dim, out_dim of every layer)."""
        return (self.input_dim,) + tuple(w.shape[0] for w in self.weights)

    @property
    def activations(self) -> tuple:
        return ("relu",) * (len(self.weights) - 1) + ("identity",)


@dataclass(frozen=True)
class TrainConfig:
    local_epochs: int = 1
    learning_rate: float = 0.01
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" or "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


def default_hidden_dims(input_dim: int) -> tuple:
    """Shrinking bottleneck: d -> ceil(d/2) -> ceil(d/4)."""
    return (max(1, math.ceil(input_dim / 2)), max(1, math.ceil(input_dim / 4)))


def init_model(input_dim: int, hidden_dims, seed: int) -> ModelParams:
    """Symmetric encoder/decoder with uniform Glorot-style init, zero biases.

    Layer chain: input -> hidden_dims... -> reversed(hidden_dims[:-1]) -> input.
    """
    hidden_dims = tuple(int(h) for h in hidden_dims)
    if input_dim < 1 or not hidden_dims or any(h < 1 for h in hidden_dims):
        raise ConfigError(f"bad architecture: input_dim={input_dim}, hidden={hidden_dims}")
    chain = (input_dim,) + hidden_dims + tuple(reversed(hidden_dims[:-1])) + (input_dim,)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(chain[:-1], chain[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases))


def _check_batch(model: ModelParams, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ConfigError(
            f"batch shape {batch.shape} incompatible with input_dim {model.input_dim}"
        )
    return batch


def forward(model: ModelParams, batch: np.ndarray) -> np.ndarray:
    """Reconstruction of `batch`; ReLU hidden layers, identity output."""
    a = _check_batch(model, batch)
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        a = z if k == last else np.maximum(z, 0.0)
    return a


def mse_per_sample(model: ModelParams, data: np.ndarray) -> np.ndarray:
    """Per-row reconstruction error: mean over features of squared residual."""
    data = _check_batch(model, data)
    if data.shape[0] == 0:
        return np.empty(0)
    diff = forward(model, data) - data
    return np.mean(diff * diff, axis=1)


def _loss_and_grads(weights, biases, x):
    last = len(weights) - 1
    acts = [x]  # post-activation per layer, acts[0] is the input
    pre = []
    a = x
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if k == last else np.maximum(z, 0.0)
        acts.append(a)
    diff = acts[-1] - x
    n, d = x.shape
    loss = float(np.mean(diff * diff))
    delta = (2.0 / (n * d)) * diff
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for k in range(last, -1, -1):
        grad_w[k] = delta.T @ acts[k]
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ weights[k]) * (pre[k - 1] > 0.0)
    return loss, grad_w, grad_b


def mse_loss_and_grads(model: ModelParams, batch: np.ndarray):
    """MSE loss (mean over samples and features) and its parameter gradients.

    Returns (loss, grad_weights, grad_biases); grads are lists parallel to
    model.weights / model.biases. Backprop with delta = 2*(xhat - x)/(n*d)
    at the identity output, masked by ReLU derivatives on the way down.
    """
    x = _check_batch(model, batch)
    if x.shape[0] == 0:
        raise ConfigError("empty batch")
    return _loss_and_grads(model.weights, model.biases, x)


def train_local(model: ModelParams, data: np.ndarray, cfg: TrainConfig) -> ModelParams:
    """Mini-batch gradient descent on MSE for cfg.local_epochs epochs.

    Deterministic for a fixed cfg.seed (epoch shuffles come from one
    generator). Raises DivergedTraining with the failing epoch index when
    the loss goes non-finite.
    """
    data = _check_batch(model, data)
    if data.shape[0] == 0:
        raise ConfigError("training data is empty")
    rng = np.random.default_rng(cfg.seed)
    weights = [np.array(w) for w in model.weights]
    biases = [np.array(b) for b in model.biases]
    if cfg.optimizer == "adam":
        m_w = [np.zeros_like(w) for w in weights]
        v_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in biases]
        v_b = [np.zeros_like(b) for b in biases]
        step = 0
    n = data.shape[0]
    for epoch in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = data[order[start:start + cfg.batch_size]]
            loss, gw, gb = _loss_and_grads(weights, biases, batch)
            if not math.isfinite(loss):
                raise DivergedTraining(epoch)
            if cfg.optimizer == "sgd":
                for k in range(len(weights)):
                    weights[k] -= cfg.learning_rate * gw[k]
                    biases[k] -= cfg.learning_rate * gb[k]
            else:
                step += 1
                b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
                corr1 = 1.0 - b1 ** step
                corr2 = 1.0 - b2 ** step
                for k in range(len(weights)):
                    m_w[k] = b1 * m_w[k] + (1 - b1) * gw[k]
                    v_w[k] = b2 * v_w[k] + (1 - b2) * gw[k] ** 2
                    m_b[k] = b1 * m_b[k] + (1 - b1) * gb[k]
                    v_b[k] = b2 * v_b[k] + (1 - b2) * gb[k] ** 2
                    weights[k] -= cfg.learning_rate * (m_w[k] / corr1) / (
                        np.sqrt(v_w[k] / corr2) + eps)
                    biases[k] -= cfg.learning_rate * (m_b[k] / corr1) / (
                        np.sqrt(v_b[k] / corr2) + eps)
    # the loss check runs before each update; catch a blow-up on the last one
    for w, b in zip(weights, biases):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DivergedTraining(cfg.local_epochs - 1)
    return ModelParams(tuple(weights), tuple(biases))


def save_model(model: ModelParams, path) -> None:
    """Write the versioned text checkpoint (17 significant digits)."""
    lines = [MODEL_FORMAT_HEADER, "dims " + " ".join(str(d) for d in model.dims)]
    for w, b in zip(model.weights, model.biases):
        for row in w:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append(" ".join(f"{x:.17g}" for x in b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_model(path) -> ModelParams:
    """Read a checkpoint written by save_model; bit-exact round trip."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != MODEL_FORMAT_HEADER:
        raise ConfigError(f"{path}: not a {MODEL_FORMAT_HEADER} checkpoint")
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise ConfigError(f"{path}: missing dims line")
    dims = [int(t) for t in lines[1].split()[1:]]
    if len(dims) < 2:
        raise ConfigError(f"{path}: dims line needs at least two entries")
    weights, biases = [], []
    cursor = 2
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        need = fan_out + 1
        if cursor + need > len(lines):
            raise ConfigError(f"{path}: truncated checkpoint")
        rows = [np.array([float(t) for t in lines[cursor + r].split()])
                for r in range(fan_out)]
        w = np.vstack(rows)
        if w.shape != (fan_out, fan_in):
            raise ConfigError(f"{path}: layer block has shape {w.shape}, "
                              f"expected {(fan_out, fan_in)}")
        b = np.array([float(t) for t in lines[cursor + fan_out].split()])
        if b.shape != (fan_out,):
            raise ConfigError(f"{path}: bias line has {b.shape[0]} entries, "
                              f"expected {fan_out}")
        weights.append(w)
        biases.append(b)
        cursor += need
    return ModelParams(tuple(weights), tuple(biases))
