"""Fully connected regression network trained by backprop.

Hidden layers use tanh, the output layer is linear, and the loss is mean
squared error. Training runs mini-batch SGD-with-momentum or RMSprop with
inverted dropout on hidden activations. Target coordinates are fit in the
scaled space y' = (y - 48) / 48 and mapped back at prediction time, which
keeps the linear output head in tanh-friendly range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optim import (
    TrainingDiverged,
    batch_slices,
    dropout_mask,
    glorot_uniform,
    make_optimizer,
    mse_loss_and_grad,
)

_ACTIVATIONS = ("tanh", "relu")


@dataclass(eq=False)
class MlpModel:
    """Weights/biases per layer plus the target scaling used in training."""

    weights: list[np.ndarray]  # layer i: (fan_in, fan_out)
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    target_offset: float = 0.0
    target_scale: float = 1.0
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[1]


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activate_grad(z: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - h * h
    return (z > 0.0).astype(np.float64)


def forward(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    activation: str = "tanh",
    masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Network output for a batch; masks apply dropout to hidden layers."""
    a = X
    last = len(weights) - 1
    for i in range(last):
        h = _activate(a @ weights[i] + biases[i], activation)
        if masks is not None:
            h = h * masks[i]
        a = h
    return a @ weights[last] + biases[last]


def loss_and_gradients(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    Y: np.ndarray,
    activation: str = "tanh",
    masks: list[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE loss and its gradients for every weight and bias tensor."""
    last = len(weights) - 1
    acts = [X]  # layer inputs (post-dropout)
    zs = []
    hs = []  # pre-dropout activations, needed for the tanh gradient
    a = X
    for i in range(last):
        z = a @ weights[i] + biases[i]
        h = _activate(z, activation)
        zs.append(z)
        hs.append(h)
        if masks is not None:
            h = h * masks[i]
        acts.append(h)
        a = h
    pred = a @ weights[last] + biases[last]
    loss, dpred = mse_loss_and_grad(pred, Y)

    grads_w: list[np.ndarray] = [None] * len(weights)
    grads_b: list[np.ndarray] = [None] * len(weights)
    delta = dpred
    grads_w[last] = acts[last].T @ delta
    grads_b[last] = delta.sum(axis=0)
    for i in range(last - 1, -1, -1):
        delta = delta @ weights[i + 1].T
        if masks is not None:
            delta = delta * masks[i]
        delta = delta * _activate_grad(zs[i], hs[i], activation)
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
    return loss, grads_w, grads_b


def init_mlp(
    n_inputs: int,
    hidden: tuple[int, ...],
    n_outputs: int,
    seed: int,
    activation: str = "tanh",
) -> MlpModel:
    """Glorot-uniform initialized network, deterministic per seed."""
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    sizes = (n_inputs, *hidden, n_outputs)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(glorot_uniform(rng, fan_in, fan_out, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, hidden_activation=activation)


def mlp_fit(
    X,
    Y,
    hidden: tuple[int, ...] = (300, 150, 50),
    epochs: int = 500,
    batch_size: int = 30,
    optimizer: str = "rmsprop",
    learning_rate: float | None = None,
    dropout: float = 0.5,
    momentum: float = 0.9,
    rms_decay: float = 0.9,
    seed: int = 0,
    scale_targets: bool = True,
) -> MlpModel:
    """Train an MLP regressor.

    The recorded loss_history holds the full-training-set MSE (dropout
    off, scaled target space) at the end of each epoch. A non-finite loss
    aborts with TrainingDiverged naming the epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must be 2-d with matching row counts")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout must be in [0, 1), got {dropout}")
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")

    model = init_mlp(X.shape[1], tuple(hidden), Y.shape[1], seed)
    if scale_targets:
        model.target_offset, model.target_scale = 48.0, 48.0
    Ys = (Y - model.target_offset) / model.target_scale

    rng = np.random.default_rng(seed + 1)  # batching and dropout stream
    params = model.weights + model.biases
    opt = make_optimizer(optimizer, params, learning_rate, momentum, rms_decay)
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for batch in batch_slices(n, batch_size, order):
            masks = None
            if dropout > 0.0:
                masks = [
                    dropout_mask(rng, (batch.size, w.shape[1]), dropout)
                    for w in model.weights[:-1]
                ]
            loss, gw, gb = loss_and_gradients(
                model.weights, model.biases, X[batch], Ys[batch],
                model.hidden_activation, masks,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"mlp loss became non-finite at epoch {epoch}")
            opt.step(params, gw + gb)
        epoch_loss, _, _ = loss_and_gradients(
            model.weights, model.biases, X, Ys, model.hidden_activation
        )
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(f"mlp loss became non-finite at epoch {epoch}")
        model.loss_history.append(epoch_loss)
    return model


def mlp_predict(model: MlpModel, X) -> np.ndarray:
    """Deterministic forward pass (dropout off), unscaled outputs."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"X must be (n, {model.n_inputs})")
    pred = forward(model.weights, model.biases, X, model.hidden_activation)
    return pred * model.target_scale + model.target_offset
