"""Regressor registry: uniform fit/predict dispatch plus serialization.

Eight kinds are available: knn, ols, ridge, lasso, elastic, tree, mlp,
cnn. A RegressorSpec names the kind, its hyperparameters, and a seed;
fit_any validates and routes, predict_any dispatches on the fitted model
type, and save_model/load_model round-trip any fitted model through a
self-describing .npz container.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .knn import KnnModel, knn_fit, knn_predict
from .linear import LinearModel, elastic_fit, lasso_fit, linear_predict, ols_fit, ridge_fit
from .tree import TreeModel, flatten_tree, tree_fit, tree_predict, unflatten_tree
from .mlp import MlpModel, mlp_fit, mlp_predict
from .cnn import CnnModel, cnn_fit, cnn_predict
from .optim import TrainingDiverged

__all__ = [
    "RegressorSpec", "ConfigError", "TrainingDiverged",
    "fit_any", "predict_any", "save_model", "load_model",
    "KnnModel", "LinearModel", "TreeModel", "MlpModel", "CnnModel",
    "knn_fit", "knn_predict", "ols_fit", "ridge_fit", "lasso_fit",
    "elastic_fit", "linear_predict", "tree_fit", "tree_predict",
    "mlp_fit", "mlp_predict", "cnn_fit", "cnn_predict",
]


class ConfigError(ValueError):
    """Unknown regressor kind or invalid hyperparameters."""


# per kind: hyperparameter name -> (type check, description)
_ALLOWED: dict[str, set[str]] = {
    "knn": {"k"},
    "ols": set(),
    "ridge": {"lam"},
    "lasso": {"alpha", "max_iter", "tol"},
    "elastic": {"alpha", "rho", "max_iter", "tol"},
    "tree": {"max_depth", "min_samples_leaf"},
    "mlp": {
        "hidden", "epochs", "batch_size", "optimizer", "learning_rate",
        "dropout", "momentum", "rms_decay", "scale_targets",
    },
    "cnn": {
        "epochs", "batch_size", "optimizer", "learning_rate",
        "dropout_conv", "dropout_dense", "momentum", "rms_decay",
        "scale_targets",
    },
}

KINDS = tuple(_ALLOWED)


@dataclass
class RegressorSpec:
    """What to train: a kind tag, its hyperparameters, and a seed."""

    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _ALLOWED:
            raise ConfigError(
                f"unknown regressor kind {self.kind!r}; expected one of {KINDS}"
            )
        extra = set(self.hyperparameters) - _ALLOWED[self.kind]
        if extra:
            raise ConfigError(
                f"{self.kind} does not accept hyperparameters {sorted(extra)}"
            )


def fit_any(spec: RegressorSpec, X, Y):
    """Train the model a spec describes.

    X is a 2-d feature matrix for every kind except cnn, which takes
    (n, side, side) grids. Stochastic kinds (mlp, cnn) are bit-for-bit
    reproducible for a fixed seed.
    """
    hp = dict(spec.hyperparameters)
    if spec.kind == "knn":
        return knn_fit(X, Y, k=hp.get("k", 5))
    if spec.kind == "ols":
        return ols_fit(X, Y)
    if spec.kind == "ridge":
        return ridge_fit(X, Y, lam=hp.get("lam", 1.0))
    if spec.kind == "lasso":
        return lasso_fit(X, Y, **hp)
    if spec.kind == "elastic":
        return elastic_fit(X, Y, **hp)
    if spec.kind == "tree":
        return tree_fit(X, Y, **hp)
    if spec.kind == "mlp":
        return mlp_fit(X, Y, seed=spec.seed, **hp)
    return cnn_fit(X, Y, seed=spec.seed, **hp)


def predict_any(model, X) -> np.ndarray:
    """Predict with any fitted model; dispatches on the model type."""
    if isinstance(model, KnnModel):
        return knn_predict(model, X)
    if isinstance(model, LinearModel):
        return linear_predict(model, X)
    if isinstance(model, TreeModel):
        return tree_predict(model, X)
    if isinstance(model, MlpModel):
        return mlp_predict(model, X)
    if isinstance(model, CnnModel):
        return cnn_predict(model, X)
    raise ConfigError(f"cannot predict with object of type {type(model).__name__}")


def _model_kind(model) -> str:
    if isinstance(model, KnnModel):
        return "knn"
    if isinstance(model, LinearModel):
        return "linear"
    if isinstance(model, TreeModel):
        return "tree"
    if isinstance(model, MlpModel):
        return "mlp"
    if isinstance(model, CnnModel):
        return "cnn"
    raise ConfigError(f"cannot serialize object of type {type(model).__name__}")


def save_model(path, model, extras: dict | None = None) -> None:
    """Write a fitted model (plus optional JSON-safe extras) to .npz."""
    kind = _model_kind(model)
    meta: dict = {"kind": kind, "extras": extras or {}}
    arrays: dict[str, np.ndarray] = {}
    if kind == "knn":
        meta["k"] = model.k
        arrays["knn_x"] = model.X
        arrays["knn_y"] = model.Y
    elif kind == "linear":
        meta["converged"] = bool(model.converged)
        arrays["lin_w"] = model.weights
        arrays["lin_b"] = model.intercept
    elif kind == "tree":
        meta["n_features"] = model.n_features
        meta["max_depth"] = model.max_depth
        meta["min_samples_leaf"] = model.min_samples_leaf
        for name, arr in flatten_tree(model).items():
            arrays[f"tree_{name}"] = arr
    elif kind == "mlp":
        meta["n_layers"] = len(model.weights)
        meta["hidden_activation"] = model.hidden_activation
        meta["target_offset"] = model.target_offset
        meta["target_scale"] = model.target_scale
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"mlp_w{i}"] = w
            arrays[f"mlp_b{i}"] = b
    else:
        meta["side"] = model.side
        meta["dropout_conv"] = model.dropout_conv
        meta["dropout_dense"] = model.dropout_dense
        meta["target_offset"] = model.target_offset
        meta["target_scale"] = model.target_scale
        for name, arr in model.params.items():
            arrays[f"cnn_{name}"] = arr
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_model(path):
    """Read a model written by save_model. Returns (model, extras)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        kind = meta["kind"]
        if kind == "knn":
            model = KnnModel(X=data["knn_x"], Y=data["knn_y"], k=int(meta["k"]))
        elif kind == "linear":
            model = LinearModel(
                weights=data["lin_w"],
                intercept=data["lin_b"],
                converged=bool(meta["converged"]),
            )
        elif kind == "tree":
            arrays = {
                name: data[f"tree_{name}"]
                for name in ("feature", "threshold", "left", "right", "value", "n_samples")
            }
            model = unflatten_tree(
                arrays,
                n_features=int(meta["n_features"]),
                max_depth=meta["max_depth"],
                min_samples_leaf=int(meta["min_samples_leaf"]),
            )
        elif kind == "mlp":
            n = int(meta["n_layers"])
            model = MlpModel(
                weights=[data[f"mlp_w{i}"] for i in range(n)],
                biases=[data[f"mlp_b{i}"] for i in range(n)],
                hidden_activation=meta["hidden_activation"],
                target_offset=float(meta["target_offset"]),
                target_scale=float(meta["target_scale"]),
            )
        elif kind == "cnn":
            from .cnn import PARAM_NAMES

            model = CnnModel(
                params={k: data[f"cnn_{k}"] for k in PARAM_NAMES},
                side=int(meta["side"]),
                dropout_conv=float(meta["dropout_conv"]),
                dropout_dense=float(meta["dropout_dense"]),
                target_offset=float(meta["target_offset"]),
                target_scale=float(meta["target_scale"]),
            )
        else:
            raise ConfigError(f"unknown model kind {kind!r} in {path}")
    return model, meta.get("extras", {})
