"""k-nearest-neighbor regression by exhaustive Euclidean search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class KnnModel:
    """Stored training matrix; prediction averages the k nearest rows."""

    X: np.ndarray  # (n, d)
    Y: np.ndarray  # (n, m)
    k: int


def knn_fit(X, Y, k: int = 5) -> KnnModel:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must be 2-d with matching row counts")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0]}], got {k}")
    return KnnModel(X=X.copy(), Y=Y.copy(), k=k)


def knn_predict(model: KnnModel, Xq) -> np.ndarray:
    """Mean target of the k nearest training rows per query.

    Distance ties are broken toward the lower training index. With k equal
    to the training size every query returns the global target mean.
    """
    Xq = np.asarray(Xq, dtype=np.float64)
    if Xq.ndim != 2 or Xq.shape[1] != model.X.shape[1]:
        raise ValueError(f"queries must be (n, {model.X.shape[1]})")
    # squared distances via the expansion ||q||^2 - 2 q.x + ||x||^2
    train_sq = (model.X * model.X).sum(axis=1)
    query_sq = (Xq * Xq).sum(axis=1)
    d2 = query_sq[:, None] - 2.0 * (Xq @ model.X.T) + train_sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    # stable sort keeps equal distances in training order
    nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
    return model.Y[nearest].mean(axis=1)
