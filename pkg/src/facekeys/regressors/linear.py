"""Linear model family: least squares, ridge, lasso, elastic net.

All four fit an unpenalized intercept by centering X and Y. The penalized
objectives follow the 1/(2n) data-term convention:

    lasso:    (1/2n) ||Xw - y||^2 + alpha ||w||_1
    elastic:  (1/2n) ||Xw - y||^2 + alpha*rho ||w||_1
                                  + alpha*(1-rho)/2 ||w||^2
    ridge:    ||Xw - y||^2 + lam ||w||^2   (closed form)

so elastic with rho=1 is the lasso and with rho=0 it matches ridge at
lam = alpha * n. Lasso and elastic are solved by cyclic coordinate
descent with soft thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class LinearModel:
    """Per-output weight columns plus intercept row."""

    weights: np.ndarray  # (d, m)
    intercept: np.ndarray  # (m,)
    converged: bool = True


def linear_predict(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError(f"X must be (n, {model.weights.shape[0]})")
    return X @ model.weights + model.intercept


def _check_xy(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must be 2-d with matching row counts")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    return X, Y


def _center(X, Y):
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    return X - x_mean, Y - y_mean, x_mean, y_mean


def ols_fit(X, Y) -> LinearModel:
    """Least squares with intercept via a rank-tolerant solve.

    Rank-deficient inputs get the minimum-norm weight solution.
    """
    X, Y = _check_xy(X, Y)
    Xc, Yc, x_mean, y_mean = _center(X, Y)
    W, *_ = np.linalg.lstsq(Xc, Yc, rcond=None)
    return LinearModel(weights=W, intercept=y_mean - x_mean @ W)


def ridge_fit(X, Y, lam: float = 1.0) -> LinearModel:
    """Closed-form ridge: W = (Xc^T Xc + lam I)^-1 Xc^T Yc.

    The intercept is unpenalized (fit on centered data). lam = 0 falls
    back to the least-squares path. When there are more features than
    rows the algebraically identical dual form
    W = Xc^T (Xc Xc^T + lam I)^-1 Yc is solved instead.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if lam == 0.0:
        return ols_fit(X, Y)
    X, Y = _check_xy(X, Y)
    Xc, Yc, x_mean, y_mean = _center(X, Y)
    n, d = Xc.shape
    if d <= n:
        A = Xc.T @ Xc + lam * np.eye(d)
        W = np.linalg.solve(A, Xc.T @ Yc)
    else:
        A = Xc @ Xc.T + lam * np.eye(n)
        W = Xc.T @ np.linalg.solve(A, Yc)
    return LinearModel(weights=W, intercept=y_mean - x_mean @ W)


def _soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _coordinate_descent(
    Xc: np.ndarray,
    Yc: np.ndarray,
    l1: float,
    l2: float,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, bool]:
    """Cyclic coordinate descent on centered data, all outputs at once.

    Minimizes (1/2n)||Xw - y||^2 + l1 ||w||_1 + (l2/2) ||w||^2 per output
    column. Converged when no coefficient moves more than tol in a sweep.
    """
    n, d = Xc.shape
    m = Yc.shape[1]
    col_sq = (Xc * Xc).sum(axis=0) / n
    W = np.zeros((d, m))
    for _ in range(max_iter):
        # fresh residual each sweep so incremental float drift cannot build up
        R = Yc - Xc @ W
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            w_old = W[j].copy()
            rho = (Xc[:, j] @ R) / n + col_sq[j] * w_old
            w_new = _soft_threshold(rho, l1) / (col_sq[j] + l2)
            delta = w_new - w_old
            if np.any(delta != 0.0):
                R -= np.outer(Xc[:, j], delta)
                W[j] = w_new
            max_delta = max(max_delta, float(np.max(np.abs(delta))))
        if max_delta < tol:
            return W, True
    return W, False


def lasso_fit(X, Y, alpha: float = 0.1, max_iter: int = 1000, tol: float = 1e-6) -> LinearModel:
    """L1-penalized least squares by cyclic coordinate descent.

    At a solution the KKT conditions hold: for zero coefficients the
    per-feature correlation |X_j . r| / n stays within alpha, for active
    ones it equals alpha * sign(w_j). Non-convergence is reported through
    the model's converged flag, not an exception.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    X, Y = _check_xy(X, Y)
    Xc, Yc, x_mean, y_mean = _center(X, Y)
    W, converged = _coordinate_descent(Xc, Yc, alpha, 0.0, max_iter, tol)
    return LinearModel(weights=W, intercept=y_mean - x_mean @ W, converged=converged)


def elastic_fit(
    X,
    Y,
    alpha: float = 0.1,
    rho: float = 0.5,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> LinearModel:
    """Mixed L1/L2 penalty; rho=1 is the lasso, rho=0 is ridge at lam=alpha*n."""
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    X, Y = _check_xy(X, Y)
    Xc, Yc, x_mean, y_mean = _center(X, Y)
    W, converged = _coordinate_descent(
        Xc, Yc, alpha * rho, alpha * (1.0 - rho), max_iter, tol
    )
    return LinearModel(weights=W, intercept=y_mean - x_mean @ W, converged=converged)
