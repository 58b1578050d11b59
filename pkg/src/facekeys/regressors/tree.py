"""CART-style regression tree for vector targets.

Splits greedily minimize the summed per-output squared error of the two
children. Candidate thresholds are midpoints between consecutive distinct
sorted values; ties between equally good splits go to the lowest feature
index, then the lowest threshold. Leaves predict their mean target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class TreeNode:
    value: np.ndarray  # (m,) mean target of the node's rows
    n_samples: int
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(eq=False)
class TreeModel:
    root: TreeNode
    n_features: int
    n_outputs: int
    max_depth: int | None
    min_samples_leaf: int


def _sse_split_scan(x: np.ndarray, Y: np.ndarray, min_leaf: int):
    """Best split of one feature column, or None.

    Returns (children_sse, threshold) minimizing summed child squared
    error, scanning candidate boundaries with prefix sums.
    """
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundaries = np.nonzero(xs[:-1] < xs[1:])[0]  # split after position i
    if boundaries.size == 0:
        return None
    n_left = boundaries + 1
    n_right = n - n_left
    ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    boundaries = boundaries[ok]
    if boundaries.size == 0:
        return None
    n_left = n_left[ok]
    n_right = n_right[ok]

    ys = Y[order]
    cum1 = np.cumsum(ys, axis=0)
    cum2 = np.cumsum(ys * ys, axis=0)
    tot1 = cum1[-1]
    tot2 = cum2[-1]
    left1 = cum1[boundaries]
    left2 = cum2[boundaries]
    sse_left = (left2 - left1 * left1 / n_left[:, None]).sum(axis=1)
    right1 = tot1 - left1
    right2 = tot2 - left2
    sse_right = (right2 - right1 * right1 / n_right[:, None]).sum(axis=1)
    sse = np.maximum(sse_left, 0.0) + np.maximum(sse_right, 0.0)

    best = int(np.argmin(sse))  # first minimum has the lowest threshold
    i = int(boundaries[best])
    a, b = xs[i], xs[i + 1]
    t = (a + b) / 2.0
    if t >= b:  # adjacent floats can round the midpoint up; keep a <= t < b
        t = a
    return float(sse[best]), float(t)


def _best_split(X: np.ndarray, Y: np.ndarray, min_leaf: int):
    best = None
    for j in range(X.shape[1]):
        found = _sse_split_scan(X[:, j], Y, min_leaf)
        if found is None:
            continue
        sse, t = found
        if best is None or sse < best[0]:
            best = (sse, j, t)
    return best


def _node_sse(Y: np.ndarray) -> float:
    tot1 = Y.sum(axis=0)
    tot2 = (Y * Y).sum(axis=0)
    return float(np.maximum(tot2 - tot1 * tot1 / Y.shape[0], 0.0).sum())


def _grow(X, Y, depth, max_depth, min_leaf) -> TreeNode:
    node = TreeNode(value=Y.mean(axis=0), n_samples=X.shape[0])
    if max_depth is not None and depth >= max_depth:
        return node
    if X.shape[0] < 2 * min_leaf:
        return node
    if np.all(Y == Y[0]):
        return node
    found = _best_split(X, Y, min_leaf)
    if found is None:
        return node
    sse_children, j, t = found
    if sse_children >= _node_sse(Y):
        return node  # no error reduction
    left_mask = X[:, j] <= t
    node.feature = j
    node.threshold = t
    node.left = _grow(X[left_mask], Y[left_mask], depth + 1, max_depth, min_leaf)
    node.right = _grow(X[~left_mask], Y[~left_mask], depth + 1, max_depth, min_leaf)
    return node


def tree_fit(X, Y, max_depth: int | None = 5, min_samples_leaf: int = 1) -> TreeModel:
    """Grow a regression tree.

    max_depth=None grows until leaves are pure or too small, which makes
    the tree reproduce its training targets exactly when feature rows are
    distinct.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must be 2-d with matching row counts")
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on 0 rows")
    if max_depth is not None and max_depth < 0:
        raise ValueError(f"max_depth must be nonnegative, got {max_depth}")
    if min_samples_leaf < 1:
        raise ValueError(f"min_samples_leaf must be at least 1, got {min_samples_leaf}")
    root = _grow(X, Y, 0, max_depth, min_samples_leaf)
    return TreeModel(
        root=root,
        n_features=X.shape[1],
        n_outputs=Y.shape[1],
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
    )


def tree_predict(model: TreeModel, X) -> np.ndarray:
    """Route rows down the tree and emit leaf means."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"X must be (n, {model.n_features})")
    out = np.empty((X.shape[0], model.n_outputs))
    stack = [(model.root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
            continue
        go_left = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def tree_depth(model: TreeModel) -> int:
    """Longest root-to-leaf edge count."""

    def depth(node: TreeNode) -> int:
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    return depth(model.root)


def flatten_tree(model: TreeModel) -> dict[str, np.ndarray]:
    """Array form (preorder) used by model serialization."""
    features, thresholds, lefts, rights, values, counts = [], [], [], [], [], []

    def visit(node: TreeNode) -> int:
        my_id = len(features)
        features.append(node.feature)
        thresholds.append(node.threshold)
        lefts.append(-1)
        rights.append(-1)
        values.append(node.value)
        counts.append(node.n_samples)
        if not node.is_leaf:
            lefts[my_id] = visit(node.left)
            rights[my_id] = visit(node.right)
        return my_id

    visit(model.root)
    return {
        "feature": np.array(features, dtype=np.int64),
        "threshold": np.array(thresholds, dtype=np.float64),
        "left": np.array(lefts, dtype=np.int64),
        "right": np.array(rights, dtype=np.int64),
        "value": np.stack(values),
        "n_samples": np.array(counts, dtype=np.int64),
    }


def unflatten_tree(arrays: dict[str, np.ndarray], n_features: int,
                   max_depth: int | None, min_samples_leaf: int) -> TreeModel:
    """Rebuild a TreeModel from flatten_tree arrays."""

    def build(i: int) -> TreeNode:
        node = TreeNode(
            value=arrays["value"][i].copy(),
            n_samples=int(arrays["n_samples"][i]),
            feature=int(arrays["feature"][i]),
            threshold=float(arrays["threshold"][i]),
        )
        if not node.is_leaf:
            node.left = build(int(arrays["left"][i]))
            node.right = build(int(arrays["right"][i]))
        return node

    root = build(0)
    return TreeModel(
        root=root,
        n_features=n_features,
        n_outputs=arrays["value"].shape[1],
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
    )
