"""Small numpy-only learners: logistic regression, CART forest, ROC-AUC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LearnError, SingleClassError
from .frame import make_rng


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise LearnError(f"X has shape {X.shape} but y has {len(y)} entries")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise LearnError("inputs contain non-finite values")
    if not np.isin(y, (0.0, 1.0)).all():
        raise LearnError("labels must be 0/1")
    if y.min() == y.max():
        raise SingleClassError("labels contain a single class")
    return X, y


def sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(s, dtype=np.float64)))


# --- logistic regression --------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    means: np.ndarray
    stds: np.ndarray
    n_iter: int = 0
    converged: bool = False


def log_loss(weights, intercept, Z, y, l2: float = 0.0) -> float:
    """Mean log-loss on standardized features plus an L2 penalty on the weights."""
    s = Z @ weights + intercept
    return float(np.mean(np.logaddexp(0.0, s) - y * s) + 0.5 * l2 * weights @ weights)


def log_loss_gradient(weights, intercept, Z, y, l2: float = 0.0) -> tuple[np.ndarray, float]:
    residual = sigmoid(Z @ weights + intercept) - y
    return Z.T @ residual / len(y) + l2 * weights, float(residual.mean())


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # zero-variance features standardize to 0 and so keep weight 0
    return means, np.where(stds > 0, stds, 1.0)


def fit_logistic(
    X,
    y,
    l2: float = 1e-6,
    learning_rate: float = 0.1,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> LogisticModel:
    """Full-batch gradient descent on standardized features.

    The step size is halved whenever a step would increase the loss and is
    not raised again.  Stops once the largest gradient component drops
    below ``tol`` or after ``max_iter`` iterations.
    """
    X, y = _check_xy(X, y)
    means, stds = standardization(X)
    Z = (X - means) / stds
    w = np.zeros(X.shape[1])
    b = 0.0
    loss = log_loss(w, b, Z, y, l2)
    lr = learning_rate
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gw, gb = log_loss_gradient(w, b, Z, y, l2)
        if max(np.abs(gw).max(initial=0.0), abs(gb)) < tol:
            converged = True
            break
        while True:
            w_new, b_new = w - lr * gw, b - lr * gb
            new_loss = log_loss(w_new, b_new, Z, y, l2)
            if new_loss <= loss or lr < 1e-12:
                break
            lr /= 2
        w, b, loss = w_new, b_new, new_loss
    return LogisticModel(w, float(b), means, stds, it, converged)


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.weights):
        raise LearnError(f"expected {len(model.weights)} features, got shape {X.shape}")
    return sigmoid(((X - model.means) / model.stds) @ model.weights + model.intercept)


def predict(model: LogisticModel, X, threshold: float = 0.5) -> np.ndarray:
    return predict_proba(model, X) >= threshold


# --- decision trees and forests -------------------------------------------

@dataclass(frozen=True)
class DecisionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of class 1 among training rows in the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, n = rows[active], node[active]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(X, y, idx, features, min_leaf):
    n = len(idx)
    yi = y[idx]
    n_pos = yi.sum()
    parent = 2.0 * (n_pos / n) * (1.0 - n_pos / n)
    best = (parent - 1e-12, -1, 0.0)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        pos_left = np.cumsum(yi[order])[:-1]
        pos_right = n_pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        impurity = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        impurity = np.where(valid, impurity, np.inf)
        k = int(np.argmin(impurity))
        if impurity[k] < best[0]:
            thr = 0.5 * (xs[k] + xs[k + 1])
            if not xs[k] <= thr < xs[k + 1]:
                thr = xs[k]
            best = (impurity[k], int(f), float(thr))
    return best[1], best[2]


def fit_tree(X, y, rng: np.random.Generator, max_features: int | None = None, min_leaf: int = 2) -> DecisionTree:
    """CART with Gini impurity; a node becomes a leaf when pure, too small to
    split into two leaves of ``min_leaf`` rows, or when none of its sampled
    candidate features yields an impurity decrease."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    m = d if max_features is None else max(1, min(d, max_features))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root_idx = np.arange(len(y))
    stack = [(new_node(root_idx), root_idx)]
    while stack:
        node, idx = stack.pop()
        n_pos = y[idx].sum()
        if n_pos == 0 or n_pos == len(idx) or len(idx) < 2 * min_leaf:
            continue
        candidates = rng.choice(d, size=m, replace=False) if m < d else np.arange(d)
        f, thr = _best_split(X, y, idx, candidates, min_leaf)
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
    )


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[DecisionTree, ...]
    n_trees: int
    seed: int
    max_features: int
    max_features_rule: str = "sqrt"


def fit_random_forest(X, y, n_trees: int = 100, seed: int = 0, min_leaf: int = 2) -> RandomForest:
    """Bagged CART trees with ceil(sqrt(d)) candidate features per split.

    Tree ``t`` draws its bootstrap rows and feature subsets from a generator
    seeded with ``(seed, t)``, so results do not depend on fitting order.
    """
    X, y = _check_xy(X, y)
    if n_trees < 1:
        raise LearnError("n_trees must be at least 1")
    n, d = X.shape
    m = math.ceil(math.sqrt(d))
    trees = []
    for t in range(n_trees):
        rng = make_rng([seed, t])
        rows = rng.integers(0, n, size=n)
        trees.append(fit_tree(X[rows], y[rows], rng, m, min_leaf))
    return RandomForest(tuple(trees), n_trees, seed, m)


def rf_predict_proba(forest: RandomForest, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.mean([tree.predict_proba(X) for tree in forest.trees], axis=0)


# --- ranking metrics ------------------------------------------------------

def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    boundaries = np.flatnonzero(np.diff(xs) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(x)]])
    group = np.repeat(np.arange(len(starts)), ends - starts)
    ranks = np.empty(len(x), dtype=np.float64)
    ranks[order] = ((starts + ends + 1) / 2.0)[group]
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative (ties count half)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise LearnError("scores and labels differ in length")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC-AUC needs both classes")
    ranks = average_ranks(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
