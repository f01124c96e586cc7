"""Shortcut probe: kNN mutual information, a linear baseline and the shortcut index."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .geometry import FUNCTIONAL_NAMES, TABLE_FUNCTIONALS

NOT_INFORMATIVE = "not-informative"


@dataclass
class LabeledFeatureTable:
    features: dict
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        self.features = {k: np.asarray(v, dtype=np.float64) for k, v in self.features.items()}
        for name, col in self.features.items():
            if col.shape != self.labels.shape:
                raise ValueError(f"feature {name!r} has {len(col)} rows, labels have {len(self.labels)}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"feature {name!r} has missing or non-finite values")

    @classmethod
    def from_records(cls, records, names=FUNCTIONAL_NAMES):
        rows = [r.functionals.as_dict() if hasattr(r, "functionals") else r for r in records]
        feats = {n: [row[n] for row in rows] for n in names}
        labels = [r.label if hasattr(r, "label") else r["label"] for r in records]
        return cls(feats, labels)

    def __len__(self):
        return len(self.labels)

    def matrix(self, names):
        return np.column_stack([self.features[n] for n in names])


@dataclass
class ProbeReport:
    scores: dict
    ranks: dict
    k: int
    n_samples: int
    class_counts: dict = field(default_factory=dict)
    unit: str = "nats"

    def rows(self):
        return sorted(((name, self.scores[name], self.ranks[name]) for name in self.scores),
                      key=lambda row: row[2])


def _tie_noise(values, scale):
    # fixed generator so repeated calls give identical scores
    rng = np.random.default_rng(0x5EED)
    return values + 1e-10 * scale * rng.uniform(-1.0, 1.0, size=values.shape)


def knn_mi(values, labels, k=3):
    """Mutual information (nats) between a continuous feature and discrete labels.

    Nearest-neighbour estimator of Ross (2014), clamped at zero.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels)
    n = len(y)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(x) != n:
        raise ValueError("values and labels differ in length")
    if n < 10:
        raise ValueError("need at least 10 samples")
    classes, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ValueError("need at least two label classes")
    if counts.min() <= k:
        raise ValueError(f"every class needs more than k={k} members")
    scale = float(np.ptp(x, axis=0).max())
    if scale == 0.0:
        return 0.0
    x = _tie_noise(x, scale)

    radius = np.empty(n)
    n_class = np.empty(n)
    for c in range(len(classes)):
        idx = np.flatnonzero(inverse == c)
        dist, _ = cKDTree(x[idx]).query(x[idx], k=k + 1, p=np.inf)
        radius[idx] = dist[:, -1]
        n_class[idx] = len(idx)
    tree = cKDTree(x)
    # strictly inside the radius, self included
    m = tree.query_ball_point(x, np.nextafter(radius, 0), p=np.inf,
                              return_length=True).astype(np.float64)
    mi = digamma(n) - np.mean(digamma(n_class)) + digamma(k) - np.mean(digamma(m))
    return max(0.0, float(mi))


def shortcut_probe(table, functionals=TABLE_FUNCTIONALS, k=3):
    """Score each functional by MI with the labels and rank them (1 = most informative)."""
    missing = [f for f in functionals if f not in table.features]
    if missing:
        raise KeyError(f"functionals not in table: {missing}")
    scores = {f: knn_mi(table.features[f], table.labels, k) for f in functionals}
    order = sorted(functionals, key=lambda f: (-scores[f], f))
    ranks = {f: r + 1 for r, f in enumerate(order)}
    classes, counts = np.unique(table.labels, return_counts=True)
    return ProbeReport(scores, ranks, k, len(table),
                       {str(c): int(n) for c, n in zip(classes, counts)})


@dataclass
class Baseline:
    classes: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    bias: np.ndarray

    def decision(self, X):
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.std
        return Z @ self.weights + self.bias

    def predict(self, X):
        return self.classes[np.argmax(self.decision(X), axis=1)]


def split_indices(n, seed=0, fractions=(0.8, 0.05, 0.15)):
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_logistic(X, y, l2=1e-3, lr=0.5, steps=2000):
    """Multinomial logistic regression by full-batch gradient descent on standardized X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    classes, yi = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("training split contains a single class")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = (X - mean) / std
    n, d = Z.shape
    onehot = np.eye(len(classes))[yi]
    W = np.zeros((d, len(classes)))
    b = np.zeros(len(classes))
    for _ in range(steps):
        grad = (_softmax(Z @ W + b) - onehot) / n
        W -= lr * (Z.T @ grad + l2 * W)
        b -= lr * grad.sum(axis=0)
    return Baseline(classes, mean, std, W, b)


def train_baseline(table, functionals=TABLE_FUNCTIONALS, seed=0, l2=1e-3, lr=0.5, steps=2000):
    """Fit on the 80% split, report accuracy on the held-out 15%."""
    X = table.matrix(functionals)
    y = table.labels
    train, _, test = split_indices(len(y), seed)
    if len(test) == 0:
        raise ValueError("empty test split")
    model = fit_logistic(X[train], y[train], l2=l2, lr=lr, steps=steps)
    accuracy = float(np.mean(model.predict(X[test]) == y[test]))
    return model, accuracy


def shortcut_index(m_a, m, n_classes=2):
    """tau = m_a / m with a flag when the reference accuracy is at chance."""
    if m == 0:
        raise ZeroDivisionError("reference accuracy m is zero")
    if not (0 < m <= 1 and 0 <= m_a <= 1):
        raise ValueError("accuracies must lie in [0, 1] with m > 0")
    flag = NOT_INFORMATIVE if n_classes == 2 and m <= 0.55 else ""
    return m_a / m, flag
