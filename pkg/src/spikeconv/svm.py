"""Linear multi-class SVM readout (one-vs-rest, L1 hinge, dual form).

Each binary subproblem is solved by dual coordinate descent with a seeded
coordinate order and a fixed pass budget, so fitting is exactly
reproducible. Features are used raw; C defaults to 1 and is not tuned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LinearModel", "fit", "decision_scores", "predict", "accuracy"]


@dataclass
class LinearModel:
    """Per-class hyperplanes plus the training label census used for ties."""

    classes: np.ndarray          # (C,) sorted original labels
    weights: np.ndarray          # (C, d)
    bias: np.ndarray             # (C,)
    class_counts: np.ndarray     # (C,) training samples per class

    def __post_init__(self):
        if self.weights.shape[0] != len(self.classes) or self.bias.shape[0] != len(self.classes):
            raise ValueError("per-class parameter counts disagree")


def fit(features: np.ndarray, labels: np.ndarray, c: float = 1.0, seed: int = 0,
        max_passes: int = 40, tol: float = 1e-4, fit_intercept: bool = False) -> LinearModel:
    """Train one-vs-rest linear SVMs on a feature matrix.

    Deterministic given (data, seed): coordinate orders are drawn from the
    seed and the solver stops on a fixed pass budget or when the largest
    projected gradient falls below ``tol``.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if len(y) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows vs {len(y)} labels")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("need at least two classes to fit a classifier")

    if fit_intercept:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    d = x.shape[1]
    sq = np.einsum("ij,ij->i", x, x)

    rng = np.random.default_rng(seed)
    weights = np.zeros((len(classes), d))
    for ci, cls in enumerate(classes):
        yb = np.where(y == cls, 1.0, -1.0)
        weights[ci] = _dual_cd(x, yb, sq, c, rng, max_passes, tol)

    if fit_intercept:
        bias = weights[:, -1].copy()
        weights = weights[:, :-1].copy()
    else:
        bias = np.zeros(len(classes))
    return LinearModel(classes, weights, bias, counts)


def _dual_cd(x, y, sq, c, rng, max_passes, tol):
    """Dual coordinate descent for min 1/2 w.w + C sum hinge(1 - y w.x)."""
    n = x.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1])
    for _ in range(max_passes):
        worst = 0.0
        for i in rng.permutation(n):
            if sq[i] == 0.0:
                continue  # zero row: cannot move the objective
            g = y[i] * (w @ x[i]) - 1.0
            if alpha[i] == 0.0:
                pg = min(g, 0.0)
            elif alpha[i] == c:
                pg = max(g, 0.0)
            else:
                pg = g
            apg = abs(pg)
            if apg > worst:
                worst = apg
            if apg > 1e-12:
                prev = alpha[i]
                alpha[i] = min(max(prev - g / sq[i], 0.0), c)
                if alpha[i] != prev:
                    w += (alpha[i] - prev) * y[i] * x[i]
        if worst < tol:
            break
    return w


def decision_scores(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Per-class scores, shape (samples, classes)."""
    x = np.asarray(features, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != model.weights.shape[1]:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match model "
            f"dimension {model.weights.shape[1]}"
        )
    scores = x @ model.weights.T + model.bias
    return scores[0] if squeeze else scores


def predict(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Argmax class per sample; exact score ties go to the most frequent
    training class, then to the lowest class index."""
    scores = np.atleast_2d(decision_scores(model, features))
    best = scores.max(axis=1, keepdims=True)
    tied = scores == best
    counts = np.where(tied, model.class_counts[None, :], -1)
    fullest = counts.max(axis=1, keepdims=True)
    idx = np.argmax(tied & (counts == fullest), axis=1)
    out = model.classes[idx]
    return out if np.asarray(features).ndim > 1 else out[0]


def accuracy(model: LinearModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of correct predictions; rejects an empty evaluation set."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("cannot score an empty evaluation set")
    return float(np.mean(predict(model, features) == y))
