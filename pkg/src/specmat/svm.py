"""One-vs-rest linear SVM trained with Pegasos stochastic subgradient steps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from specmat.core import MaterialClass

N_CLASSES = len(MaterialClass)


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (n_classes, D)
    biases: np.ndarray  # (n_classes,)
    lam: float
    epochs: int = 0
    seed: int = 0
    batch_size: int = 1
    objective_history: list[float] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {X.shape[-1]}")
        return X @ self.weights.T + self.biases

    def to_dict(self) -> dict:
        return {
            "model_kind": "linear_svm",
            "lambda": self.lam,
            "epochs": self.epochs,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "objective_history": list(self.objective_history),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearSvmModel":
        if doc.get("model_kind") != "linear_svm":
            raise ValueError(f"not a linear svm model: {doc.get('model_kind')!r}")
        w = np.array(doc["weights"], dtype=float)
        b = np.array(doc["biases"], dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError("inconsistent weight/bias shapes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite weights")
        return cls(w, b, float(doc["lambda"]), int(doc["epochs"]), int(doc["seed"]),
                   int(doc.get("batch_size", 1)), list(doc["objective_history"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearSvmModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _signs(labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.where(labels[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)


def hinge_objective(W: np.ndarray, Xa: np.ndarray, Y: np.ndarray, lam: float) -> float:
    """Regularized hinge objective averaged over the binary problems."""
    margins = Y * (Xa @ W.T)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    reg = 0.5 * lam * np.sum(W * W, axis=1)
    return float(np.mean(reg + hinge))


def train_svm(features: np.ndarray, labels: np.ndarray, lam: float = 1e-4, epochs: int = 100,
              seed: int = 0, batch_size: int = 8, n_classes: int = N_CLASSES) -> LinearSvmModel:
    """Train one binary Pegasos classifier per class (class c vs the rest).

    The bias is a weight on a constant feature and is regularized with the
    rest. Each step takes a seeded minibatch, moves by the averaged hinge
    subgradient with step ``1 / (lam * t)`` and projects onto the ball of
    radius ``1 / sqrt(lam)``; ``batch_size=1`` is the single-sample
    algorithm. The objective is recorded after every epoch.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a non-empty (N, D) feature matrix")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")
    y = np.asarray(labels).astype(int)
    if y.shape != (len(X),) or y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must be a length-{len(X)} vector in 0..{n_classes - 1}")

    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    Y = _signs(y, n_classes)
    radius = 1.0 / math.sqrt(lam)
    rng = np.random.default_rng(seed)

    W = np.zeros((n_classes, d + 1))
    t = 0
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            t += 1
            eta = 1.0 / (lam * t)
            xb, yb = Xa[idx], Y[idx]
            active = (yb * (xb @ W.T) < 1.0) * yb
            W *= 1.0 - eta * lam
            W += (eta / len(idx)) * (active.T @ xb)
            norms = np.sqrt(np.einsum("ij,ij->i", W, W))
            over = norms > radius
            if over.any():
                W[over] *= (radius / norms[over])[:, None]
        history.append(hinge_objective(W, Xa, Y, lam))
    return LinearSvmModel(W[:, :-1].copy(), W[:, -1].copy(), lam, epochs, seed, batch_size, history)


def predict_svm(model: LinearSvmModel, x: np.ndarray) -> MaterialClass:
    """Highest-scoring class for one feature vector; ties go to the lowest code."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_svm takes a single feature vector")
    return MaterialClass(int(np.argmax(model.scores(x))))


def predict_svm_labels(model: LinearSvmModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.scores(np.atleast_2d(X)), axis=1)
