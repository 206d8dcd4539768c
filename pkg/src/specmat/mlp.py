"""Feed-forward classifier trained with Adam, written against plain numpy.

Hidden layers are ``affine -> leaky ReLU -> inverted dropout``; the output
layer is ``affine -> softmax``. Everything runs in float64 so the analytic
gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from specmat.core import MaterialClass

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden: tuple[int, ...] = (64, 64, 32, 32)
    output_dim: int = len(MaterialClass)
    leaky_slope: float = 0.3
    dropout_rate: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input and output dims must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.leaky_slope < 0:
            raise ValueError("leaky_slope must be non-negative")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # (fan_out, fan_in)
    biases: list[np.ndarray]  # (fan_out,)

    def tensors(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_tensors(cls, tensors: list[np.ndarray]) -> "MlpParams":
        return cls(list(tensors[0::2]), list(tensors[1::2]))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check(self, arch: MlpArchitecture) -> None:
        sizes = arch.sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("layer count does not match architecture")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i}: shapes {w.shape}/{b.shape} do not match architecture")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, tensors: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in tensors], [np.zeros_like(p) for p in tensors], 0)


@dataclass
class MlpModel:
    arch: MlpArchitecture
    params: MlpParams
    config: TrainConfig
    epoch_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model_kind": "mlp",
            "architecture": asdict(self.arch),
            "train_config": asdict(self.config),
            "seed": self.config.seed,
            "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                       for w, b in zip(self.params.weights, self.params.biases)],
            "epoch_losses": list(self.epoch_losses),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        if doc.get("model_kind") != "mlp":
            raise ValueError(f"not an mlp model: {doc.get('model_kind')!r}")
        arch_doc = dict(doc["architecture"])
        arch_doc["hidden"] = tuple(arch_doc["hidden"])
        arch = MlpArchitecture(**arch_doc)
        params = MlpParams([np.array(l["weight"], dtype=float) for l in doc["layers"]],
                           [np.array(l["bias"], dtype=float) for l in doc["layers"]])
        params.check(arch)
        return cls(arch, params, TrainConfig(**doc["train_config"]), list(doc["epoch_losses"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def init_params(arch: MlpArchitecture, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(arch.sizes[:-1], arch.sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: MlpParams, x: np.ndarray, arch: MlpArchitecture, train: bool = False,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, list[dict]]:
    """Class probabilities for ``x`` (one row or a batch) plus per-layer caches.

    In train mode every hidden activation goes through inverted dropout with
    masks drawn from ``rng``; eval mode is deterministic.
    """
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.shape[1] != arch.input_dim:
        raise ValueError(f"expected {arch.input_dim} features, got {a.shape[1]}")
    drop = train and arch.dropout_rate > 0
    if drop and rng is None:
        raise ValueError("train mode with dropout needs an rng")
    keep = 1.0 - arch.dropout_rate
    cache = []
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        entry = {"input": a, "pre": z, "mask": None}
        cache.append(entry)
        if i == n_layers - 1:
            probs = softmax(z)
            break
        if arch.leaky_slope <= 1.0:
            a = np.maximum(z, arch.leaky_slope * z)
        else:
            a = np.where(z >= 0, z, arch.leaky_slope * z)
        if drop:
            mask = (rng.random(a.shape) < keep) / keep
            entry["mask"] = mask
            a = a * mask
        entry["output"] = a
    return (probs[0] if single else probs), cache


def _check_labels(labels: np.ndarray, n: int, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.round(y)):
            raise ValueError("labels must be integers")
        y = y.astype(int)
    if n and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    return y


def loss_and_grads(params: MlpParams, features: np.ndarray, labels: np.ndarray,
                   arch: MlpArchitecture, train: bool = True,
                   rng: np.random.Generator | None = None) -> tuple[float, MlpParams]:
    """Mean cross-entropy over the batch and its gradient by backpropagation."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if len(X) == 0:
        raise ValueError("empty batch")
    y = _check_labels(labels, len(X), arch.output_dim)
    probs, cache = forward(params, X, arch, train=train, rng=rng)
    n = len(X)
    rows = np.arange(n)
    loss = float(-np.mean(np.log(np.maximum(probs[rows, y], PROB_FLOOR))))

    dz = probs.copy()
    dz[rows, y] -= 1.0
    dz /= n
    grad_w: list[np.ndarray] = [None] * len(cache)
    grad_b: list[np.ndarray] = [None] * len(cache)
    for i in range(len(cache) - 1, -1, -1):
        entry = cache[i]
        grad_w[i] = dz.T @ entry["input"]
        grad_b[i] = dz.sum(axis=0)
        if i == 0:
            break
        da = dz @ params.weights[i]
        below = cache[i - 1]
        if below["mask"] is not None:
            da = da * below["mask"]
        dz = np.where(below["pre"] >= 0, da, arch.leaky_slope * da)
    return loss, MlpParams(grad_w, grad_b)


def _adam_update(params: list[np.ndarray], grads: list[np.ndarray], m: list[np.ndarray],
                 v: list[np.ndarray], t: int, cfg: TrainConfig, scratch: np.ndarray | None = None) -> None:
    """In-place Adam update of ``params``, ``m`` and ``v`` for step number ``t``."""
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for p, g, mi, vi in zip(params, grads, m, v):
        buf = np.empty_like(g) if scratch is None or scratch.shape != g.shape else scratch
        mi *= cfg.beta1
        np.multiply(g, 1.0 - cfg.beta1, out=buf)
        mi += buf
        vi *= cfg.beta2
        np.multiply(g, g, out=buf)
        buf *= 1.0 - cfg.beta2
        vi += buf
        # buf <- lr * (m / c1) / (sqrt(v / c2) + eps)
        np.divide(vi, c2, out=buf)
        np.sqrt(buf, out=buf)
        buf += cfg.adam_epsilon
        np.divide(mi, buf, out=buf)
        buf *= cfg.learning_rate / c1
        p -= buf


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              cfg: TrainConfig) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new tensors and a new state."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError("params, grads and state disagree in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient")
    new_p = [np.array(p, dtype=float) for p in params]
    new_m = [np.array(m, dtype=float) for m in state.m]
    new_v = [np.array(v, dtype=float) for v in state.v]
    grads = [np.asarray(g, dtype=float) for g in grads]
    _adam_update(new_p, grads, new_m, new_v, state.t + 1, cfg)
    return new_p, AdamState(new_m, new_v, state.t + 1)


def train(features: np.ndarray, labels: np.ndarray, arch: MlpArchitecture,
          cfg: TrainConfig = TrainConfig()) -> MlpModel:
    """Minibatch Adam for ``cfg.epochs`` passes; deterministic in ``cfg.seed``.

    Weights come from ``init_params(arch, cfg.seed)``; shuffling and dropout
    masks share a second stream derived from the same seed.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a non-empty (N, D) feature matrix")
    if X.shape[1] != arch.input_dim:
        raise ValueError(f"expected {arch.input_dim} features, got {X.shape[1]}")
    y = _check_labels(labels, len(X), arch.output_dim)

    init = init_params(arch, cfg.seed).tensors()
    # one flat buffer so Adam runs as a single vector update; params are views
    theta = np.concatenate([p.ravel() for p in init])
    views, offset = [], 0
    for p in init:
        views.append(theta[offset:offset + p.size].reshape(p.shape))
        offset += p.size
    params = MlpParams.from_tensors(views)
    m, v = np.zeros_like(theta), np.zeros_like(theta)
    grad, scratch = np.empty_like(theta), np.empty_like(theta)
    rng = np.random.default_rng([cfg.seed, 1])
    step = 0

    n = len(X)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, X[idx], y[idx], arch, train=True, rng=rng)
            np.concatenate([t.ravel() for t in grads.tensors()], out=grad)
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError(f"non-finite gradient at step {step + 1}")
            step += 1
            _adam_update([theta], [grad], [m], [v], step, cfg, scratch)
            total += loss * len(idx)
        losses.append(total / n)
    return MlpModel(arch, params.copy(), cfg, losses)


def predict_proba(model: MlpModel, X: np.ndarray) -> np.ndarray:
    probs, _ = forward(model.params, X, model.arch, train=False)
    return probs


def predict(model: MlpModel, x: np.ndarray) -> tuple[MaterialClass, np.ndarray]:
    """Most probable material for one feature vector; ties go to the lowest code."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector; use predict_labels for batches")
    probs = predict_proba(model, x)
    return MaterialClass(int(np.argmax(probs))), probs


def predict_labels(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(predict_proba(model, np.atleast_2d(X)), axis=1)


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=int(seed))
