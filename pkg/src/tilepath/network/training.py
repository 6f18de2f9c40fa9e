"""Mini-batch SGD training with softmax cross-entropy."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datagen import stratified_split
from ..errors import ConfigurationError, DataError
from ..numerics import DEFAULT_SEED, child_seeds, make_rng
from ..validation import check_batch, check_labels
from .model import Model, backward, forward

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "sgd-momentum")
LOG_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    optimizer: str = "sgd"
    momentum: float = 0.0
    seed: int = DEFAULT_SEED
    train_fraction: float = 0.7

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.optimizer == "sgd" and self.momentum:
            raise ConfigurationError("momentum requires optimizer='sgd-momentum'")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum must lie in [0, 1)")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("epochs must be >= 0 and batch_size >= 1")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigurationError("train_fraction must lie in (0, 1]")


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)
    train_index: np.ndarray | None = None
    val_index: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=LOG_FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in self.records:
            writer.writerow({k: (rec[k] if k == "epoch" else repr(float(rec[k]))) for k in LOG_FIELDS})
        return buf.getvalue()


def batch_loss(probs: np.ndarray, y: np.ndarray) -> float:
    picked = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(picked, 1e-12))))


def loss_and_grads(model: Model, X, y, rng=None):
    """Mean cross-entropy of a batch and its parameter gradients (train mode)."""
    probs, cache = forward(model, X, train=True, rng=rng)
    n = len(y)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    _, grads = backward(model, dlogits, cache, skip_softmax=True)
    return batch_loss(probs, y), probs, grads


def evaluate(model: Model, X, y, batch_size: int = 64) -> tuple[float, float]:
    if len(y) == 0:
        return float("nan"), float("nan")
    probs = model.predict_proba(X, batch_size=batch_size)
    return batch_loss(probs, y), float(np.mean(probs.argmax(axis=1) == y))


class SGD:
    """Plain or momentum SGD: ``v = momentum * v - lr * g``; ``p += v``."""

    def __init__(self, model: Model, learning_rate: float, momentum: float = 0.0):
        self.model = model
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p) for name, p in model.named_params()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, p in self.model.named_params():
            v = self.velocity[name]
            v *= self.momentum
            v -= self.learning_rate * grads[name]
            p += v
        self.model.version += 1


def _round_to_storage(model: Model) -> None:
    # weights are kept float32-representable so a saved model reproduces the logged metrics
    for _, p in model.named_params():
        p[...] = p.astype(np.float32)
    model.version += 1


def train(model: Model, X, y, cfg: TrainConfig | None = None, augmenter=None,
          split: tuple[np.ndarray, np.ndarray] | None = None) -> TrainLog:
    """Train ``model`` in place and return one log record per epoch.

    The stratified train/validation split is drawn from ``cfg.seed`` before the
    first epoch unless ``split`` supplies explicit index arrays. ``augmenter``
    (anything with ``transform_xy``) is applied to training members only.
    """
    cfg = cfg or TrainConfig()
    if not model.ends_with_softmax:
        raise ConfigurationError(f"{model.name} has no softmax output and cannot be trained")
    X = check_batch(X, model.input_shape)
    n_classes = model.n_outputs
    y = check_labels(y, X.shape[0], n_classes)
    if X.shape[0] == 0:
        raise DataError("dataset is empty")
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        raise DataError(f"classes {np.flatnonzero(counts == 0).tolist()} have no samples")

    split_seed, loop_seed = child_seeds(cfg.seed, 2)
    if split is None:
        train_idx, val_idx = stratified_split(y, cfg.train_fraction, split_seed)
    else:
        train_idx, val_idx = (np.asarray(s, dtype=np.int64) for s in split)
    Xt, yt = X[train_idx], y[train_idx]
    if augmenter is not None:
        Xt, yt = augmenter.transform_xy(Xt, yt)
    Xv, yv = X[val_idx], y[val_idx]

    rng = make_rng(loop_seed)
    opt = SGD(model, cfg.learning_rate, cfg.momentum)
    result = TrainLog(train_index=train_idx, val_index=val_idx)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(yt))
        total_loss, correct = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, probs, grads = loss_and_grads(model, Xt[idx], yt[idx], rng)
            total_loss += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == yt[idx]))
            opt.step(grads)
        _round_to_storage(model)
        val_loss, val_acc = evaluate(model, Xv, yv)
        rec = {"epoch": epoch, "train_loss": total_loss / len(yt), "train_acc": correct / len(yt),
               "val_loss": val_loss, "val_acc": val_acc}
        result.records.append(rec)
        log.info("epoch %d: loss %.4f acc %.3f val_loss %.4f val_acc %.3f", epoch,
                 rec["train_loss"], rec["train_acc"], val_loss, val_acc)
    return result


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
