"""Stratified splitting, Adam, and the early-stopping training loop."""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import cnn
from .errors import ConfigError, DataError
from .rng import substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 25
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    split: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be >= 1")
        if self.patience > self.max_epochs:
            raise ConfigError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")
        check_fractions(self.split)


def check_fractions(fractions):
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigError(f"split fractions must be three positive numbers, got {tuple(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")


def stratified_split(labels, fractions=(0.8, 0.1, 0.1), seed=0):
    """Per-class seeded shuffle, then floor(n*train), floor(n*val) and the remainder.

    Returns sorted index arrays ``(train, val, test)``.
    """
    check_fractions(fractions)
    labels = np.asarray(labels, dtype=np.int64)
    parts = ([], [], [])
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        n = len(idx)
        if n < 3:
            raise DataError(f"class {k} has {n} samples; at least 3 are required to split")
        order = substream(seed, "split", int(k)).permutation(n)
        shuffled = idx[order]
        n_train = int(np.floor(n * fractions[0]))
        n_val = int(np.floor(n * fractions[1]))
        parts[0].extend(shuffled[:n_train])
        parts[1].extend(shuffled[n_train:n_train + n_val])
        parts[2].extend(shuffled[n_train + n_val:])
    return tuple(np.array(sorted(p), dtype=np.int64) for p in parts)


def cross_entropy(probs, label):
    """Sparse categorical cross-entropy of one probability vector, clipped at 1e-12."""
    return float(-np.log(max(float(probs[label]), cnn.CE_CLIP)))


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
    return params, state


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0

    CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc"

    def to_csv(self):
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(f"{r.epoch},{r.train_loss!r},{r.train_acc!r},{r.val_loss!r},{r.val_acc!r}")
        return "\n".join(lines) + "\n"


def evaluate_loss(x, y, spec, weights, batch_size=256):
    """Mean eval-mode cross-entropy and accuracy."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    total_loss, correct = 0.0, 0
    for start in range(0, len(x), batch_size):
        probs = cnn.forward(x[start:start + batch_size], spec, weights)
        yb = y[start:start + batch_size]
        total_loss += float(cnn.cross_entropy(probs, yb).sum())
        correct += int((probs.argmax(axis=1) == yb).sum())
    return total_loss / len(x), correct / len(x)


def predict_batches(x, spec, weights, batch_size=256):
    x = np.asarray(x, dtype=np.float64)
    out = [cnn.predict(x[s:s + batch_size], spec, weights) for s in range(0, len(x), batch_size)]
    return np.concatenate(out)


def train(x_train, y_train, x_val, y_val, spec, cfg=TrainConfig(), monitor=None, weights=None):
    """Minibatch Adam with best-validation checkpointing and early stopping.

    ``monitor(weights, epoch) -> (val_loss, val_acc)`` replaces the default
    validation pass when given. Returns the checkpointed weights (lowest
    validation loss, earliest on ties) and the :class:`TrainHistory`.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(x_train) == 0:
        raise DataError("training split is empty")
    if monitor is None:
        if x_val is None or len(x_val) == 0:
            raise DataError("validation split is empty")

        def monitor(w, epoch):
            return evaluate_loss(x_val, y_val, spec, w)

    if weights is None:
        weights = cnn.init_cnn(spec, x_train.shape[1], cfg.seed)
    state = AdamState()
    history = TrainHistory()
    best_loss, best_weights, stale = np.inf, None, 0
    n = len(x_train)
    for epoch in range(1, cfg.max_epochs + 1):
        order = np.array(substream(cfg.seed, "shuffle", epoch).permutation(n), dtype=np.int64)
        loss_sum, correct = 0.0, 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            mask_seed = substream(cfg.seed, "dropout", epoch, b).next_u64()
            loss, grads, probs = cnn.loss_and_gradients(
                x_train[idx], y_train[idx], spec, weights, dropout=mask_seed
            )
            loss_sum += loss * len(idx)
            correct += int((probs.argmax(axis=1) == y_train[idx]).sum())
            adam_step(weights, grads, state, cfg)
        val_loss, val_acc = monitor(weights, epoch)
        history.records.append(EpochRecord(epoch, loss_sum / n, correct / n, float(val_loss), float(val_acc)))
        logger.info("epoch %d train_loss=%.4f val_loss=%.4f val_acc=%.3f", epoch, loss_sum / n, val_loss, val_acc)
        if val_loss < best_loss:
            best_loss, stale = val_loss, 0
            best_weights = {k: v.copy() for k, v in weights.items()}
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best_weights, history
