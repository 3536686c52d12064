"""Adam optimizer and the training/evaluation loops.

Everything is seeded and single-threaded by design: per-epoch shuffle,
augmentation, and dropout streams are derived from (seed, epoch), so a run
resumed from a checkpoint at an epoch boundary is bit-identical to one that
never stopped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .data import Dataset, batch_iterator, one_hot
from .errors import ConfigError, DivergenceError, IngestionError
from .layers import cross_entropy
from .metrics import ConfusionMatrix
from .network import Mode, Network, backward, forward, forward_train


@dataclass
class TrainConfig:
    learning_rate: float = 0.0001
    batch_size: int = 32
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    seed: int = 0
    width: float = 1.0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("betas must be in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if not 0 < self.width <= 1:
            raise ConfigError(f"width must be in (0, 1], got {self.width}")


@dataclass
class AdamState:
    """First/second moment accumulators, congruent with the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


def flatten_params(net: Network) -> list[np.ndarray]:
    """Parameter arrays in layer order: weights then bias per parametric layer."""
    out: list[np.ndarray] = []
    for p in net.params:
        if p is not None:
            out.extend(p)
    return out


def flatten_grads(grads: list[tuple[np.ndarray, np.ndarray] | None]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for g in grads:
        if g is not None:
            out.extend(g)
    return out


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> None:
    """One in-place Adam update with bias correction.

    m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
    p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigError("params, grads, and state must be congruent")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ConfigError(f"gradient shape {g.shape} does not match parameter {p.shape}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


def _epoch_seed(seed: int, epoch: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((seed, epoch, stream))


def _check_finite(loss: float, where: str) -> float:
    if not math.isfinite(loss):
        raise DivergenceError(f"loss became non-finite ({loss}) at {where}")
    return loss


def evaluate(net: Network, ds: Dataset, batch_size: int = 32) -> tuple[float, ConfusionMatrix]:
    """Full infer-mode pass in stored order: (mean cross-entropy, confusion matrix)."""
    if not ds.samples:
        raise IngestionError("cannot evaluate an empty dataset")
    truths: list[int] = []
    preds: list[int] = []
    loss_sum = 0.0
    for start in range(0, len(ds.samples), batch_size):
        chunk = ds.samples[start:start + batch_size]
        images = np.stack([s.image for s in chunk])
        targets = np.stack([one_hot(s.label) for s in chunk])
        probs = forward(net, images, Mode.INFER)
        loss_sum += cross_entropy(probs, targets) * len(chunk)
        truths.extend(int(s.label) for s in chunk)
        preds.extend(int(i) for i in probs.argmax(axis=1))
    cm = metrics.confusion_matrix(truths, preds)
    return loss_sum / len(ds.samples), cm


def _accuracy(cm: ConfusionMatrix) -> float:
    return cm.trace / cm.total if cm.total else 0.0


def train(
    net: Network,
    train_ds: Dataset,
    val_ds: Dataset,
    cfg: TrainConfig,
    state: AdamState | None = None,
    start_epoch: int = 0,
    on_epoch=None,
) -> tuple[list[EpochRecord], AdamState]:
    """Run epochs [start_epoch, cfg.epochs) of shuffled, augmented minibatch Adam.

    Per epoch: shuffle and augment the train split, forward in train mode,
    cross-entropy loss, backward, adam_step; then a full infer-mode evaluation
    of both splits produces the EpochRecord. A non-finite loss aborts with a
    DivergenceError naming the epoch and batch. Params and state are updated
    in place; `on_epoch(record)` is called after each epoch if given.
    """
    if not train_ds.samples or not val_ds.samples:
        raise IngestionError("train and validation datasets must be non-empty")
    params = flatten_params(net)
    if state is None:
        state = AdamState.init(params)
    history: list[EpochRecord] = []
    for epoch in range(start_epoch, cfg.epochs):
        shuffle_seed = int(_epoch_seed(cfg.seed, epoch, 0).generate_state(1)[0])
        dropout_rng = np.random.default_rng(_epoch_seed(cfg.seed, epoch, 1))
        for b_idx, (images, targets) in enumerate(
            batch_iterator(train_ds, cfg.batch_size, shuffle_seed)
        ):
            probs, cache = forward_train(net, images, dropout_rng)
            loss = cross_entropy(probs, targets)
            _check_finite(loss, f"epoch {epoch} batch {b_idx}")
            grads = backward(net, cache, targets)
            adam_step(params, flatten_grads(grads), state, cfg)
        train_loss, train_cm = evaluate(net, train_ds)
        val_loss, val_cm = evaluate(net, val_ds)
        _check_finite(train_loss, f"epoch {epoch} train evaluation")
        _check_finite(val_loss, f"epoch {epoch} validation evaluation")
        record = EpochRecord(epoch, train_loss, _accuracy(train_cm), val_loss, _accuracy(val_cm))
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return history, state


HISTORY_COLUMNS = ("epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy")


def write_history(history: list[EpochRecord], path) -> None:
    """Write one CSV line per epoch with full float precision."""
    lines = [",".join(HISTORY_COLUMNS)]
    for r in history:
        lines.append(
            f"{r.epoch},{r.train_loss!r},{r.train_accuracy!r},{r.val_loss!r},{r.val_accuracy!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_history(path) -> list[EpochRecord]:
    records: list[EpochRecord] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(HISTORY_COLUMNS):
            raise ValueError(f"unexpected history header: {header}")
        for line in fh:
            if not line.strip():
                continue
            e, tl, ta, vl, va = line.strip().split(",")
            records.append(EpochRecord(int(e), float(tl), float(ta), float(vl), float(va)))
    return records
