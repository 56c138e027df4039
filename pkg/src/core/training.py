"""
Training loop for binary SuperMAN classifiers.

Adam with decoupled weight decay, a reduce-on-plateau learning-rate schedule,
optional minority-class upsampling per batch and best-validation-AUPRC model
selection.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, MetricUndefined, NumericalError
from .diffcore import (
    AdamState,
    Tensor,
    adam_step,
    add,
    copy_parameters,
    load_parameters,
    mean,
    mul,
    neg,
    softplus,
    value_and_grad,
)
from .metrics import auprc
from .signal_graphs import GraphSet
from .superman import SupermanModel, forward_batch, model_parameters

logger = logging.getLogger(__name__)

# published search grid
GRID = {
    "batch_size": {16, 32},
    "dropout": {0.1, 0.2},
    "hidden": {32, 64},
    "layers": {3, 4, 5},
}
GRID_RANGES = {
    "lr_max": (1e-4, 1e-2),
    "lr_min": (1e-8, 1e-7),
    "plateau_factor": (0.2, 0.9),
}


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr_max: float = 1e-3
    lr_min: float = 1e-8
    plateau_factor: float = 0.5
    plateau_patience: int = 100
    weight_decay: float = 1e-5
    dropout: float = 0.1
    hidden: int = 64
    layers: int = 3
    seed: int = 0
    upsample_minority: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if not 0 < self.lr_min <= self.lr_max:
            raise ConfigError(f"Need 0 < lr_min <= lr_max, got {self.lr_min} and {self.lr_max}")
        if not 0 < self.plateau_factor < 1:
            raise ConfigError(f"plateau_factor must lie in (0, 1), got {self.plateau_factor}")
        if self.plateau_patience < 1:
            raise ConfigError(f"plateau_patience must be positive, got {self.plateau_patience}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError(f"hidden and layers must be positive, got {self.hidden} and {self.layers}")

    def grid_deviations(self) -> List[str]:
        """Names of hyperparameters outside the published search grid."""
        out = [name for name, allowed in GRID.items() if getattr(self, name) not in allowed]
        for name, (low, high) in GRID_RANGES.items():
            if not low <= getattr(self, name) <= high:
                out.append(name)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_auprc: float
    lr: float


def bce_loss(logits: Tensor, labels: Any) -> Tensor:
    """Mean binary cross-entropy from logits: ``softplus(z) - y z``."""
    y = np.asarray(labels, dtype=np.float64).reshape(logits.shape)
    return mean(add(softplus(logits), neg(mul(logits, y))))


def minority_upsample(
    indices: Sequence[int],
    labels: Sequence[int],
    batch_size: int,
    seed: Union[int, np.random.Generator],
) -> List[np.ndarray]:
    """One epoch of class-balanced batches.

    Each batch holds ``batch_size // 2`` minority samples drawn with
    replacement; the rest are majority samples taken from a shuffled pass
    over the majority class. The epoch has ``ceil(len(indices) / batch_size)``
    batches.
    """
    idx = np.asarray(indices, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)[idx]
    positives, negatives = idx[y == 1], idx[y == 0]
    if positives.size == 0 or negatives.size == 0:
        raise ConfigError("Minority upsampling needs both classes in the training split")
    minority, majority = (positives, negatives) if positives.size <= negatives.size else (negatives, positives)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_batches = max(1, math.ceil(idx.size / batch_size))
    n_minority = batch_size // 2
    n_majority = batch_size - n_minority
    stream = rng.permutation(majority)
    cursor = 0
    batches = []
    for _ in range(n_batches):
        if cursor + n_majority > stream.size:
            stream = np.concatenate([stream[cursor:], rng.permutation(majority)])
            cursor = 0
            while stream.size < n_majority:
                stream = np.concatenate([stream, rng.permutation(majority)])
        major = stream[cursor:cursor + n_majority]
        cursor += n_majority
        minor = rng.choice(minority, size=n_minority, replace=True)
        batch = np.concatenate([major, minor])
        batches.append(batch[rng.permutation(batch.size)])
    return batches


def shuffled_batches(indices: Sequence[int], batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(np.asarray(indices, dtype=np.int64))
    return [order[i:i + batch_size] for i in range(0, order.size, batch_size)]


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, lr: float, factor: float, patience: int, lr_min: float, threshold: float = 1e-4):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.lr_min = lr_min
        self.threshold = threshold
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> float:
        if math.isinf(self.best) or metric < self.best - self.threshold * abs(self.best):
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            new_lr = max(self.lr * self.factor, self.lr_min)
            if new_lr < self.lr:
                logger.info(f"Reducing learning rate to {new_lr:.3e}")
            self.lr = new_lr
            self.bad_epochs = 0
        return self.lr


def _labels(samples: Sequence[GraphSet]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)


def evaluate_loss(model: SupermanModel, samples: Sequence[GraphSet], batch_size: int = 256) -> Tuple[float, np.ndarray]:
    """Mean loss and logits over ``samples`` in evaluation mode."""
    if not samples:
        return float("nan"), np.zeros(0)
    logits = np.concatenate(
        [forward_batch(model, samples[i:i + batch_size])[0].data for i in range(0, len(samples), batch_size)]
    )
    loss = bce_loss(Tensor(logits), _labels(samples)).item()
    return loss, logits


def train(
    model: SupermanModel,
    train_set: Sequence[GraphSet],
    val_set: Sequence[GraphSet],
    config: TrainConfig,
    batch_size: Optional[int] = None,
) -> Tuple[SupermanModel, List[EpochRecord]]:
    """Fit ``model`` in place and return it with the per-epoch history.

    The parameters with the best validation AUPRC (or lowest validation loss
    when AUPRC is undefined) are restored before returning. ``batch_size``
    overrides the configured size, e.g. for full-batch training.
    """
    if not train_set:
        raise ConfigError("Training split is empty")
    params = model_parameters(model)
    size = batch_size or config.batch_size
    for name in config.grid_deviations():
        logger.warning(f"{name}={getattr(config, name)} lies outside the published search grid")

    optimizer = AdamState(learning_rate=config.lr_max, weight_decay=config.weight_decay)
    scheduler = PlateauScheduler(config.lr_max, config.plateau_factor, config.plateau_patience, config.lr_min)
    rng = np.random.default_rng(config.seed)
    labels = _labels(train_set)
    indices = np.arange(len(train_set))
    best_state = copy_parameters(params)
    best_score: Tuple[float, float] = (-math.inf, -math.inf)
    history: List[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        if config.upsample_minority:
            batches = minority_upsample(indices, labels, size, rng)
        else:
            batches = shuffled_batches(indices, size, rng)
        losses = []
        for batch in batches:
            samples = [train_set[i] for i in batch]

            def objective() -> Tensor:
                logits, _ = forward_batch(model, samples, training=True, rng=rng)
                return bce_loss(logits, _labels(samples))

            try:
                loss, grads = value_and_grad(objective, params)
            except NumericalError as e:
                load_parameters(params, best_state)
                raise NumericalError(f"Training diverged at epoch {epoch}: {e}", checkpoint=model) from e
            adam_step(optimizer, params, grads)
            losses.append(loss)
        train_loss = float(np.mean(losses))

        monitor = val_set if val_set else train_set
        val_loss, val_logits = evaluate_loss(model, monitor)
        try:
            val_auprc = auprc(val_logits, _labels(monitor))
        except MetricUndefined:
            val_auprc = float("nan")
        if not math.isfinite(val_loss):
            load_parameters(params, best_state)
            raise NumericalError(f"Validation loss is not finite at epoch {epoch}", checkpoint=model)

        optimizer.learning_rate = scheduler.step(val_loss)
        # ties on AUPRC fall back to the lower loss
        score = (val_auprc if math.isfinite(val_auprc) else -math.inf, -val_loss)
        if score > best_score:
            best_score = score
            best_state = copy_parameters(params)
        history.append(EpochRecord(epoch, train_loss, val_loss, val_auprc, optimizer.learning_rate))
        logger.debug(
            f"epoch {epoch}: train_loss={train_loss:.4f} val_loss={val_loss:.4f} "
            f"val_auprc={val_auprc:.4f} lr={optimizer.learning_rate:.2e}"
        )

    load_parameters(params, best_state)
    if history:
        last = history[-1]
        logger.info(
            f"Trained {config.epochs} epochs: final train_loss={last.train_loss:.4f}, "
            f"best val_auprc={best_score[0]:.4f}"
        )
    return model, history
