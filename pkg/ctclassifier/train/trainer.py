"""
Training loop: shuffled augmented mini-batches over the train split, validation
each epoch, best-validation-accuracy checkpoint selection.
"""

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from ctclassifier.augment.config import AugmentConfig
from ctclassifier.augment.transforms import augment, sample_rng
from ctclassifier.data.batches import ImageCache, batches
from ctclassifier.data.dataset import LabeledDataset
from ctclassifier.data.split import SplitDataset
from ctclassifier.errors import ConfigError, DatasetError, NumericalError, ShapeError
from ctclassifier.models.checkpoint import Checkpoint, CheckpointMeta
from ctclassifier.models.network import Network
from ctclassifier.models.zoo import describe, model_channels, model_image_size
from ctclassifier.nn.losses import cross_entropy_loss
from ctclassifier.nn.optimizers import OptimizerState, optimizer_step
from ctclassifier.train.config import TrainConfig
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

DROPOUT_STREAM = 1


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    wall_time_s: float


class TrainAugmenter:
    """Per-sample augmentation for one epoch of the train split."""

    def __init__(self, cfg: AugmentConfig, epoch_index: int, dataset: LabeledDataset):
        self.cfg = cfg
        self.epoch_index = epoch_index
        self.dataset = dataset

    def __call__(self, pixels, index: int):
        rng = sample_rng(self.cfg, self.epoch_index, index)
        return augment(pixels, self.cfg, rng)


@dataclass
class _Pass:
    loss_sum: float = 0.0
    correct: int = 0
    seen: int = 0

    def add(self, loss: float, probs: np.ndarray, y: np.ndarray):
        n = len(y)
        self.loss_sum += loss * n
        self.correct += int(np.sum(np.argmax(probs, axis=1) == np.argmax(y, axis=1)))
        self.seen += n

    @property
    def loss(self) -> float:
        return self.loss_sum / self.seen

    @property
    def accuracy(self) -> float:
        return self.correct / self.seen


def _check_inputs(network: Network, splits: SplitDataset, cfg: TrainConfig):
    if len(splits.train) == 0:
        raise DatasetError("training split is empty")
    if len(splits.val) == 0:
        raise DatasetError("validation split is empty")
    spec = network.spec
    if spec.name != cfg.model:
        raise ConfigError(f"config selects model '{cfg.model}' but the network is '{spec.name}'")
    if cfg.input_size is not None and model_image_size(spec) != (cfg.input_size, cfg.input_size):
        raise ShapeError(
            f"config input_size {cfg.input_size} does not match model input {spec.input_shape}"
        )
    # push one sample through the network so incompatible data fails before epoch 1
    x, _ = next(batches(splits.train, 1, target=model_image_size(spec), channels=model_channels(spec),
                        dtype=network.dtype))
    network.forward(x, "eval")


def evaluate_pass(network: Network, ds: LabeledDataset, batch_size: int, cache: Optional[ImageCache] = None,
                  workers: int = 0) -> Tuple[float, float]:
    """Mean loss and accuracy over a dataset in eval mode, without augmentation."""
    totals = _Pass()
    for x, y in batches(ds, batch_size, target=model_image_size(network.spec),
                        channels=model_channels(network.spec), dtype=network.dtype,
                        cache=cache, workers=workers):
        probs, _ = network.forward(x, "eval")
        loss, _ = cross_entropy_loss(probs, y)
        totals.add(loss, probs, y)
    return totals.loss, totals.accuracy


def train(network: Network, splits: SplitDataset, cfg: TrainConfig, start_epoch: int = 0,
          on_epoch: Optional[Callable[[EpochLog], None]] = None,
          clock: Callable[[], float] = time.perf_counter) -> Tuple[Checkpoint, List[EpochLog]]:
    """
    Train `network` in place for cfg.epochs epochs.

    Args:
        network: Model and parameters; parameters are updated in place
        splits: Train/val/test partition; only train and val are used here
        cfg: Training configuration
        start_epoch: Epochs already trained (resume); shuffling, augmentation and dropout
            streams continue from this index
        on_epoch: Called after each epoch with its log entry
        clock: Wall-time source for the epoch log

    Returns:
        Tuple of (checkpoint with the best validation accuracy, one EpochLog per epoch)

    Raises:
        DatasetError: empty train or validation split
        ShapeError: data incompatible with the model input
        NumericalError: non-finite loss or gradient, with epoch and batch coordinates
    """
    _check_inputs(network, splits, cfg)
    spec = network.spec
    target = model_image_size(spec)
    channels = model_channels(spec)
    opt_config = cfg.optimizer_config()
    state = OptimizerState()
    cache = ImageCache(cfg.cache_images) if cfg.cache_images > 0 else None

    logger.info(
        f"Training {spec.name} on {len(splits.train)} images (val {len(splits.val)}) for {cfg.epochs} epochs, "
        f"batch {cfg.batch_size}, {opt_config.kind} lr={opt_config.lr}, "
        f"{network.params.count()} parameters ({len(network.params.frozen)} frozen layers)"
    )
    for line in describe(spec):
        logger.debug(line)

    best: Optional[Checkpoint] = None
    best_accuracy = -math.inf
    logs: List[EpochLog] = []

    for epoch_index in range(start_epoch, start_epoch + cfg.epochs):
        started = clock()
        transform = TrainAugmenter(cfg.augment, epoch_index, splits.train) if cfg.augment.enabled else None
        dropout_rng = np.random.default_rng([cfg.seed, epoch_index, DROPOUT_STREAM])
        totals = _Pass()

        train_batches = batches(
            splits.train, cfg.batch_size, shuffle=True, seed=cfg.seed, epoch_index=epoch_index,
            target=target, channels=channels, dtype=network.dtype, transform=transform,
            cache=cache, workers=cfg.workers,
        )
        for batch_index, (x, y) in enumerate(train_batches):
            probs, caches = network.forward(x, "train", dropout_rng)
            loss, grad_logits = cross_entropy_loss(probs, y)
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss {loss} at epoch {epoch_index + 1}, batch {batch_index + 1}")
            grads = network.backward(grad_logits, caches)
            try:
                optimizer_step(network.params, grads, state, opt_config)
            except NumericalError as e:
                raise NumericalError(f"{e} at epoch {epoch_index + 1}, batch {batch_index + 1}") from None
            totals.add(loss, probs, y)

        val_loss, val_accuracy = evaluate_pass(network, splits.val, cfg.batch_size, cache, cfg.workers)
        entry = EpochLog(
            epoch=epoch_index + 1,
            train_loss=totals.loss,
            train_accuracy=totals.accuracy,
            val_loss=val_loss,
            val_accuracy=val_accuracy,
            wall_time_s=clock() - started,
        )
        logs.append(entry)
        logger.info(
            f"Epoch {entry.epoch}/{start_epoch + cfg.epochs}: loss {entry.train_loss:.4f} "
            f"acc {entry.train_accuracy:.4f} | val loss {entry.val_loss:.4f} acc {entry.val_accuracy:.4f} "
            f"({entry.wall_time_s:.1f}s)"
        )

        # strict comparison keeps the earlier epoch on ties
        if val_accuracy > best_accuracy:
            best_accuracy = val_accuracy
            best = Checkpoint(
                model_spec=spec,
                params=network.params.copy(),
                meta=CheckpointMeta(seed=cfg.seed, epochs_trained=epoch_index + 1),
            )
        if on_epoch is not None:
            on_epoch(entry)

    logger.info(f"Best validation accuracy {best_accuracy:.4f} at epoch {best.meta.epochs_trained}")
    return best, logs
