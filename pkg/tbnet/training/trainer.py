"""
The training loop.

Each epoch shuffles the train split from (seed, epoch), runs forward, loss, backward and
an optimizer step per batch, then scores the validation split. The best epoch (highest
validation accuracy, ties to the lower validation loss) is checkpointed and restored into
the returned model. In serial mode a run is a pure function of (config, manifest).
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt

from ..data.augment import AugmentConfig
from ..data.batches import ImageStore, batch_iter
from ..data.dataset import DatasetManifest
from ..engine.ops import softmax_cross_entropy
from ..engine.tensor import backward
from ..errors import ContractError, NonFiniteLossError
from ..models.model import ArchitectureId, ModelInstance
from ..models.registry import build_model
from .checkpoint import save_checkpoint
from .evaluate import predict_split
from .optim import SGD, Adam, Optimizer

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    arch: ArchitectureId = "squeezenet"
    epochs: PositiveInt = 20
    batch_size: PositiveInt = 32
    optimizer: Literal["sgd", "adam"] = "adam"
    lr: float = Field(default=1e-3, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: NonNegativeInt = 0
    checkpoint_path: Optional[Path] = None
    patience: Optional[PositiveInt] = None
    augment: bool = True
    augmentation: AugmentConfig = AugmentConfig()
    simple_bypass: bool = False
    workers: PositiveInt = 1


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    def to_line(self) -> str:
        return f"{self.epoch},{self.train_loss:.6f},{self.train_acc:.6f},{self.val_loss:.6f},{self.val_acc:.6f}"


@dataclass
class TrainResult:
    model: ModelInstance
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    checkpoint_path: Optional[Path] = None
    stopped_early: bool = False

    @property
    def best(self) -> Optional[EpochRecord]:
        return next((r for r in self.history if r.epoch == self.best_epoch), None)


BatchCallback = Callable[[int, int, int, float], None]
EpochCallback = Callable[[EpochRecord], None]


def make_optimizer(cfg: TrainConfig, model: ModelInstance) -> Optimizer:
    if cfg.optimizer == "sgd":
        return SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum)
    return Adam(model.parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)


def write_history(history: List[EpochRecord], path) -> Path:
    """One `epoch,train_loss,train_acc,val_loss,val_acc` line per epoch, no header."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in history:
            f.write(record.to_line() + "\n")
    return path


def _improved(record: EpochRecord, best: Optional[EpochRecord]) -> bool:
    if best is None or record.val_acc > best.val_acc:
        return True
    return record.val_acc == best.val_acc and record.val_loss < best.val_loss


def train_epoch(model: ModelInstance, optimizer: Optimizer, cfg: TrainConfig, manifest: DatasetManifest, epoch: int,
                store: ImageStore, on_batch: Optional[BatchCallback] = None):
    """One pass over the train split. Returns (mean loss, accuracy)."""
    model.train()
    augment_cfg = cfg.augmentation if cfg.augment else None
    n_batches = math.ceil(len(manifest.split("train")) / cfg.batch_size)

    loss_sum, correct, seen = 0.0, 0, 0
    batches = batch_iter(manifest, "train", cfg.batch_size, augment_cfg, seed=cfg.seed, epoch=epoch,
                         store=store, workers=cfg.workers)
    for index, batch in enumerate(batches):
        if len(batch) < 2:
            # batch norm needs two samples per channel
            logger.debug("Skipping single-image trailing batch in epoch %d", epoch)
            continue

        logits = model(batch.pixels)
        loss = softmax_cross_entropy(logits, batch.labels)
        value = loss.item()
        if not math.isfinite(value):
            raise NonFiniteLossError(epoch, index, cfg.lr, value)

        backward(loss)
        optimizer.step()
        optimizer.zero_grads()

        loss_sum += value * len(batch)
        correct += int(np.sum(logits.data.argmax(axis=1) == np.asarray(batch.labels)))
        seen += len(batch)
        if on_batch:
            on_batch(epoch, index + 1, n_batches, value)

    if seen == 0:
        raise ContractError("No trainable batch in the train split (need at least two images)")
    return loss_sum / seen, correct / seen


def check_trainable(manifest: DatasetManifest) -> None:
    """A run needs a batch of at least two train images and a non-empty val split."""
    manifest.require("train", minimum=2)
    manifest.require("val")


def train(cfg: TrainConfig, manifest: DatasetManifest, on_batch: Optional[BatchCallback] = None,
          on_epoch: Optional[EpochCallback] = None, model: Optional[ModelInstance] = None) -> TrainResult:
    check_trainable(manifest)

    model = model or build_model(cfg.arch, seed=cfg.seed, simple_bypass=cfg.simple_bypass)
    optimizer = make_optimizer(cfg, model)
    store = ImageStore()
    result = TrainResult(model=model, checkpoint_path=cfg.checkpoint_path)

    best: Optional[EpochRecord] = None
    best_state = None
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        train_loss, train_acc = train_epoch(model, optimizer, cfg, manifest, epoch, store, on_batch)
        predictions, val_loss = predict_split(model, manifest, "val", cfg.batch_size, store=store)
        val_acc = sum(p.correct for p in predictions) / len(predictions)

        record = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc)
        result.history.append(record)
        logger.info("Epoch %d: train loss %.4f acc %.4f | val loss %.4f acc %.4f", epoch, train_loss, train_acc, val_loss, val_acc)

        if _improved(record, best):
            best, stale = record, 0
            best_state = model.state_dict()
            result.best_epoch = epoch
            if cfg.checkpoint_path is not None:
                save_checkpoint(model, cfg.checkpoint_path)
        else:
            stale += 1

        if on_epoch:
            on_epoch(record)
        if cfg.patience is not None and stale >= cfg.patience:
            logger.info("No validation improvement for %d epochs, stopping after epoch %d", stale, epoch)
            result.stopped_early = True
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result
