"""Inference over a manifest split and a single image, in eval mode without tape recording."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..data.batches import ImageBatch, ImageStore, batch_iter
from ..data.dataset import CLASS_NAMES, LABEL_INDEX, DatasetManifest
from ..data.images import load_image
from ..engine.ops import softmax, softmax_cross_entropy
from ..engine.tensor import Tensor, no_grad
from ..models.model import ModelInstance
from .metrics import ConfusionMatrix, EvalReport

logger = logging.getLogger(__name__)

# index -> class name, following LABEL_INDEX
INDEX_LABEL = {index: name for name, index in LABEL_INDEX.items()}


@dataclass(frozen=True)
class Prediction:
    path: str
    label: int
    prediction: int
    probabilities: Tuple[float, ...]

    @property
    def correct(self) -> bool:
        return self.label == self.prediction


@dataclass
class _BatchOutcome:
    predictions: List[Prediction]
    loss_sum: float


def _run_batch(model: ModelInstance, batch: ImageBatch) -> _BatchOutcome:
    with no_grad():
        logits = model(batch.pixels)
        loss = softmax_cross_entropy(logits, batch.labels)
    probs = softmax(logits)
    predicted = probs.argmax(axis=1)
    predictions = [
        Prediction(path, label, int(pred), tuple(float(p) for p in row))
        for path, label, pred, row in zip(batch.paths, batch.labels, predicted, probs)
    ]
    return _BatchOutcome(predictions, loss.item() * len(batch))


def predict_split(model: ModelInstance, manifest: DatasetManifest, split: str, batch_size: int = 32,
                  workers: int = 1, store: Optional[ImageStore] = None) -> Tuple[List[Prediction], float]:
    """
    Returns per-sample predictions in path order and the mean cross-entropy loss.
    With workers > 1 batches are scored concurrently; results are combined in batch order.
    """
    manifest.require(split)

    was_training = model.training
    model.eval()
    try:
        batches = batch_iter(manifest, split, batch_size, store=store, workers=1)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(lambda b: _run_batch(model, b), batches))
        else:
            outcomes = [_run_batch(model, b) for b in batches]
    finally:
        model.train(was_training)

    predictions = [p for outcome in outcomes for p in outcome.predictions]
    mean_loss = sum(outcome.loss_sum for outcome in outcomes) / len(predictions)
    return predictions, mean_loss


def evaluate(model: ModelInstance, manifest: DatasetManifest, split: str = "test", batch_size: int = 32,
             workers: int = 1, store: Optional[ImageStore] = None) -> EvalReport:
    predictions, mean_loss = predict_split(model, manifest, split, batch_size, workers, store)
    cm = ConfusionMatrix.from_predictions([p.prediction for p in predictions], [p.label for p in predictions])
    report = EvalReport.build(cm, mean_loss, arch=model.architecture, split=split)
    logger.info("%s on %s: accuracy %.4f, loss %.4f (%d samples)", model.architecture, split, report.accuracy, mean_loss, cm.total)
    return report


def predict_image(model: ModelInstance, path) -> Tuple[str, dict]:
    """Class name and per-class probabilities for one image file."""
    image = load_image(path)
    pixels = Tensor(image.data[None], dtype=image.dtype)
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            logits = model(pixels)
    finally:
        model.train(was_training)
    probs = softmax(logits)[0]
    label = INDEX_LABEL[int(np.argmax(probs))]
    return label, {name: float(probs[LABEL_INDEX[name]]) for name in CLASS_NAMES}
