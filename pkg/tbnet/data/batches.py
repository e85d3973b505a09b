"""
Batch production.

Training order is reshuffled every epoch from (seed, epoch); validation and test
streams are path-sorted and never augmented. Each training sample draws its
augmentation from its own (seed, epoch, position) generator, so threaded decoding
yields exactly the batches serial decoding does.
"""
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

import numpy as np

from ..engine.tensor import Tensor, get_default_dtype
from ..errors import ContractError
from .augment import AugmentConfig, augment
from .dataset import DatasetManifest, ImageRecord
from .images import IMAGE_SIZE, RESCALE, read_image_array

KNOWN_SPLITS = ("train", "val", "test")


@dataclass
class ImageBatch:
    pixels: Tensor
    labels: List[int]
    paths: List[str]

    def __len__(self):
        return len(self.labels)


class ImageStore:
    """Decoded, resized and rescaled images keyed by path; each file is decoded once."""

    def __init__(self, size: int = IMAGE_SIZE, rescale: float = RESCALE, cache: bool = True):
        self.size = size
        self.rescale = rescale
        self.cache = cache
        self._images: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, path: str) -> np.ndarray:
        if self.cache:
            with self._lock:
                cached = self._images.get(path)
            if cached is not None:
                return cached
        pixels = read_image_array(path, self.size, self.rescale)
        if self.cache:
            with self._lock:
                self._images[path] = pixels
        return pixels

    def __len__(self):
        return len(self._images)


def epoch_order(records: List[ImageRecord], seed: int, epoch: int) -> List[ImageRecord]:
    rng = np.random.default_rng([seed, epoch])
    return [records[i] for i in rng.permutation(len(records))]


def _prepare(store: ImageStore, record: ImageRecord, cfg: Optional[AugmentConfig], seed: int, epoch: int, position: int):
    pixels = store.get(record.path)
    if cfg is not None:
        pixels = augment(pixels, cfg, np.random.default_rng([seed, epoch, position]))
    return pixels


def batch_iter(manifest: DatasetManifest, split: str, batch_size: int, augment_cfg: Optional[AugmentConfig] = None,
               seed: int = 0, epoch: int = 0, store: Optional[ImageStore] = None, workers: int = 1) -> Iterator[ImageBatch]:
    if split not in KNOWN_SPLITS:
        raise ContractError(f"Unknown split '{split}'. Valid splits: {', '.join(KNOWN_SPLITS)}")
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")

    records = manifest.split(split)
    if split == "train":
        records = epoch_order(records, seed, epoch)
    else:
        augment_cfg = None
    store = store or ImageStore()

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            positions = range(start, start + len(chunk))
            if pool is None:
                images = [_prepare(store, r, augment_cfg, seed, epoch, i) for r, i in zip(chunk, positions)]
            else:
                images = list(pool.map(lambda ri: _prepare(store, ri[0], augment_cfg, seed, epoch, ri[1]), zip(chunk, positions)))
            yield ImageBatch(
                pixels=Tensor(np.stack(images), dtype=get_default_dtype()),
                labels=[r.target for r in chunk],
                paths=[r.path for r in chunk],
            )
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
