"""Synthetic two-class dataset: a bright Gaussian blob over noise (TB) versus pure noise (Normal)."""
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import CLASS_NAMES, TB


def synthetic_image(rng: np.random.Generator, positive: bool, size: int = 64) -> np.ndarray:
    """Returns an (size, size, 3) uint8 image."""
    noise = rng.normal(90.0, 30.0, size=(size, size, 1))
    if positive:
        cy, cx = rng.uniform(size * 0.25, size * 0.75, size=2)
        sigma = rng.uniform(size * 0.08, size * 0.15)
        ys, xs = np.mgrid[0:size, 0:size]
        blob = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma ** 2))
        noise = noise + 160.0 * blob[..., None]
    gray = np.clip(noise, 0, 255).astype(np.uint8)
    return np.repeat(gray, 3, axis=2)


def write_synthetic_dataset(root, per_class: int, seed: int = 0, size: int = 64) -> Path:
    root = Path(root)
    rng = np.random.default_rng(seed)
    for label in CLASS_NAMES:
        class_dir = root / label
        class_dir.mkdir(parents=True, exist_ok=True)
        for index in range(per_class):
            pixels = synthetic_image(rng, positive=label == TB, size=size)
            Image.fromarray(pixels).save(class_dir / f"{label.lower()}_{index:05d}.png")
    return root
