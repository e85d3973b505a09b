"""
Training-time geometric augmentation.

Every draw samples rotation, shift, shear, zoom and flip, composes them into one affine
matrix about the image centre and resamples once (bilinear, nearest-edge fill).
Point transform order: zoom, shear, rotate, translate, then horizontal flip.
"""
import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt

from .images import RESCALE, sample_bilinear


class AugmentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    rescale: float = Field(default=RESCALE, gt=0)
    rotation_deg: float = Field(default=40.0, ge=0)
    shift_frac: float = Field(default=0.2, ge=0)
    shear_frac: float = Field(default=0.2, ge=0)
    zoom_frac: float = Field(default=0.2, ge=0, lt=1)
    horizontal_flip: bool = True
    fill: Literal["nearest"] = "nearest"
    seed: NonNegativeInt = 0

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentConfig":
        return cls(rotation_deg=0, shift_frac=0, shear_frac=0, zoom_frac=0, horizontal_flip=False, seed=seed)


def affine_matrix(height: int, width: int, rotation_deg: float = 0.0, tx: float = 0.0, ty: float = 0.0,
                  shear: float = 0.0, zoom: float = 1.0, flip: bool = False) -> np.ndarray:
    """
    3x3 matrix mapping input pixel coordinates (x, y, 1) to output coordinates.
    Translation is in pixels; shear is the off-diagonal factor; zoom > 1 enlarges content.
    """
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    theta = math.radians(rotation_deg)
    cos, sin = math.cos(theta), math.sin(theta)

    to_origin = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    scale = np.array([[zoom, 0.0, 0.0], [0.0, zoom, 0.0], [0.0, 0.0, 1.0]])
    shearing = np.array([[1.0, shear, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    rotation = np.array([[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]])
    shift = np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    mirror = np.array([[-1.0 if flip else 1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])

    return back @ mirror @ shift @ rotation @ shearing @ scale @ to_origin


def warp_affine(image: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Resamples a (C, H, W) image so that input point p lands on matrix @ p."""
    if np.array_equal(matrix, np.eye(3)):
        return image.copy()
    _, height, width = image.shape
    inverse = np.linalg.inv(matrix)
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    src_x = inverse[0, 0] * xs + inverse[0, 1] * ys + inverse[0, 2]
    src_y = inverse[1, 0] * xs + inverse[1, 1] * ys + inverse[1, 2]
    return sample_bilinear(image, src_y, src_x)


def sample_matrix(cfg: AugmentConfig, rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    # Always draw every parameter so the stream position is independent of the config.
    rotation = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
    tx = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * width
    ty = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * height
    shear = rng.uniform(-cfg.shear_frac, cfg.shear_frac)
    zoom = rng.uniform(1.0 - cfg.zoom_frac, 1.0 + cfg.zoom_frac)
    flip = bool(rng.random() < 0.5) and cfg.horizontal_flip
    return affine_matrix(height, width, rotation, tx, ty, shear, zoom, flip)


def augment(image: np.ndarray, cfg: AugmentConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Randomly transforms an already rescaled (3, H, W) image; output stays in [0, 1] with the same shape."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    _, height, width = image.shape
    matrix = sample_matrix(cfg, rng, height, width)
    if np.array_equal(matrix, np.eye(3)):
        return image.copy()
    return np.clip(warp_affine(image, matrix), 0.0, 1.0)
