"""
Image decoding, bilinear resampling and rescaling.

Pixel centres sit at integer coordinates; resizing maps output pixel i to source
coordinate (i + 0.5) * in/out - 0.5 (centre sampling, no antialiasing). Coordinates
outside the image are clamped, which replicates the nearest edge pixel.
"""
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..engine.tensor import Tensor, get_default_dtype
from ..errors import ImageError

logger = logging.getLogger(__name__)

IMAGE_SIZE = 64
RESCALE = 1.0 / 255.0
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


def decode_image(path) -> np.ndarray:
    """Decodes an 8-bit RGB or grayscale file into an (H, W, 3) float64 array in [0, 255]."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.float64)
    except FileNotFoundError:
        raise ImageError(path, "image not found")
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        raise ImageError(path, f"could not decode image ({e.__class__.__name__})")


def is_decodable(path) -> bool:
    """True when the whole file decodes, pixel data included."""
    try:
        with Image.open(path) as img:
            img.load()
        return True
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        logger.debug("Skipping undecodable file %s: %s", path, e)
        return False


def sample_bilinear(image: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """
    Samples a channel-first (C, H, W) image at fractional coordinates.
    ``ys``/``xs`` share any shape S; the result has shape (C, *S). Out-of-range
    coordinates are clamped to the border (nearest-edge fill).
    """
    _, height, width = image.shape
    ys = np.clip(ys, 0.0, height - 1)
    xs = np.clip(xs, 0.0, width - 1)

    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, height - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    wy = ys - y0
    wx = xs - x0

    top = image[:, y0, x0] * (1.0 - wx) + image[:, y0, x1] * wx
    bottom = image[:, y1, x0] * (1.0 - wx) + image[:, y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def resize_bilinear(image: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Resizes a (C, H, W) image to (C, *size) with centre sampling."""
    _, height, width = image.shape
    out_h, out_w = size
    ys = (np.arange(out_h) + 0.5) * (height / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (width / out_w) - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return sample_bilinear(image, grid_y, grid_x)


def read_image_array(path, size: int = IMAGE_SIZE, rescale: float = RESCALE) -> np.ndarray:
    """Decode -> bilinear resize to size x size -> rescale; returns (3, size, size) float64 in [0, 1]."""
    pixels = decode_image(path).transpose(2, 0, 1)
    if pixels.shape[1:] != (size, size):
        pixels = resize_bilinear(pixels, (size, size))
    return np.clip(pixels * rescale, 0.0, 1.0)


def load_image(path, size: int = IMAGE_SIZE) -> Tensor:
    return Tensor(read_image_array(path, size), dtype=get_default_dtype())
