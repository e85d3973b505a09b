"""Central finite-difference helpers for verifying backward rules (use float64)."""
from typing import Callable, Iterable, Optional

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[], float], tensor: Tensor, h: float = 1e-3,
                       indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """
    Central differences of the scalar ``f()`` with respect to ``tensor.data``.
    When ``indices`` (flat positions) is given only those entries are perturbed; the rest stay zero.
    """
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    positions = range(flat.size) if indices is None else indices
    for i in positions:
        original = flat[i]
        flat[i] = original + h
        upper = f()
        flat[i] = original - h
        lower = f()
        flat[i] = original
        grad[i] = (upper - lower) / (2.0 * h)
    return grad.reshape(tensor.shape)


def relative_error(analytic, numeric, floor: float = 1e-12) -> float:
    """||a - n|| / max(||a||, ||n||, floor), measured over the whole gradient."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / scale)
