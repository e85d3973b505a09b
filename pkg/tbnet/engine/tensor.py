"""
Dense tensors with a reverse-mode tape.

Buffers are numpy arrays in row-major (C) order. A tensor produced by an operation
whose inputs require gradients is recorded on the calling thread's active tape;
``backward`` sweeps that tape in reverse and accumulates gradients (+=) into every
reachable tensor that requires them.
"""
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..errors import BackwardError, ShapeError

_state = threading.local()
_default_dtype = np.dtype(np.float32)


# ================= PRECISION =================

def get_default_dtype() -> np.dtype:
    return _default_dtype


def set_default_dtype(dtype) -> None:
    """Sets the dtype new tensors are created with (float32 for training, float64 for gradient checks)."""
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported precision: {dtype}")
    _default_dtype = dtype


@contextmanager
def default_dtype(dtype):
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


# ================= TAPE =================

@dataclass
class Node:
    op: str
    parents: Tuple["Tensor", ...]
    output: "Tensor"
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
    context: dict = field(default_factory=dict)


class Tape:
    """Ordered record of operations. Nodes are appended as they run, so parents always precede children."""

    def __init__(self):
        self.nodes: list = []
        self.consumed = False

    def record(self, op, parents, output, backward, **context) -> int:
        self.nodes.append(Node(op, tuple(parents), output, backward, context))
        return len(self.nodes) - 1

    def __len__(self):
        return len(self.nodes)


def current_tape() -> Tape:
    tape = getattr(_state, "tape", None)
    if tape is None or tape.consumed:
        tape = Tape()
        _state.tape = tape
    return tape


def reset_tape() -> None:
    """Drops the calling thread's tape (and every saved context on it)."""
    _state.tape = None


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disables recording on the calling thread, e.g. for evaluation and inference."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


# ================= TENSOR =================

class Tensor:
    def __init__(self, data, requires_grad: bool = False, dtype=None):
        array = np.array(data, dtype=dtype or _default_dtype, copy=True, order="C")
        if any(dim <= 0 for dim in array.shape):
            raise ShapeError(f"Tensor dimensions must be positive, got shape {array.shape}")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = np.zeros_like(array) if requires_grad else None
        self.tape_id: Optional[int] = None
        self._tape: Optional[Tape] = None

    @classmethod
    def from_op(cls, op: str, data: np.ndarray, parents: Sequence["Tensor"], backward, **context) -> "Tensor":
        """Wraps an op result, recording it on the tape when any parent needs gradients."""
        out = cls.__new__(cls)
        out.data = np.asarray(data, order="C")
        out.grad = None
        out.tape_id = None
        out._tape = None
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            tape = current_tape()
            out.tape_id = tape.record(op, parents, out, backward, **context)
            out._tape = tape
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        if self.requires_grad:
            if self.grad is None:
                self.grad = np.zeros_like(self.data)
            else:
                self.grad.fill(0)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if grad.shape != self.data.shape:
            raise ShapeError(f"Gradient shape {grad.shape} does not match tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


def backward(loss: Tensor) -> None:
    """Reverse sweep from a scalar loss, seeding its gradient with 1.0."""
    if loss.ndim != 0:
        raise BackwardError(f"backward() needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None or loss.tape_id is None:
        raise BackwardError("Loss is not on a tape (no input requires gradients, or it was built under no_grad)")
    if tape.consumed:
        raise BackwardError("backward() already ran for this tape; run a fresh forward pass first")

    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(tape.nodes[: loss.tape_id + 1]):
        grad = node.output.grad
        if grad is None:
            continue
        parent_grads = node.backward(grad)
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is not None and parent.requires_grad:
                parent.accumulate_grad(parent_grad)

    tape.consumed = True
    tape.nodes.clear()
    if getattr(_state, "tape", None) is tape:
        _state.tape = None


def zero_grads(tensors) -> None:
    for tensor in tensors:
        tensor.zero_grad()
