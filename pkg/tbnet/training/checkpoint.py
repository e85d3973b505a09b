"""
Binary checkpoint format (version 1), little-endian throughout:

    b"TBDL" | u32 version | u32 len + arch id | u32 len + JSON options | u32 tensor count
    per tensor: u32 len + name | u32 rank | rank x u64 dim | float32 payload

Parameters come first, then buffers (batch-norm running statistics), each in
registration order.
"""
import json
import logging
import os
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ArchitectureMismatchError, FormatError, IntegrityError
from ..models.model import ARCHITECTURES, ModelInstance
from ..models.registry import build_model

logger = logging.getLogger(__name__)

MAGIC = b"TBDL"
VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(model: ModelInstance, path) -> Path:
    path = Path(path)
    state = model.state_dict()
    options = {"simple_bypass": model.spec.simple_bypass, "seed": model.spec.seed}

    chunks = [MAGIC, struct.pack("<I", VERSION), _pack_str(model.architecture),
              _pack_str(json.dumps(options, sort_keys=True)), struct.pack("<I", len(state))]
    for name, array in state.items():
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).tobytes())

    # write-then-rename
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        for chunk in chunks:
            f.write(chunk)
    os.replace(tmp, path)
    logger.debug("Saved %s checkpoint with %d tensors to %s", model.architecture, len(state), path)
    return path


class _Reader:
    def __init__(self, buffer: bytes, path: Path):
        self.buffer = buffer
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.buffer):
            raise IntegrityError(f"Checkpoint {self.path} is truncated (needed {end} bytes, file has {len(self.buffer)})")
        chunk = self.buffer[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<I")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError(f"Checkpoint {self.path} contains a malformed string")


def read_checkpoint(path) -> Tuple[str, dict, Dict[str, np.ndarray]]:
    """Parses a checkpoint into (architecture, options, state) without building a model."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"Checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)

    if len(reader.buffer) < len(MAGIC) or reader.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{path} is not a tbnet checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise FormatError(f"Unsupported checkpoint version {version} in {path} (expected {VERSION})")

    architecture = reader.string()
    try:
        options = json.loads(reader.string())
    except json.JSONDecodeError:
        raise IntegrityError(f"Checkpoint {path} has unreadable options")

    (count,) = reader.unpack("<I")
    state = {}
    for _ in range(count):
        name = reader.string()
        (rank,) = reader.unpack("<I")
        shape = reader.unpack(f"<{rank}Q") if rank else ()
        size = int(np.prod(shape)) if shape else 1
        payload = reader.take(size * PAYLOAD_DTYPE.itemsize)
        state[name] = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(shape).copy()

    if reader.offset != len(reader.buffer):
        raise IntegrityError(f"Checkpoint {path} has {len(reader.buffer) - reader.offset} trailing bytes")
    return architecture, options, state


def load_checkpoint(path, expected_arch: Optional[str] = None) -> ModelInstance:
    architecture, options, state = read_checkpoint(path)
    if architecture not in ARCHITECTURES:
        raise FormatError(f"Checkpoint {path} names unknown architecture '{architecture}'")
    if expected_arch is not None and architecture != expected_arch:
        raise ArchitectureMismatchError(f"Checkpoint {path} holds a {architecture} model, but {expected_arch} was requested")

    model = build_model(architecture, seed=int(options.get("seed", 0)), simple_bypass=bool(options.get("simple_bypass", False)))
    expected = model.state_dict()
    if len(state) != len(expected):
        raise IntegrityError(f"Checkpoint {path} has {len(state)} tensors; {architecture} needs {len(expected)}")
    model.load_state_dict(state)
    logger.debug("Loaded %s checkpoint from %s", architecture, path)
    return model
