import hashlib
from pathlib import Path

CHUNK_SIZE = 65536


def hash_file(file_path) -> str:
    """SHA-256 of a file's bytes, read in 64 KiB chunks."""
    digest = hashlib.sha256()
    with open(Path(file_path), "rb") as f:
        for chunk in iter(lambda: f.read(CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()
