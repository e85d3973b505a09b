"""
Dataset scanning, balanced splitting and the manifest CSV.

Layout: ``<root>/TB/*`` and ``<root>/Normal/*``. The default split mirrors the
balanced protocol: 600 images per class form the training pool, 20 % of which is
held out (stratified) for validation, then 100 TB + 101 Normal images are set aside
for testing. Everything left over is recorded as ``unused``.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt

from ..errors import EmptyClassError, LayoutError, ManifestError, QuotaError
from .images import IMAGE_EXTENSIONS, is_decodable

logger = logging.getLogger(__name__)

TB = "TB"
NORMAL = "Normal"
CLASS_NAMES = (TB, NORMAL)
LABEL_INDEX = {NORMAL: 0, TB: 1}
SPLITS = ("train", "val", "test", "unused")
MANIFEST_HEADER = ["path", "label", "split", "seed"]


@dataclass(frozen=True)
class ImageRecord:
    path: str
    label: str
    split: str = ""

    @property
    def target(self) -> int:
        return LABEL_INDEX[self.label]


@dataclass
class RawManifest:
    records: List[ImageRecord]
    skipped: List[str] = field(default_factory=list)

    def by_label(self, label: str) -> List[ImageRecord]:
        return [r for r in self.records if r.label == label]


@dataclass(frozen=True)
class DatasetManifest:
    records: Tuple[ImageRecord, ...]
    seed: int

    def split(self, name: str) -> List[ImageRecord]:
        """Records of one split in path-sorted order."""
        return sorted((r for r in self.records if r.split == name), key=lambda r: r.path)

    def counts(self) -> Dict[str, Dict[str, int]]:
        table = {name: {TB: 0, NORMAL: 0} for name in SPLITS}
        for record in self.records:
            table[record.split][record.label] += 1
        return table

    def require(self, *names: str, minimum: int = 1) -> None:
        """Raises ManifestError unless every named split holds at least `minimum` images."""
        for name in names:
            found = len(self.split(name))
            if found < minimum:
                raise ManifestError(f"Manifest has {found} '{name}' images; at least {minimum} needed")

    def summary(self) -> str:
        c = self.counts()
        return " ".join(f"{name} {c[name][TB]}/{c[name][NORMAL]}" for name in ("train", "val", "test"))


class SplitCounts(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_per_class: PositiveInt = 600
    val_fraction: float = Field(default=0.2, ge=0, lt=1)
    test_tb: NonNegativeInt = 100
    test_normal: NonNegativeInt = 101

    def test_count(self, label: str) -> int:
        return self.test_tb if label == TB else self.test_normal

    @property
    def val_per_class(self) -> int:
        return int(round(self.train_per_class * self.val_fraction))


# ================= SCAN =================

def scan_dataset(root_dir) -> RawManifest:
    root = Path(root_dir)
    if not root.is_dir():
        raise LayoutError(f"Dataset root not found: {root}")
    if not any(root.iterdir()):
        raise EmptyClassError(f"Dataset root {root} is empty; expected {TB}/ and {NORMAL}/ with images")

    records, skipped = [], []
    for label in CLASS_NAMES:
        class_dir = root / label
        if not class_dir.is_dir():
            raise LayoutError(f"Missing class directory '{label}/' under {root}")

        files = sorted(
            (f for f in class_dir.iterdir() if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS),
            key=lambda f: f.name,
        )
        found = 0
        for file in files:
            if is_decodable(file):
                records.append(ImageRecord(file.as_posix(), label))
                found += 1
            else:
                skipped.append(file.as_posix())
        if found == 0:
            raise EmptyClassError(f"No decodable images found for class '{label}' in {class_dir}")

    if skipped:
        logger.warning("Skipped %d undecodable file(s)", len(skipped))
    records.sort(key=lambda r: r.path)
    return RawManifest(records, skipped)


# ================= SPLIT =================

def split_dataset(raw: RawManifest, counts: SplitCounts = SplitCounts(), seed: int = 0) -> DatasetManifest:
    """Seeded per-class shuffle -> train pool -> test -> unused; the pool is split stratified into train/val."""
    for label in CLASS_NAMES:
        needed = counts.train_per_class + counts.test_count(label)
        available = len(raw.by_label(label))
        if available < needed:
            raise QuotaError(label, needed, available)

    rng = np.random.default_rng(seed)
    assigned = []
    for label in CLASS_NAMES:
        pool = sorted(raw.by_label(label), key=lambda r: r.path)
        order = rng.permutation(len(pool))
        shuffled = [pool[i] for i in order]

        train_pool = shuffled[: counts.train_per_class]
        test_end = counts.train_per_class + counts.test_count(label)
        n_val = counts.val_per_class

        assigned += [ImageRecord(r.path, label, "val") for r in train_pool[:n_val]]
        assigned += [ImageRecord(r.path, label, "train") for r in train_pool[n_val:]]
        assigned += [ImageRecord(r.path, label, "test") for r in shuffled[counts.train_per_class:test_end]]
        assigned += [ImageRecord(r.path, label, "unused") for r in shuffled[test_end:]]

    assigned.sort(key=lambda r: r.path)
    return DatasetManifest(tuple(assigned), seed)


# ================= MANIFEST CSV =================

def write_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for record in manifest.records:
            writer.writerow([record.path, record.label, record.split, manifest.seed])
    return path


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"Manifest not found: {path}")

    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ManifestError(f"Bad manifest header in {path}: expected {','.join(MANIFEST_HEADER)}")

        records, seeds, seen = [], set(), set()
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ManifestError(f"{path}:{line_no}: expected 4 columns, got {len(row)}")
            record_path, label, split, seed = row
            if label not in CLASS_NAMES:
                raise ManifestError(f"{path}:{line_no}: unknown label '{label}'")
            if split not in SPLITS:
                raise ManifestError(f"{path}:{line_no}: unknown split '{split}'")
            if record_path in seen:
                raise ManifestError(f"{path}:{line_no}: duplicate path '{record_path}'")
            try:
                seeds.add(int(seed))
            except ValueError:
                raise ManifestError(f"{path}:{line_no}: seed '{seed}' is not an integer")
            seen.add(record_path)
            records.append(ImageRecord(record_path, label, split))

    if len(seeds) > 1:
        raise ManifestError(f"{path}: rows disagree on the split seed ({sorted(seeds)})")
    return DatasetManifest(tuple(records), seeds.pop() if seeds else 0)
