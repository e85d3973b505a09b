from .augment import AugmentConfig, affine_matrix, augment, warp_affine
from .batches import ImageBatch, ImageStore, batch_iter, epoch_order
from .dataset import (
    CLASS_NAMES,
    LABEL_INDEX,
    NORMAL,
    TB,
    DatasetManifest,
    ImageRecord,
    RawManifest,
    SplitCounts,
    read_manifest,
    scan_dataset,
    split_dataset,
    write_manifest,
)
from .images import load_image, read_image_array, resize_bilinear, sample_bilinear
from .synthetic import write_synthetic_dataset
