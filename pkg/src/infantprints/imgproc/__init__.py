"""Image ingestion, resampling and the classical ridge-analysis chain."""

from .image import (
    CaptureMeta,
    Finger,
    FingerprintImage,
    downsample,
    load_image,
    load_image_file,
    write_image,
    write_image_file,
)
from .ridges import (
    RidgeAnalysis,
    analyze,
    block_size_for_ppi,
    estimate_frequency,
    estimate_orientation,
    segment,
)
from .enhance import Skeleton, binarize_and_thin, enhance

__all__ = [
    "CaptureMeta",
    "Finger",
    "FingerprintImage",
    "RidgeAnalysis",
    "Skeleton",
    "analyze",
    "binarize_and_thin",
    "block_size_for_ppi",
    "downsample",
    "enhance",
    "estimate_frequency",
    "estimate_orientation",
    "load_image",
    "load_image_file",
    "segment",
    "write_image",
    "write_image_file",
]
