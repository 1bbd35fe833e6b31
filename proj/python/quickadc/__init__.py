"""Product quantization nearest neighbor search with Quick ADC scans."""

from ._core import (
    FormatError,
    Index,
    ProductQuantizer,
    best_kernel,
    build_index,
    exact_groundtruth,
    generate_synthetic,
    kernel_available,
    read_bvecs,
    read_fvecs,
    read_ivecs,
    recall_at,
    residuals,
    search,
    train_coarse,
    train_pq,
    write_fvecs,
    write_ivecs,
)

__all__ = [
    "FormatError",
    "Index",
    "ProductQuantizer",
    "best_kernel",
    "build_index",
    "exact_groundtruth",
    "generate_synthetic",
    "kernel_available",
    "read_bvecs",
    "read_fvecs",
    "read_ivecs",
    "recall_at",
    "residuals",
    "search",
    "train_coarse",
    "train_pq",
    "write_fvecs",
    "write_ivecs",
]
