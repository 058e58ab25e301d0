"""Affine-invariant depth losses, metrics, curriculum sampling and stereo ingest."""

from ._affdepth import (
    DataError,
    NumericalError,
    batches,
    evaluate,
    gradcheck,
    ingest,
    loss,
    loss_names,
    lsq_align,
    make_plan,
    pacing,
    read_pfm,
    surface_normals,
    unproject,
    write_pfm,
)

__all__ = [
    "DataError",
    "NumericalError",
    "batches",
    "evaluate",
    "gradcheck",
    "ingest",
    "loss",
    "loss_names",
    "lsq_align",
    "make_plan",
    "pacing",
    "read_pfm",
    "surface_normals",
    "unproject",
    "write_pfm",
]
