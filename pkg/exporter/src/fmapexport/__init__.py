"""Final-stage backbone feature maps exported to the FMAP file format."""

from .export import (
    STRIDE,
    CheckpointMismatch,
    ExportSpec,
    export_features,
    load_backbone,
    write_fmap,
)

__version__ = "0.1.0"

__all__ = [
    "STRIDE",
    "CheckpointMismatch",
    "ExportSpec",
    "export_features",
    "load_backbone",
    "write_fmap",
]
