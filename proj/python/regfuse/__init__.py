"""Partial-overlap point cloud registration (C++ core)."""

from ._regfuse import (
    InvalidInput,
    DegenerateGeometry,
    chamfer_distance,
    compute_descriptors,
    evaluate_pair,
    fuse,
    generate_pair,
    ransac_register,
    register_a,
    register_a_bidirectional,
    weighted_kabsch,
)

__all__ = [
    "InvalidInput",
    "DegenerateGeometry",
    "chamfer_distance",
    "compute_descriptors",
    "evaluate_pair",
    "fuse",
    "generate_pair",
    "ransac_register",
    "register_a",
    "register_a_bidirectional",
    "weighted_kabsch",
]
