"""Amalgamated DeepDream for point clouds: a small set classifier, gradient-ascent
dreaming with set-union amalgamation, and the metrics that compare the two."""

from .geometry import Placement, PointCloud, apply_placement, downsample_random, normalize_unit_sphere, union

__all__ = [
    "Placement",
    "PointCloud",
    "apply_placement",
    "downsample_random",
    "normalize_unit_sphere",
    "union",
]
