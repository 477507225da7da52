"""Point-cloud value type and the set operations dreaming is built from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import fisher_yates_prefix


class GeometryError(ValueError):
    pass


class PointCloud:
    """Immutable ordered multiset of 3D points stored as float32 ``(count, 3)``."""

    __slots__ = ("_points",)

    def __init__(self, points):
        arr = np.array(points, dtype=np.float32)
        if arr.size == 0:
            arr = np.zeros((0, 3), np.float32)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise GeometryError(f"expected an (n, 3) array of points, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("point cloud contains non-finite coordinates")
        arr.setflags(write=False)
        self._points = arr

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3), np.float32))

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def count(self) -> int:
        return self._points.shape[0]

    def __len__(self) -> int:
        return self.count

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __repr__(self) -> str:
        return f"PointCloud(count={self.count})"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._points.min(axis=0), self._points.max(axis=0)


@dataclass(frozen=True)
class Placement:
    scale: float = 1.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise GeometryError(f"placement scale must be positive, got {self.scale}")
        if len(self.translation) != 3 or not all(np.isfinite(self.translation)):
            raise GeometryError("placement translation must be 3 finite numbers")

    def then(self, other: "Placement") -> "Placement":
        """Placement equal to applying ``self`` first and ``other`` second."""
        t = np.asarray(self.translation) * other.scale + np.asarray(other.translation)
        return Placement(self.scale * other.scale, tuple(float(v) for v in t))


def union(a: PointCloud, b: PointCloud) -> PointCloud:
    """Multiset concatenation: all of ``a`` then all of ``b``, duplicates kept."""
    return PointCloud(np.concatenate([a.points, b.points], axis=0))


def normalize_unit_sphere(pc: PointCloud) -> PointCloud:
    """Center on the centroid and scale so the farthest point sits at radius 1.

    A cloud whose points all coincide maps to the origin.
    """
    if pc.count == 0:
        raise GeometryError("empty cloud")
    pts = pc.points.astype(np.float64)
    centered = pts - pts.mean(axis=0)
    radius = np.sqrt((centered**2).sum(axis=1)).max()
    if radius == 0.0:
        return PointCloud(np.zeros_like(pts))
    return PointCloud(centered / radius)


def downsample_random(pc: PointCloud, n: int, seed: int) -> PointCloud:
    if n < 0:
        raise GeometryError(f"downsample target must be non-negative, got {n}")
    if n >= pc.count:
        return PointCloud(pc.points)
    idx = fisher_yates_prefix(pc.count, n, seed)
    return PointCloud(pc.points[np.asarray(idx, dtype=np.int64)])


def apply_placement(pc: PointCloud, p: Placement) -> PointCloud:
    out = pc.points.astype(np.float64) * p.scale + np.asarray(p.translation, dtype=np.float64)
    return PointCloud(out)
