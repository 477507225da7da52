"""Labeled point clouds of five geometric primitives, the desk-scale training set."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, normalize_unit_sphere
from .rng import SplitMix64, derive_seed

TORUS_MAJOR = 1.0
TORUS_MINOR = 0.35


class ShapeKind(enum.IntEnum):
    SPHERE = 0
    CUBE = 1
    CONE = 2
    CYLINDER = 3
    TORUS = 4

    @property
    def label_name(self) -> str:
        return self.name.lower()


LABEL_NAMES = [k.label_name for k in ShapeKind]


def _sphere(rng: SplitMix64, n: int) -> np.ndarray:
    u = rng.uniform(2 * n).reshape(n, 2)
    z = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * np.pi * u[:, 1]
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _cube(rng: SplitMix64, n: int) -> np.ndarray:
    u = rng.uniform(3 * n).reshape(n, 3)
    face = np.minimum((u[:, 0] * 6).astype(np.int64), 5)
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    pts = np.empty((n, 3))
    a = 2.0 * u[:, 1] - 1.0
    b = 2.0 * u[:, 2] - 1.0
    rows = np.arange(n)
    pts[rows, axis] = sign
    pts[rows, (axis + 1) % 3] = a
    pts[rows, (axis + 2) % 3] = b
    return pts


def _disk(r_unit: np.ndarray, theta_unit: np.ndarray, z: float) -> np.ndarray:
    r = np.sqrt(r_unit)
    t = 2.0 * np.pi * theta_unit
    return np.stack([r * np.cos(t), r * np.sin(t), np.full_like(r, z)], axis=1)


def _cone(rng: SplitMix64, n: int) -> np.ndarray:
    # apex at z=+1, base disk of radius 1 at z=-1
    slant = np.sqrt(5.0)
    p_side = slant / (slant + 1.0)
    u = rng.uniform(3 * n).reshape(n, 3)
    side = u[:, 0] < p_side
    s = np.sqrt(u[:, 1])  # fraction of the way from apex to rim
    t = 2.0 * np.pi * u[:, 2]
    lateral = np.stack([s * np.cos(t), s * np.sin(t), 1.0 - 2.0 * s], axis=1)
    base = _disk(u[:, 1], u[:, 2], -1.0)
    return np.where(side[:, None], lateral, base)


def _cylinder(rng: SplitMix64, n: int) -> np.ndarray:
    # side area 4*pi, each cap pi
    u = rng.uniform(3 * n).reshape(n, 3)
    t = 2.0 * np.pi * u[:, 2]
    lateral = np.stack([np.cos(t), np.sin(t), 2.0 * u[:, 1] - 1.0], axis=1)
    cap_z = np.where(u[:, 0] < 5.0 / 6.0, 1.0, -1.0)
    cap = _disk(u[:, 1], u[:, 2], 0.0)
    cap[:, 2] = cap_z
    return np.where((u[:, 0] < 4.0 / 6.0)[:, None], lateral, cap)


def _torus(rng: SplitMix64, n: int) -> np.ndarray:
    # surface element is proportional to (R + r cos(phi)); reject on phi to get uniform density
    R, r = TORUS_MAJOR, TORUS_MINOR
    out = []
    have = 0
    while have < n:
        m = max(64, 2 * (n - have))
        u = rng.uniform(3 * m).reshape(m, 3)
        phi = 2.0 * np.pi * u[:, 0]
        keep = u[:, 1] * (R + r) <= R + r * np.cos(phi)
        theta = 2.0 * np.pi * u[keep, 2]
        phi = phi[keep]
        ring = R + r * np.cos(phi)
        out.append(np.stack([ring * np.cos(theta), ring * np.sin(theta), r * np.sin(phi)], axis=1))
        have += len(phi)
    return np.concatenate(out)[:n]


_SAMPLERS = {
    ShapeKind.SPHERE: _sphere,
    ShapeKind.CUBE: _cube,
    ShapeKind.CONE: _cone,
    ShapeKind.CYLINDER: _cylinder,
    ShapeKind.TORUS: _torus,
}


def sample_primitive(kind: ShapeKind, n: int, seed: int) -> PointCloud:
    """``n`` points uniformly distributed on the canonical primitive's surface."""
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    kind = ShapeKind(kind)
    return PointCloud(_SAMPLERS[kind](SplitMix64(derive_seed(seed, int(kind))), n))


@dataclass(frozen=True)
class DatasetSpec:
    per_class: int = 200
    points: int = 1024
    jitter: float = 0.01
    train_frac: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 1 or self.points < 1:
            raise ValueError("per_class and points must be positive")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be non-negative, got {self.jitter}")
        if not 0 < self.train_frac < 1:
            raise ValueError(f"train fraction must lie in (0, 1), got {self.train_frac}")


@dataclass
class Dataset:
    train: list  # [(PointCloud, label)]
    test: list
    label_names: list

    @property
    def all(self) -> list:
        return self.train + self.test


def make_cloud(kind: ShapeKind, index: int, spec: DatasetSpec) -> PointCloud:
    stream = derive_seed(spec.seed, int(kind), index)
    pc = normalize_unit_sphere(sample_primitive(kind, spec.points, stream))
    if spec.jitter > 0:
        noise = SplitMix64(derive_seed(stream, 0x6A1773)).normal(3 * spec.points).reshape(-1, 3)
        pc = PointCloud(pc.points.astype(np.float64) + spec.jitter * noise)
    return pc


def split_indices(spec: DatasetSpec, kind: ShapeKind) -> tuple[list[int], list[int]]:
    """Seeded per-class shuffle; the first ``round(train_frac * per_class)`` go to train."""
    n_train = int(round(spec.train_frac * spec.per_class))
    n_train = min(max(n_train, 1), spec.per_class - 1) if spec.per_class > 1 else 1
    rng = SplitMix64(derive_seed(spec.seed, int(kind), 0x5B117))
    order = list(range(spec.per_class))
    for i in range(len(order) - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return sorted(order[:n_train]), sorted(order[n_train:])


def build_dataset(spec: DatasetSpec) -> Dataset:
    train, test = [], []
    for kind in ShapeKind:
        tr, te = split_indices(spec, kind)
        train += [(make_cloud(kind, i, spec), int(kind)) for i in tr]
        test += [(make_cloud(kind, i, spec), int(kind)) for i in te]
    return Dataset(train, test, list(LABEL_NAMES))
