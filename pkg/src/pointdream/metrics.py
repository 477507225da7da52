"""Sparsity and feature-preservation measurements for dream outputs.

Nearest-neighbour queries go through a small kd-tree whose answers are exactly
the brute-force ones: same float64 distance expression, ties to the lower index.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .classifier import Model, forward
from .geometry import PointCloud
from .nn import softmax

LEAF_SIZE = 16

# ADD is declared the winner when both hold
NN_RATIO = 0.75
COVERAGE_MARGIN = 0.10


class MetricsError(ValueError):
    pass


def _sqdist(pts: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = pts - q
    return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]


class KdTree:
    """Balanced kd-tree (median split on the widest axis) over float64 copies of the points."""

    def __init__(self, pc):
        pts = pc.points if isinstance(pc, PointCloud) else np.asarray(pc)
        self.points = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        n = len(self.points)
        if n == 0:
            raise MetricsError("cannot index an empty cloud")
        self.perm = np.arange(n)
        # node arrays; children -1 for leaves
        self.lo, self.hi, self.start, self.end, self.left, self.right = [], [], [], [], [], []
        self._build(0, n)
        self.lo = np.array(self.lo)
        self.hi = np.array(self.hi)
        self._leaf_pts = {}

    def _build(self, start: int, end: int) -> int:
        node = len(self.start)
        sub = self.points[self.perm[start:end]]
        self.lo.append(sub.min(axis=0))
        self.hi.append(sub.max(axis=0))
        self.start.append(start)
        self.end.append(end)
        self.left.append(-1)
        self.right.append(-1)
        if end - start > LEAF_SIZE:
            axis = int(np.argmax(self.hi[node] - self.lo[node]))
            mid = (start + end) // 2
            order = np.argsort(sub[:, axis], kind="stable")
            self.perm[start:end] = self.perm[start:end][order]
            self.left[node] = self._build(start, mid)
            self.right[node] = self._build(mid, end)
        return node

    def _box_sqdist(self, node: int, q: np.ndarray) -> float:
        lo, hi = self.lo[node], self.hi[node]
        total = 0.0
        for k in range(3):
            if q[k] < lo[k]:
                d = lo[k] - q[k]
            elif q[k] > hi[k]:
                d = q[k] - hi[k]
            else:
                continue
            total = total + d * d
        return total

    def nearest(self, q, exclude: int = -1) -> tuple[int, float]:
        """Index and squared distance of the nearest point to ``q`` (skipping index ``exclude``)."""
        q = np.asarray(q, dtype=np.float64)
        best_i, best_d = -1, np.inf
        stack = [0]
        while stack:
            node = stack.pop()
            if self._box_sqdist(node, q) > best_d:
                continue
            left = self.left[node]
            if left < 0:
                idx = self.perm[self.start[node] : self.end[node]]
                d = _sqdist(self.points[idx], q)
                if exclude >= 0:
                    d[idx == exclude] = np.inf
                m = d.min()
                if m < best_d or (m == best_d and m < np.inf):
                    cand = int(idx[d == m].min())
                    if m < best_d or cand < best_i:
                        best_i, best_d = cand, float(m)
                continue
            right = self.right[node]
            # visit the nearer child first
            if self._box_sqdist(left, q) <= self._box_sqdist(right, q):
                stack += [right, left]
            else:
                stack += [left, right]
        return best_i, best_d

    def query(self, queries, exclude_self: bool = False) -> tuple[np.ndarray, np.ndarray]:
        qs = np.asarray(queries.points if isinstance(queries, PointCloud) else queries, dtype=np.float64)
        idx = np.empty(len(qs), dtype=np.int64)
        d2 = np.empty(len(qs))
        for i, q in enumerate(qs):
            idx[i], d2[i] = self.nearest(q, i if exclude_self else -1)
        return idx, d2


def nn_distances(pc: PointCloud) -> np.ndarray:
    """Distance from each point to its nearest other point (duplicates give 0)."""
    if pc.count < 2:
        raise MetricsError("need at least 2 points for nearest-neighbour distances")
    _, d2 = KdTree(pc).query(pc, exclude_self=True)
    return np.sqrt(d2)


def _nearest_sq(a: PointCloud, b: PointCloud) -> np.ndarray:
    if a.count == 0 or b.count == 0:
        raise MetricsError("empty cloud")
    return KdTree(b).query(a)[1]


def chamfer_directed(a: PointCloud, b: PointCloud) -> float:
    """Mean squared distance from each point of ``a`` to its nearest point of ``b``."""
    return float(_nearest_sq(a, b).mean())


def coverage(a: PointCloud, b: PointCloud, eps: float) -> float:
    """Fraction of ``a`` with a neighbour in ``b`` within ``eps``."""
    if not eps > 0:
        raise MetricsError(f"eps must be positive, got {eps}")
    return float((np.sqrt(_nearest_sq(a, b)) <= eps).mean())


def confidence_trajectory(model: Model, snapshots: dict, target: int) -> list[tuple[int, float, float]]:
    if not snapshots:
        raise MetricsError("no snapshots to evaluate")
    out = []
    for it in sorted(snapshots):
        logits = forward(model, snapshots[it])
        out.append((it, float(logits[target]), float(softmax(logits)[target])))
    return out


@dataclass
class SparsityReport:
    count: int
    mean_nn: float
    median_nn: float
    max_nn: float
    chamfer_input_to_output: float  # squared distances
    coverage: float
    eps: float
    initial_logit: float
    initial_prob: float
    final_logit: float
    final_prob: float


def sparsity_report(inp: PointCloud, out: PointCloud, model: Model, target: int, eps: float) -> SparsityReport:
    d = nn_distances(out)
    li = forward(model, inp)
    lo = forward(model, out)
    return SparsityReport(
        count=out.count,
        mean_nn=float(d.mean()),
        median_nn=float(np.median(d)),
        max_nn=float(d.max()),
        chamfer_input_to_output=chamfer_directed(inp, out),
        coverage=coverage(inp, out, eps),
        eps=float(eps),
        initial_logit=float(li[target]),
        initial_prob=float(softmax(li)[target]),
        final_logit=float(lo[target]),
        final_prob=float(softmax(lo)[target]),
    )


def _wins(a: SparsityReport, b: SparsityReport) -> bool:
    return a.mean_nn <= NN_RATIO * b.mean_nn and a.coverage >= b.coverage + COVERAGE_MARGIN


def verdict(naive: SparsityReport, add: SparsityReport) -> str:
    if _wins(add, naive):
        return "ADD"
    if _wins(naive, add):
        return "naive"
    return "tie"


def compare_runs(inp, naive_out, add_out, model: Model, target: int, eps: float = 0.05) -> dict:
    naive = sparsity_report(inp, naive_out, model, target, eps)
    add = sparsity_report(inp, add_out, model, target, eps)
    return {
        "naive": asdict(naive),
        "add": asdict(add),
        "verdict": verdict(naive, add),
        "criteria": {"nn_ratio": NN_RATIO, "coverage_margin": COVERAGE_MARGIN},
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
