"""Canned experiments: the paired naive-vs-amalgamated sphere run and the
bottle-like demo input.  Scripts and the acceptance suite both call these."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .classifier import Model
from .dreamer import DreamConfig, DreamTrace, add_run, amalgamate_inputs, deepdream_naive
from .geometry import Placement, PointCloud, normalize_unit_sphere
from .io import write_ply
from .metrics import compare_runs
from .synthgen import ShapeKind, sample_primitive


@dataclass(frozen=True)
class PairedConfig:
    source: ShapeKind = ShapeKind.SPHERE
    target: str = "cone"
    points: int = 1024
    gamma: float = 0.05
    iters: int = 50
    period: int = 5
    max_points: int | None = None
    eps: float = 0.05


@dataclass
class PairedResult:
    seed: int
    input: PointCloud
    naive: PointCloud
    add: PointCloud
    naive_trace: DreamTrace
    add_trace: DreamTrace
    report: dict


def paired_run(model: Model, seed: int, cfg: PairedConfig = PairedConfig()) -> PairedResult:
    """Dream one normalized source sample both ways; ``seed`` drives the sample and the downsampling."""
    target = model.class_index(cfg.target)
    x0 = normalize_unit_sphere(sample_primitive(cfg.source, cfg.points, seed))
    dream = DreamConfig(
        target=target, gamma=cfg.gamma, iters=cfg.iters, period=cfg.period, max_points=cfg.max_points, seed=seed
    )
    naive, naive_trace = deepdream_naive(model, x0, dream)
    add, add_trace = add_run(model, x0, dream)
    report = compare_runs(x0, naive, add, model, target, cfg.eps)
    return PairedResult(seed, x0, naive, add, naive_trace, add_trace, report)


def bottle_stand_in(points: int = 1024, seed: int = 0) -> PointCloud:
    """A narrow cylinder body with a small sphere on top, normalized.

    Half the points go to each part.
    """
    body = sample_primitive(ShapeKind.CYLINDER, points // 2, seed)
    neck = sample_primitive(ShapeKind.SPHERE, points - points // 2, seed + 1)
    # cylinder spans z in [-1, 1]; shrink its radius by scaling then shift the cap above it
    body_pts = body.points.copy()
    body_pts[:, :2] *= 0.45
    placed = amalgamate_inputs(
        [PointCloud(body_pts), neck],
        [Placement(1.0, (0.0, 0.0, 0.0)), Placement(0.3, (0.0, 0.0, 1.3))],
    )
    return normalize_unit_sphere(placed)


def bottle_demo(model: Model, out_dir, target: str = "cone", iters: int = 10, snapshot_every: int = 5,
                gamma: float = 0.05, seed: int = 0) -> dict[int, Path]:
    """Amalgamated run from the bottle stand-in; writes ``input.ply``, numbered snapshots and ``trace.csv``.

    Returns the snapshot paths keyed by iteration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x0 = bottle_stand_in(seed=seed)
    cfg = DreamConfig(target=model.class_index(target), gamma=gamma, iters=iters, seed=seed,
                      snapshot_every=snapshot_every)
    _, trace = add_run(model, x0, cfg)
    (out / "input.ply").write_bytes(write_ply(x0))
    (out / "trace.csv").write_text(trace.to_csv())
    paths = {}
    for t, snap in sorted(trace.snapshots.items()):
        paths[t] = out / f"snapshot_iter{t:04d}.ply"
        paths[t].write_bytes(write_ply(snap))
    return paths
