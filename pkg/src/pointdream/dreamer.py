"""Point-cloud DeepDream: plain gradient ascent and the amalgamated (set-union) variant.

Both loops ascend the raw logit of one class. The amalgamated loop unions the
stepped cloud with the input after every step and periodically downsamples.
Clouds are used in the frame they are given; callers normalize once up front.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .classifier import Model, logits_and_input_gradient
from .geometry import PointCloud, apply_placement, downsample_random, union
from .nn import NonFiniteError, softmax
from .rng import derive_seed


class UnionMode(enum.Enum):
    WITH_ORIGINAL = "original"
    WITH_PREVIOUS = "previous"


class DreamError(FloatingPointError):
    def __init__(self, iteration: int, detail: str):
        super().__init__(f"iteration {iteration}: {detail}")
        self.iteration = iteration


@dataclass(frozen=True)
class DreamConfig:
    target: int
    gamma: float = 0.05
    iters: int = 50
    period: int = 5  # downsample every `period` iterations, 0 = never
    max_points: int | None = None  # None -> 4 x input count
    union: UnionMode = UnionMode.WITH_ORIGINAL
    seed: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")
        if self.period < 0 or self.snapshot_every < 0:
            raise ValueError("period and snapshot period must be non-negative")
        if self.max_points is not None and self.max_points < 1:
            raise ValueError("max_points must be positive")
        object.__setattr__(self, "union", UnionMode(self.union))

    def resolved_max_points(self, input_count: int) -> int:
        return 4 * input_count if self.max_points is None else self.max_points


@dataclass
class TraceRecord:
    iter: int
    count: int
    target_logit: float
    target_prob: float
    downsampled: bool


@dataclass
class DreamTrace:
    target: int
    initial_logit: float
    initial_prob: float
    records: list[TraceRecord] = field(default_factory=list)
    snapshots: dict[int, PointCloud] = field(default_factory=dict)
    ignored: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "count", "target_logit", "target_prob", "downsampled"])
        for r in self.records:
            w.writerow([r.iter, r.count, f"{r.target_logit:.9g}", f"{r.target_prob:.9g}", int(r.downsampled)])
        return buf.getvalue()


def _evaluate(model: Model, pc: PointCloud, target: int, iteration: int):
    try:
        logits, grad = logits_and_input_gradient(model, pc, target)
    except NonFiniteError as exc:
        raise DreamError(iteration, str(exc)) from exc
    if not np.all(np.isfinite(grad)):
        raise DreamError(iteration, "non-finite gradient")
    prob = float(softmax(logits)[target])
    return float(logits[target]), prob, grad


def _step(pc: PointCloud, grad: np.ndarray, gamma: float, iteration: int) -> PointCloud:
    moved = pc.points + np.float32(gamma) * grad.astype(np.float32)
    if not np.all(np.isfinite(moved)):
        raise DreamError(iteration, "gradient step left finite range")
    return PointCloud(moved)


def _start(model: Model, pc: PointCloud, cfg: DreamConfig):
    if pc.count == 0:
        raise ValueError("empty cloud")
    if not 0 <= cfg.target < model.config.num_classes:
        raise ValueError(f"target {cfg.target} out of range 0..{model.config.num_classes - 1}")
    logit, prob, grad = _evaluate(model, pc, cfg.target, 0)
    trace = DreamTrace(cfg.target, logit, prob)
    if cfg.snapshot_every > 0:
        trace.snapshots[0] = pc
    return trace, grad


def deepdream_naive(model: Model, pc: PointCloud, cfg: DreamConfig) -> tuple[PointCloud, DreamTrace]:
    """``x_t = x_{t-1} + gamma * grad logit_target(x_{t-1})`` for ``cfg.iters`` steps."""
    trace, grad = _start(model, pc, cfg)
    trace.ignored = ["period", "max_points", "union"]
    x = pc
    for t in range(1, cfg.iters + 1):
        x = _step(x, grad, cfg.gamma, t)
        logit, prob, grad = _evaluate(model, x, cfg.target, t)
        trace.records.append(TraceRecord(t, x.count, logit, prob, False))
        if cfg.snapshot_every and t % cfg.snapshot_every == 0:
            trace.snapshots[t] = x
    return x, trace


def add_run(model: Model, pc: PointCloud, cfg: DreamConfig) -> tuple[PointCloud, DreamTrace]:
    """Amalgamated DeepDream.

    Each iteration steps the current cloud along the target-logit gradient, unions
    the result with the input (or with the previous cloud), and every ``period``
    iterations downsamples to ``max_points`` with seed ``derive_seed(cfg.seed, t)``.
    """
    n_max = cfg.resolved_max_points(pc.count)
    if cfg.period > 0 and n_max < pc.count:
        raise ValueError(f"max_points {n_max} is below the input count {pc.count}")
    trace, grad = _start(model, pc, cfg)
    x = pc
    for t in range(1, cfg.iters + 1):
        stepped = _step(x, grad, cfg.gamma, t)
        x = union(stepped, pc if cfg.union is UnionMode.WITH_ORIGINAL else x)
        down = cfg.period > 0 and t % cfg.period == 0
        if down:
            x = downsample_random(x, n_max, derive_seed(cfg.seed, t))
        logit, prob, grad = _evaluate(model, x, cfg.target, t)
        trace.records.append(TraceRecord(t, x.count, logit, prob, down))
        if cfg.snapshot_every and t % cfg.snapshot_every == 0:
            trace.snapshots[t] = x
    return x, trace


def amalgamate_inputs(clouds: list[PointCloud], placements: list) -> PointCloud:
    """Place each cloud, then union them in list order."""
    if len(clouds) != len(placements):
        raise ValueError(f"{len(clouds)} clouds but {len(placements)} placements")
    if not clouds:
        raise ValueError("need at least one cloud")
    out = PointCloud.empty()
    for pc, p in zip(clouds, placements):
        out = union(out, apply_placement(pc, p))
    return out
