"""PointNet-style set classifier: shared per-point MLP, max-pool, dense head."""

from __future__ import annotations

import base64
import binascii
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .geometry import PointCloud
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pointdream-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    point_widths: tuple[int, ...] = (3, 64, 128)
    head_widths: tuple[int, ...] = (128, 64, 5)
    num_classes: int = 5
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "point_widths", tuple(int(w) for w in self.point_widths))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))
        if len(self.point_widths) < 2 or self.point_widths[0] != 3:
            raise ValueError(f"per-point widths must start at 3, got {self.point_widths}")
        if len(self.head_widths) < 2 or self.head_widths[0] != self.point_widths[-1]:
            raise ValueError("head must start at the pooled feature width")
        if self.head_widths[-1] != self.num_classes or self.num_classes < 1:
            raise ValueError(f"last head width {self.head_widths[-1]} != class count {self.num_classes}")
        if min(self.point_widths + self.head_widths) < 1:
            raise ValueError("layer widths must be positive")

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        for prefix, widths in (("point", self.point_widths), ("head", self.head_widths)):
            for i, (a, b) in enumerate(zip(widths, widths[1:])):
                shapes[f"{prefix}.{i}.W"] = (a, b)
                shapes[f"{prefix}.{i}.b"] = (b,)
        return shapes


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.label_names:
            self.label_names = [f"class{i}" for i in range(self.config.num_classes)]
        expected = self.config.param_shapes()
        if list(self.params) != list(expected):
            raise ValueError(f"parameter names {list(self.params)} do not match config")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {self.params[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"parameter {name} is not finite")

    def class_index(self, name: str) -> int:
        try:
            return self.label_names.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r}; valid: {', '.join(self.label_names)}") from None

    def astype(self, dtype) -> "Model":
        return Model(self.config, {k: v.astype(dtype) for k, v in self.params.items()}, list(self.label_names))


def init_model(config: ModelConfig, label_names=None, last_layer_scale: float = 0.01) -> Model:
    """He-normal weights from splitmix64, zero biases; the output layer is scaled down
    so an untrained model predicts near-uniform class probabilities."""
    rng = SplitMix64(derive_seed(config.init_seed, 0x1417))
    params = {}
    shapes = config.param_shapes()
    last_w = [k for k in shapes if k.endswith(".W")][-1]
    for name, shape in shapes.items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, np.float32)
            continue
        std = math.sqrt(2.0 / shape[0]) * (last_layer_scale if name == last_w else 1.0)
        params[name] = (std * rng.normal(shape[0] * shape[1])).reshape(shape).astype(np.float32)
    return Model(config, params, list(label_names or []))


def _build(tape: nn.Tape, model: Model, x: nn.Node, leaves: dict[str, nn.Node]) -> nn.Node:
    cfg = model.config
    h = x
    for i in range(len(cfg.point_widths) - 1):
        h = nn.relu(tape, nn.affine(tape, h, leaves[f"point.{i}.W"], leaves[f"point.{i}.b"]))
    h = nn.max_pool_points(tape, h)
    n_head = len(cfg.head_widths) - 1
    for i in range(n_head):
        h = nn.affine(tape, h, leaves[f"head.{i}.W"], leaves[f"head.{i}.b"])
        if i < n_head - 1:
            h = nn.relu(tape, h)
    return h


def _points_of(pc) -> np.ndarray:
    pts = pc.points if isinstance(pc, PointCloud) else np.asarray(pc)
    if pts.shape[-2] == 0:
        raise ValueError("empty cloud")
    return pts


def record_forward(model: Model, points: np.ndarray) -> tuple[nn.Tape, nn.Node, nn.Node, dict[str, nn.Node]]:
    """Forward on a fresh tape. ``points`` is ``(m, 3)`` or a batch ``(B, m, 3)``."""
    tape = nn.Tape()
    dtype = next(iter(model.params.values())).dtype
    x = tape.leaf(np.asarray(points, dtype=dtype), name="points")
    leaves = {k: tape.leaf(v, name=k) for k, v in model.params.items()}
    logits = _build(tape, model, x, leaves)
    return tape, x, logits, leaves


def forward(model: Model, pc) -> np.ndarray:
    _, _, logits, _ = record_forward(model, _points_of(pc))
    return logits.value


def logits_and_input_gradient(model: Model, pc, target: int) -> tuple[np.ndarray, np.ndarray]:
    pts = _points_of(pc)
    if not 0 <= target < model.config.num_classes:
        raise ValueError(f"class index {target} out of range 0..{model.config.num_classes - 1}")
    tape, x, logits, _ = record_forward(model, pts)
    tape.backward(nn.select(tape, logits, target))
    return logits.value, x.grad


def input_gradient(model: Model, pc, target: int) -> np.ndarray:
    """d logit[target] / d points, shape ``(count, 3)``."""
    return logits_and_input_gradient(model, pc, target)[1]


def predict(model: Model, clouds: list, batch_size: int = 64) -> np.ndarray:
    """Logits for many clouds; clouds of equal size are evaluated as one batch."""
    out = []
    for start in range(0, len(clouds), batch_size):
        chunk = [_points_of(pc) for pc in clouds[start : start + batch_size]]
        if len({c.shape[0] for c in chunk}) == 1:
            _, _, logits, _ = record_forward(model, np.stack(chunk))
            out.append(logits.value)
        else:
            out.append(np.stack([forward(model, c) for c in chunk]))
    return np.concatenate(out) if out else np.zeros((0, model.config.num_classes), np.float32)


# -- training -----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.lr > 0:
            raise ValueError("epochs, batch size and learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = ""):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch} {detail}".strip())
        self.epoch = epoch
        self.batch = batch


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            update = c.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + c.eps)
            params[k] = (p - update).astype(p.dtype)


def _shuffled(n: int, seed: int, epoch: int) -> list[int]:
    rng = SplitMix64(derive_seed(seed, epoch, 0x7EA1))
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def train(dataset: list, model_cfg: ModelConfig, train_cfg: TrainConfig, label_names=None, callback=None):
    """Adam on mean softmax cross-entropy. ``dataset`` is a list of ``(PointCloud, label)``.

    Returns ``(model, history)`` with one :class:`EpochStats` per epoch.
    """
    if not dataset:
        raise ValueError("empty training set")
    labels = np.array([lab for _, lab in dataset], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= model_cfg.num_classes:
        raise ValueError(f"label out of range 0..{model_cfg.num_classes - 1}")
    points = [_points_of(pc).astype(np.float32) for pc, _ in dataset]
    if len({p.shape[0] for p in points}) != 1:
        raise ValueError("training clouds must share one point count")
    points = np.stack(points)

    model = init_model(model_cfg, label_names)
    params = dict(model.params)
    opt = Adam(params, train_cfg)
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        order = np.asarray(_shuffled(len(points), train_cfg.seed, epoch))
        total_loss, correct = 0.0, 0
        for b, start in enumerate(range(0, len(order), train_cfg.batch_size)):
            idx = order[start : start + train_cfg.batch_size]
            try:
                tape, _, logits, leaves = record_forward(Model(model_cfg, params, model.label_names), points[idx])
                loss = nn.softmax_cross_entropy(tape, logits, labels[idx])
            except (nn.NonFiniteError, FloatingPointError) as exc:
                raise TrainingDiverged(epoch, b, str(exc)) from exc
            if not math.isfinite(float(loss.value)):
                raise TrainingDiverged(epoch, b)
            tape.backward(loss)
            opt.step(params, {k: leaves[k].grad for k in params})
            total_loss += float(loss.value) * len(idx)
            correct += int((logits.value.argmax(axis=-1) == labels[idx]).sum())
        stats = EpochStats(epoch, total_loss / len(order), correct / len(order))
        history.append(stats)
        log.info("epoch %d loss %.4f acc %.4f", stats.epoch, stats.loss, stats.train_acc)
        if callback is not None:
            callback(stats)
    return Model(model_cfg, params, model.label_names), history


def mean_loss(model: Model, dataset: list) -> float:
    logits = predict(model, [pc for pc, _ in dataset])
    labels = np.array([lab for _, lab in dataset])
    return float(-nn.log_softmax_at(logits, labels).mean())


@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted


def evaluate(model: Model, dataset: list) -> Evaluation:
    if not dataset:
        raise ValueError("empty dataset")
    pred = predict(model, [pc for pc, _ in dataset]).argmax(axis=-1)
    C = model.config.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    for (_, lab), p in zip(dataset, pred):
        confusion[lab, p] += 1
    return Evaluation(float(np.trace(confusion) / len(dataset)), confusion)


# -- checkpoints --------------------------------------------------------------


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


def save_checkpoint(model: Model) -> bytes:
    blocks = []
    for name, arr in model.params.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        blocks.append({"name": name, "shape": list(arr.shape), "data": base64.b64encode(raw).decode("ascii")})
    cfg = asdict(model.config)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()},
        "label_names": list(model.label_names),
        "params": blocks,
    }
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def load_checkpoint(data: bytes, expected: ModelConfig | None = None) -> Model:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointTruncatedError(f"truncated data: checkpoint is not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a pointdream checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    try:
        config = ModelConfig(**doc["config"])
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"bad model config: {exc}") from None
    shapes = (expected or config).param_shapes()
    stored = {b["name"]: b for b in doc.get("params", [])}
    params = {}
    for name, shape in shapes.items():
        if name not in stored:
            raise CheckpointShapeError(f"tensor {name} missing from checkpoint")
        block = stored[name]
        if tuple(block["shape"]) != shape:
            raise CheckpointShapeError(f"tensor {name}: stored shape {tuple(block['shape'])}, expected {shape}")
        try:
            raw = base64.b64decode(block["data"], validate=True)
        except (binascii.Error, ValueError):
            raise CheckpointTruncatedError(f"truncated data in tensor {name}") from None
        if len(raw) != 4 * math.prod(shape):
            raise CheckpointTruncatedError(f"truncated data in tensor {name}: {len(raw)} bytes")
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
    if set(stored) != set(shapes):
        extra = sorted(set(stored) - set(shapes))
        raise CheckpointShapeError(f"unexpected tensors in checkpoint: {extra}")
    return Model(config if expected is None else expected, params, list(doc.get("label_names", [])))
