"""Command-line pipeline: gen-data, train, eval, dream, add, metrics, convert.

Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import classifier, io, metrics
from .dreamer import DreamConfig, DreamError, UnionMode, add_run, deepdream_naive
from .geometry import PointCloud, normalize_unit_sphere
from .synthgen import LABEL_NAMES, DatasetSpec, ShapeKind, make_cloud, split_indices

MANIFEST_VERSION = 1
DEFAULT_POINTS = 1024


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_cloud(path, points: int | None = None, seed: int = 0) -> PointCloud:
    """Load .xyz/.ply as-is; .off meshes are surface-sampled."""
    ext = Path(path).suffix.lower()
    try:
        if ext == ".xyz":
            return io.parse_xyz(_read_bytes(path))
        if ext == ".ply":
            return io.parse_ply(_read_bytes(path))
        if ext == ".off":
            if points is None:
                points = DEFAULT_POINTS
                print(f"note: --points not given, sampling {points} points from {path}", file=sys.stderr)
            return io.sample_surface(io.parse_off(_read_bytes(path)), points, seed)
    except (io.ParseError, io.MeshError, UnicodeDecodeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    raise UsageError(f"{path}: unknown extension {ext!r} (expected .xyz, .ply or .off)")


def write_cloud(path, pc: PointCloud) -> None:
    ext = Path(path).suffix.lower()
    if ext == ".xyz":
        atomic_write(path, io.write_xyz(pc))
    elif ext == ".ply":
        atomic_write(path, io.write_ply(pc))
    else:
        raise UsageError(f"{path}: cannot write extension {ext!r} (expected .xyz or .ply)")


def load_model(path) -> classifier.Model:
    try:
        return classifier.load_checkpoint(_read_bytes(path))
    except classifier.CheckpointError as exc:
        raise UsageError(f"{path}: {exc}") from None


def target_index(model: classifier.Model, name: str) -> int:
    if name not in model.label_names:
        raise UsageError(f"unknown target {name!r}; valid names: {', '.join(model.label_names)}")
    return model.label_names.index(name)


# -- dataset manifest ---------------------------------------------------------


def cmd_gen_data(args) -> int:
    try:
        spec = DatasetSpec(args.per_class, args.points, args.jitter, args.train_frac, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    files = []
    for kind in ShapeKind:
        train_idx, test_idx = split_indices(spec, kind)
        split_of = {i: "train" for i in train_idx} | {i: "test" for i in test_idx}
        for i in range(spec.per_class):
            rel = f"{kind.label_name}/{kind.label_name}_{i:04d}.xyz"
            write_cloud(out / rel, make_cloud(kind, i, spec))
            files.append({"path": rel, "label": int(kind), "label_name": kind.label_name, "split": split_of[i]})
    manifest = {
        "format_version": MANIFEST_VERSION,
        "spec": {
            "per_class": spec.per_class,
            "points": spec.points,
            "jitter": spec.jitter,
            "train_frac": spec.train_frac,
            "seed": spec.seed,
        },
        "label_names": list(LABEL_NAMES),
        "files": files,
    }
    atomic_write(out / "manifest.json", (json.dumps(manifest, indent=1) + "\n").encode())
    n_train = sum(f["split"] == "train" for f in files)
    print(f"wrote {len(files)} clouds ({n_train} train / {len(files) - n_train} test) to {out}", file=sys.stderr)
    return 0


def load_manifest(data_dir):
    path = Path(data_dir) / "manifest.json"
    try:
        manifest = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise UsageError(f"{path}: unsupported manifest version {manifest.get('format_version')!r}")
    names = manifest["label_names"]
    splits = {"train": [], "test": []}
    for entry in manifest["files"]:
        if not 0 <= entry["label"] < len(names) or names[entry["label"]] != entry["label_name"]:
            raise UsageError(f"{path}: inconsistent label for {entry['path']}")
        pc = read_cloud(Path(data_dir) / entry["path"])
        splits[entry["split"]].append((pc, entry["label"]))
    return manifest, splits


def cmd_train(args) -> int:
    manifest, splits = load_manifest(args.data)
    names = manifest["label_names"]
    try:
        tcfg = classifier.TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    mcfg = classifier.ModelConfig(head_widths=(128, 64, len(names)), num_classes=len(names), init_seed=args.seed)
    print("epoch,loss,train_acc", flush=True)

    def report(stats):
        print(f"{stats.epoch},{stats.loss:.6f},{stats.train_acc:.6f}", flush=True)

    try:
        model, _ = classifier.train(splits["train"], mcfg, tcfg, names, callback=report)
    except classifier.TrainingDiverged as exc:
        raise NumericFailure(str(exc)) from None
    atomic_write(args.out, classifier.save_checkpoint(model))
    if splits["test"]:
        acc = classifier.evaluate(model, splits["test"]).accuracy
        print(f"test accuracy {acc:.4f}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    _, splits = load_manifest(args.data)
    data = splits[args.split]
    if not data:
        raise UsageError(f"split {args.split!r} is empty")
    ev = classifier.evaluate(model, data)
    print(f"accuracy,{ev.accuracy:.6f}")
    print("true\\pred," + ",".join(model.label_names))
    for name, row in zip(model.label_names, ev.confusion):
        print(name + "," + ",".join(str(int(v)) for v in row))
    return 0


# -- dreaming -----------------------------------------------------------------


def _snapshot_path(out: Path, t: int) -> Path:
    return out.with_name(f"{out.stem}_iter{t:04d}.ply")


def cmd_dream(args) -> int:
    model = load_model(args.model)
    target = target_index(model, args.target)
    pc = normalize_unit_sphere(read_cloud(args.input, args.points, args.seed))
    try:
        cfg = DreamConfig(
            target=target,
            gamma=args.gamma,
            iters=args.iters,
            period=args.period,
            max_points=args.max_points,
            union=UnionMode(args.union),
            seed=args.seed,
            snapshot_every=args.snapshot_every,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        if args.command == "add":
            out_pc, trace = add_run(model, pc, cfg)
        else:
            out_pc, trace = deepdream_naive(model, pc, cfg)
            print(f"note: dream ignores {', '.join(trace.ignored)}", file=sys.stderr)
    except DreamError as exc:
        raise NumericFailure(f"gradient blow-up at {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    write_cloud(out, out_pc)
    if args.trace:
        atomic_write(args.trace, trace.to_csv().encode())
    for t, snap in sorted(trace.snapshots.items()):
        atomic_write(_snapshot_path(out, t), io.write_ply(snap))
    print(
        f"{args.command}: {pc.count} -> {out_pc.count} points, target {args.target} logit "
        f"{trace.initial_logit:.4f} -> {trace.records[-1].target_logit:.4f}",
        file=sys.stderr,
    )
    return 0


def cmd_metrics(args) -> int:
    model = load_model(args.model)
    target = target_index(model, args.target)
    inp = normalize_unit_sphere(read_cloud(args.input, args.points, args.seed))
    naive = read_cloud(args.naive)
    add = read_cloud(args.add)
    if min(naive.count, add.count) < 2:
        raise UsageError("dream outputs need at least 2 points")
    report = metrics.compare_runs(inp, naive, add, model, target, args.eps)
    text = metrics.report_json(report)
    if args.out:
        atomic_write(args.out, text.encode())
    else:
        sys.stdout.write(text)
    print(f"verdict: {report['verdict']}", file=sys.stderr)
    return 0


def cmd_convert(args) -> int:
    src, dst = Path(args.inp), Path(args.out)
    if src.suffix.lower() not in (".off", ".xyz", ".ply"):
        raise UsageError(f"{src}: unknown extension {src.suffix!r}")
    if dst.suffix.lower() not in (".xyz", ".ply"):
        raise UsageError(f"{dst}: unknown extension {dst.suffix!r}")
    write_cloud(dst, read_cloud(src, args.points, args.seed))
    return 0


# -- parser -------------------------------------------------------------------


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(s):
    v = float(s)
    if not (v > 0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {s}")
    return v


def _fraction(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointdream", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic primitive dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--per-class", type=_positive_int, default=200)
    g.add_argument("--points", type=_positive_int, default=DEFAULT_POINTS)
    g.add_argument("--jitter", type=float, default=0.01)
    g.add_argument("--train-frac", type=_fraction, default=0.8)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the set classifier on a gen-data directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=_positive_int, default=30)
    t.add_argument("--lr", type=_positive_float, default=1e-3)
    t.add_argument("--batch", type=_positive_int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="accuracy and confusion matrix on a dataset split")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--split", choices=["train", "test"], default="test")
    e.set_defaults(func=cmd_eval)

    for name, help_text in (("dream", "naive point-cloud DeepDream"), ("add", "amalgamated DeepDream")):
        d = sub.add_parser(name, help=help_text)
        d.add_argument("--model", required=True)
        d.add_argument("--input", required=True)
        d.add_argument("--target", required=True)
        d.add_argument("--gamma", type=_positive_float, default=0.05)
        d.add_argument("--iters", type=_positive_int, default=50)
        d.add_argument("--period", type=_nonneg_int, default=5)
        d.add_argument("--max-points", type=_positive_int, default=None)
        d.add_argument("--union", choices=["original", "previous"], default="original")
        d.add_argument("--snapshot-every", type=_nonneg_int, default=0)
        d.add_argument("--points", type=_positive_int, default=None, help="samples for OFF input (default 1024)")
        d.add_argument("--out", required=True)
        d.add_argument("--trace", default=None)
        d.add_argument("--seed", type=int, default=0)
        d.set_defaults(func=cmd_dream)

    m = sub.add_parser("metrics", help="compare naive and ADD outputs against the input")
    m.add_argument("--input", required=True)
    m.add_argument("--naive", required=True)
    m.add_argument("--add", required=True)
    m.add_argument("--model", required=True)
    m.add_argument("--target", required=True)
    m.add_argument("--eps", type=_positive_float, default=0.05)
    m.add_argument("--points", type=_positive_int, default=None)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("convert", help="convert between OFF/XYZ/PLY (meshes are surface-sampled)")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--points", type=_positive_int, default=None)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
