"""Amalgamated dreaming from a bottle-like shape (a narrow cylinder with a ball on
top) toward the cone class, writing PLY snapshots at iterations 0, 5 and 10."""

import argparse
from pathlib import Path

from pointdream.classifier import load_checkpoint
from pointdream.experiments import bottle_demo
from pointdream.io import parse_ply
from pointdream.metrics import chamfer_directed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("bottle_demo"))
    ap.add_argument("--target", default="cone")
    ap.add_argument("--iters", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = load_checkpoint(args.model.read_bytes())
    paths = bottle_demo(model, args.out, target=args.target, iters=args.iters, seed=args.seed)
    x0 = parse_ply((args.out / "input.ply").read_bytes())
    for t, path in paths.items():
        snap = parse_ply(path.read_bytes())
        print(f"iter {t:3d}: {snap.count:5d} points, chamfer from input {chamfer_directed(x0, snap):.2e}  {path}")
    print((args.out / "trace.csv").read_text(), end="")


if __name__ == "__main__":
    main()
