"""Train the desk-scale classifier on the default synthetic dataset and save a checkpoint."""

import argparse
import time
from pathlib import Path

from pointdream.classifier import ModelConfig, TrainConfig, evaluate, save_checkpoint, train
from pointdream.synthgen import DatasetSpec, build_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("model.ckpt"))
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = build_dataset(DatasetSpec(seed=args.seed))
    start = time.perf_counter()
    model, _ = train(
        ds.train,
        ModelConfig(init_seed=args.seed),
        TrainConfig(epochs=args.epochs, seed=args.seed),
        ds.label_names,
        callback=lambda s: print(f"epoch {s.epoch:3d}  loss {s.loss:.4f}  train acc {s.train_acc:.3f}"),
    )
    result = evaluate(model, ds.test)
    print(f"trained in {time.perf_counter() - start:.1f}s, test accuracy {result.accuracy:.4f}")
    print(result.confusion)
    args.out.write_bytes(save_checkpoint(model))
    print(f"saved {args.out}")


if __name__ == "__main__":
    main()
