"""Paired naive vs amalgamated dreaming from sphere samples toward the cone class.

Prints one row per seed plus the verdict counts, and optionally writes all
reports as JSON.
"""

import argparse
import json
from pathlib import Path

from pointdream.classifier import load_checkpoint
from pointdream.experiments import PairedConfig, paired_run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", type=Path, required=True)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--target", default="cone")
    ap.add_argument("--json", type=Path)
    args = ap.parse_args()

    model = load_checkpoint(args.model.read_bytes())
    cfg = PairedConfig(target=args.target)
    rows, reports = [], {}
    print("seed  naive_nn  add_nn   naive_cov  add_cov  naive_logit        add_prob         verdict")
    for seed in range(args.seeds):
        r = paired_run(model, seed, cfg).report
        n, a = r["naive"], r["add"]
        reports[seed] = r
        rows.append(r["verdict"])
        print(
            f"{seed:4d}  {n['mean_nn']:.4f}    {a['mean_nn']:.4f}   {n['coverage']:.3f}      {a['coverage']:.3f}"
            f"    {n['initial_logit']:7.2f} -> {n['final_logit']:7.2f}  {a['initial_prob']:.4f} -> {a['final_prob']:.4f}  {r['verdict']}"
        )
    print({v: rows.count(v) for v in sorted(set(rows))})
    if args.json:
        args.json.write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
