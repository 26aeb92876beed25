#!/usr/bin/env python3
"""Train the three model variants on the reference synthetic corpus and
print a layout-metric comparison table on the held-out split."""

import argparse
import sys
import time

from vrlayout.metrics import evaluate
from vrlayout.reference import predict_dataset, reference_split
from vrlayout.training import TrainConfig, train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--epochs", type=int, default=200)
    args = parser.parse_args()

    train_ds, val_ds = reference_split(args.seed)
    print(
        f"corpus: {len(train_ds.scenes)} train / {len(val_ds.scenes)} held-out, "
        f"seed {args.seed}"
    )
    rows = []
    for mode in ("full", "no-weighted-unification", "no-individual"):
        start = time.time()
        params, history = train(
            train_ds,
            TrainConfig(epochs=args.epochs, seed=args.seed, mode=mode),
            val_dataset=val_ds,
        )
        report = evaluate(predict_dataset(val_ds, params, mode), val_ds)
        rows.append((mode, report, time.time() - start, history))

    header = (
        f"{'mode':28s} {'RS':>7s} {'rIoU':>7s} {'R@0.5':>7s} {'cover':>7s} {'time':>7s}"
    )
    print(header)
    print("-" * len(header))
    for mode, report, seconds, _ in rows:
        print(
            f"{mode:28s} {report.rs:7.4f} {report.r_iou:7.4f} "
            f"{report.recall_at[0.5]:7.4f} {report.coverage:7.4f} {seconds:6.0f}s"
        )
    ordered = rows[0][1].rs > rows[1][1].rs > rows[2][1].rs
    print(f"ordering full > no-wu > no-ind: {ordered}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
