#!/usr/bin/env python3
"""Render a label-rate sweep CSV (from `microfp sweep`) as accuracy-vs-p curves."""
import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("sweep_csv", type=Path)
    parser.add_argument("--out", type=Path, default=Path("sweep.png"))
    args = parser.parse_args()

    series = defaultdict(list)
    with args.sweep_csv.open() as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            if row["valid"] != "True" or not row["mean_acc"]:
                continue
            series[row["method"]].append((float(row["p"]), float(row["mean_acc"]), float(row["std_acc"])))

    fig, ax = plt.subplots(figsize=(6, 4))
    for method, points in sorted(series.items()):
        points.sort()
        ps = [p for p, _, _ in points]
        means = [m for _, m, _ in points]
        stds = [s for _, _, s in points]
        ax.errorbar(ps, means, yerr=stds, marker="o", capsize=3, label=method)
    ax.set_xscale("log")
    ax.set_xlabel("label rate p")
    ax.set_ylabel("accuracy")
    ax.set_title("SL on pN labels vs label propagation")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
