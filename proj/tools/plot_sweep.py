#!/usr/bin/env python3
"""Plot the curves in a sweep.csv written by `coff sweep`."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

LABELS = {
    "fmr_vs_inlier_radius": ("inlier radius (m)", "FMR"),
    "fmr_vs_min_inlier_ratio": ("minimum inlier ratio", "FMR"),
    "rr_vs_rmse": ("RMSE threshold (m)", "RR"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="sweep.csv")
    ap.add_argument("-o", "--out", default="sweep.png")
    args = ap.parse_args()

    curves = defaultdict(list)
    with open(args.csv, newline="") as f:
        for row in csv.DictReader(f):
            curves[row["metric"]].append((float(row["threshold"]), float(row["value"])))

    fig, axes = plt.subplots(1, len(curves), figsize=(4 * len(curves), 3.2), squeeze=False)
    for ax, (metric, pts) in zip(axes[0], sorted(curves.items())):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3)
        xlabel, ylabel = LABELS.get(metric, ("threshold", "value"))
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
