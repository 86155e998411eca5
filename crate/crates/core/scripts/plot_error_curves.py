#!/usr/bin/env python3
"""Plot per-agent error curves from error_curves.csv.

usage: plot_error_curves.py error_curves.csv [out.png]
"""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(path, out):
    curves = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        columns = [c for c in ("p_miss", "p_false_alarm") if c in reader.fieldnames]
        for row in reader:
            for c in columns:
                curves[c][int(row["agent"])].append((int(row["k"]), float(row[c])))
    fig, axes = plt.subplots(1, len(columns), figsize=(6 * len(columns), 4), squeeze=False)
    for ax, c in zip(axes[0], columns):
        for agent, pts in sorted(curves[c].items()):
            ks, ps = zip(*pts)
            ax.semilogy(ks, [max(p, 1e-6) for p in ps], lw=0.7)
        ax.set_xlabel("k")
        ax.set_ylabel(c)
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "error_curves.png")
