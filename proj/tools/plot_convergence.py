#!/usr/bin/env python3
"""Plots pint-bench CSV output.

    plot_convergence.py convergence.csv [more.csv ...] [--work work_model.csv] [-o out.png]

Residual histories go on a log axis against the iteration; with --work the
estimated speedup is drawn against the worker count in a second panel.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("convergence", nargs="+", help="convergence CSV files")
    ap.add_argument("--work", action="append", default=[], help="work-model CSV file(s)")
    ap.add_argument("-o", "--output", default="convergence.png")
    args = ap.parse_args()

    panels = 2 if args.work else 1
    fig, axes = plt.subplots(1, panels, figsize=(6 * panels, 4.5), squeeze=False)

    ax = axes[0][0]
    for path in args.convergence:
        rows = read_rows(path)
        it = [int(r["iteration"]) for r in rows]
        res = [float(r["residual_norm"]) for r in rows]
        ax.semilogy(it, res, marker="o", label=Path(path).parent.name or Path(path).stem)
    ax.set_xlabel("iteration")
    ax.set_ylabel("C-point residual norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()

    if args.work:
        ax = axes[0][1]
        for path in args.work:
            rows = read_rows(path)
            p = [int(r["workers"]) for r in rows]
            s = [float(r["estimated_speedup"]) for r in rows]
            ax.loglog(p, s, marker="s", base=2, label=Path(path).parent.name or Path(path).stem)
        ax.axhline(1.0, color="gray", lw=0.8)
        ax.set_xlabel("workers")
        ax.set_ylabel("estimated speedup")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()

    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(args.output)


if __name__ == "__main__":
    main()
