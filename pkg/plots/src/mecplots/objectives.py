"""Bar comparison of mean objectives across evaluated methods."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from .figspec import FigureSpec, parse_labeled, plot
from .io import float_column, read_csv, SchemaError

EVAL_SCHEMA = "eval.v1"


def render(spec: FigureSpec):
    labels, delays, energies = [], [], []
    for label, eval_dir in spec.inputs:
        path = Path(eval_dir) / "summary.csv"
        header, rows = read_csv(path, EVAL_SCHEMA)
        f1 = float_column(path, header, rows, "f1_seconds")
        f2 = float_column(path, header, rows, "f2_joules")
        labels.append(label)
        delays.append(float(np.mean(f1)))
        energies.append(float(np.mean(f2)))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.2))
    x = np.arange(len(labels))
    ax1.bar(x, delays, width=0.6)
    ax1.set_xticks(x, labels, rotation=20, ha="right")
    ax1.set_ylabel(spec.ylabel or "mean total task delay [s]")
    ax2.bar(x, energies, width=0.6, color="tab:orange")
    ax2.set_xticks(x, labels, rotation=20, ha="right")
    ax2.set_ylabel("mean UAV energy [J]")
    for ax in (ax1, ax2):
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return fig, {"methods": len(labels)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Compare mean objectives of evaluated methods.")
    parser.add_argument("evals", nargs="+", help="evaluation directories, optionally label=dir")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind="objectives", inputs=parse_labeled(args.evals), output=args.out)
        stats = plot(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({stats['methods']} methods)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
