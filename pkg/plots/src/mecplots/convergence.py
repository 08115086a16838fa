"""Training convergence curves from one or more run directories."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from .figspec import DPI, FigureSpec, parse_labeled, plot
from .io import SchemaError, float_column, read_csv

TRAINING_SCHEMA = "training.v1"


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values
    kernel = np.ones(window) / window
    smoothed = np.convolve(values, kernel, mode="valid")
    # pad the warm-up prefix so x alignment survives smoothing
    return np.concatenate([values[: window - 1], smoothed])


def render(spec: FigureSpec):
    window = int(spec.options.get("window", 0))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    total_points = 0
    for label, run_dir in spec.inputs:
        path = Path(run_dir) / "training.csv"
        header, rows = read_csv(path, TRAINING_SCHEMA)
        returns = np.array(float_column(path, header, rows, "weighted_return"))
        series = moving_average(returns, window) if window else returns
        ax.plot(np.arange(len(series)), series, label=label, linewidth=1.2)
        total_points += len(series)
    ax.set_xlabel(spec.xlabel or "policy update")
    ax.set_ylabel(spec.ylabel or "weighted episode return")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig, {"series": len(spec.inputs), "points": total_points}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot training convergence curves.")
    parser.add_argument("runs", nargs="+", help="run directories, optionally label=dir")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--window", type=int, default=0, help="trailing moving-average window (0 = off)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            kind="convergence",
            inputs=parse_labeled(args.runs),
            output=args.out,
            options={"window": args.window},
        )
        stats = plot(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({stats['series']} series, {stats['points']} points)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
