"""Flight-path map with device positions and coverage circles."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from .figspec import FigureSpec, plot
from .io import SchemaError, float_column, read_csv

TRAJECTORY_SCHEMA = "trajectory.v1"
DEVICES_SCHEMA = "devices.v1"


def _trajectory_file(eval_dir: Path, seed: str | None) -> Path:
    if seed is not None:
        return eval_dir / f"trajectory_{seed}.csv"
    candidates = sorted(eval_dir.glob("trajectory_*.csv"))
    if not candidates:
        raise SchemaError(f"{eval_dir}: no trajectory_*.csv files")
    return candidates[0]


def render(spec: FigureSpec):
    _, eval_dir = spec.inputs[0]
    eval_dir = Path(eval_dir)
    traj_path = _trajectory_file(eval_dir, spec.options.get("seed"))
    header, rows = read_csv(traj_path, TRAJECTORY_SCHEMA)
    xs = float_column(traj_path, header, rows, "x_m")
    ys = float_column(traj_path, header, rows, "y_m")
    uploads = [r[header.index("uploaded_task_ids")] if "uploaded_task_ids" in header else "" for r in rows]
    if "uploaded_task_ids" not in header:
        raise SchemaError(f"{traj_path}: missing column uploaded_task_ids")

    dev_path = eval_dir / "devices.csv"
    dev_header, dev_rows = read_csv(dev_path, DEVICES_SCHEMA)
    dev_x = float_column(dev_path, dev_header, dev_rows, "x_m")
    dev_y = float_column(dev_path, dev_header, dev_rows, "y_m")
    radii = float_column(dev_path, dev_header, dev_rows, "coverage_radius_m")

    fig, ax = plt.subplots(figsize=(6.5, 6.5))
    for x, y, r in zip(dev_x, dev_y, radii):
        ax.add_patch(plt.Circle((x, y), r, color="tab:green", alpha=0.12, zorder=1))
    ax.scatter(dev_x, dev_y, marker="^", s=70, color="tab:green", zorder=4, label="ground devices")

    ax.plot(xs, ys, "-", color="tab:blue", linewidth=1.2, zorder=2)
    ax.scatter(xs, ys, s=14, color="tab:blue", zorder=3, label="UAV poses")
    upload_x = [x for x, u in zip(xs, uploads) if u]
    upload_y = [y for y, u in zip(ys, uploads) if u]
    if upload_x:
        ax.scatter(upload_x, upload_y, s=55, facecolors="none", edgecolors="tab:red", zorder=5,
                   label="collection slots")
    ax.scatter([xs[0]], [ys[0]], marker="s", s=80, color="tab:purple", zorder=6, label="start")

    ax.set_xlabel(spec.xlabel or "x [m]")
    ax.set_ylabel(spec.ylabel or "y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig, {"pose_markers": len(xs), "devices": len(dev_rows)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot a UAV flight path with device coverage circles.")
    parser.add_argument("--run", required=True, help="evaluation output directory")
    parser.add_argument("--seed", default=None, help="which trajectory seed to draw (default: first)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            kind="trajectory",
            inputs=(("run", args.run),),
            output=args.out,
            options={"seed": args.seed},
        )
        stats = plot(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({stats['pose_markers']} poses, {stats['devices']} devices)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
