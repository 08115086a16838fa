"""Archive scatter in objective space with cluster polylines."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt

from .figspec import FigureSpec, plot
from .io import SchemaError, read_json

ARCHIVE_SCHEMA = "archive.v1"
PARETO_SCHEMA = "pareto.v1"


def render(spec: FigureSpec):
    _, run_dir = spec.inputs[0]
    run = Path(run_dir)
    archive = read_json(run / "archive.json", ARCHIVE_SCHEMA)
    entries = archive["entries"]
    if not entries:
        raise SchemaError(f"{run / 'archive.json'}: archive is empty")

    fig, ax = plt.subplots(figsize=(6, 5))
    xs = [e["f1"] for e in entries]
    ys = [e["f2"] for e in entries]
    ax.scatter(xs, ys, s=45, zorder=3, label="archive policies")

    polylines = 0
    pareto_path = run / "pareto.json"
    if pareto_path.exists():
        front = read_json(pareto_path, PARETO_SCHEMA)
        for cluster in front["clusters"]:
            vertices = cluster["vertices"]
            if len(vertices) >= 2:
                ax.plot([v[0] for v in vertices], [v[1] for v in vertices], "--", linewidth=1.0, zorder=2)
                polylines += 1

    ax.set_xlabel(spec.xlabel or "total task delay [s]")
    ax.set_ylabel(spec.ylabel or "UAV energy [J]")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig, {"points": len(entries), "polylines": polylines}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot the archive Pareto scatter with cluster polylines.")
    parser.add_argument("--run", required=True, help="run directory containing archive.json")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind="pareto", inputs=(("run", args.run),), output=args.out)
        stats = plot(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({stats['points']} points, {stats['polylines']} polylines)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
