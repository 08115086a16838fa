"""Figure specification and the dispatching ``plot`` entry point."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from .io import SchemaError  # noqa: E402  (backend must be pinned first)

KINDS = ("convergence", "pareto", "objectives", "trajectory")
DPI = 150


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, labeled input paths, output image path.

    ``inputs`` is a tuple of (label, path) pairs; labels become legend or
    category names.  Axis labels default per kind and carry units.
    """

    kind: str
    inputs: tuple[tuple[str, str], ...]
    output: str
    xlabel: str = ""
    ylabel: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind: {self.kind}")
        if not self.inputs:
            raise SchemaError("at least one input path is required")


def plot(spec: FigureSpec) -> dict:
    """Render the figure to ``spec.output``; returns draw statistics."""
    from . import convergence, objectives, pareto, trajectory

    renderers = {
        "convergence": convergence.render,
        "pareto": pareto.render,
        "objectives": objectives.render,
        "trajectory": trajectory.render,
    }
    fig, stats = renderers[spec.kind](spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=DPI)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return stats


def parse_labeled(values: list[str]) -> tuple[tuple[str, str], ...]:
    """Parse repeated `label=path` arguments; a bare path labels itself."""
    pairs = []
    for value in values:
        if "=" in value:
            label, path = value.split("=", 1)
        else:
            label, path = Path(value).name, value
        pairs.append((label, path))
    return tuple(pairs)
