"""Run-directory file formats: versioned CSVs, archive JSON, manifest.

Floats are written with 17 significant digits so every value round-trips
bit-exactly; the first line of each CSV names its schema version and the
column names carry units.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

METRICS_SCHEMA = "metrics.v1"
TRAINING_SCHEMA = "training.v1"
EVAL_SCHEMA = "eval.v1"
TRAJECTORY_SCHEMA = "trajectory.v1"
ARCHIVE_SCHEMA = "archive.v1"
PARETO_SCHEMA = "pareto.v1"
MANIFEST_SCHEMA = "manifest.v1"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, schema: str, header: list[str], rows) -> None:
    lines = [f"#schema:{schema}", ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8").rstrip("\n")
    lines = text.split("\n")
    if not lines or not lines[0].startswith("#schema:"):
        raise ValueError(f"{path}: missing schema line")
    schema = lines[0][len("#schema:"):]
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return schema, header, rows


def metrics_header(n_tasks: int) -> list[str]:
    cols = ["generation"]
    cols += [f"weighted_return_task_{i}" for i in range(n_tasks)]
    cols += ["archive_size_count", "hypervolume_area", "sparsity_sq_gap"]
    return cols


def write_metrics_csv(path, generation_log, n_tasks: int) -> None:
    rows = []
    for rec in generation_log:
        row = [rec.generation] + list(rec.task_returns)
        row += [rec.archive_size, rec.hypervolume, rec.sparsity]
        rows.append(row)
    write_csv(path, METRICS_SCHEMA, metrics_header(n_tasks), rows)


TRAINING_HEADER = [
    "generation",
    "task_index",
    "iteration",
    "weighted_return",
    "surrogate",
    "critic_loss",
    "mean_kl",
]


def write_training_csv(path, training_log) -> None:
    rows = [
        [r.generation, r.task_index, r.iteration, r.weighted_return, r.surrogate, r.critic_loss, r.mean_kl]
        for r in training_log
    ]
    write_csv(path, TRAINING_SCHEMA, TRAINING_HEADER, rows)


EVAL_HEADER = ["seed", "f1_seconds", "f2_joules"]

DEVICES_SCHEMA = "devices.v1"
DEVICES_HEADER = ["gd_id", "x_m", "y_m", "coverage_radius_m"]


def write_devices_csv(path, gds, coverage_radius: float) -> None:
    rows = [[gd.id, gd.position.x, gd.position.y, coverage_radius] for gd in gds]
    write_csv(path, DEVICES_SCHEMA, DEVICES_HEADER, rows)

TRAJECTORY_HEADER = [
    "clock_slot",
    "x_m",
    "y_m",
    "uploaded_task_ids",
    "slot_delay_seconds",
    "slot_energy_joules",
    "wait_accrued_seconds",
    "sched_delay_seconds",
    "flight_energy_joules",
    "boundary_penalty",
]


def write_trajectory_csv(path, ledger) -> None:
    """One row per slot plus the initial pose; totals over the delay/energy
    columns reproduce the episode objectives."""
    rows = []
    x0, y0 = ledger.poses[0]
    rows.append([0, x0, y0, "", 0.0, 0.0, 0.0, 0.0, 0.0, 0])
    for t in range(len(ledger.slot_delay)):
        x, y = ledger.poses[t + 1]
        rows.append(
            [
                t + 1,
                x,
                y,
                ";".join(ledger.slot_uploads[t]),
                ledger.slot_delay[t],
                ledger.slot_task_energy[t],
                ledger.slot_wait[t],
                ledger.slot_sched[t],
                ledger.slot_flight_energy[t],
                1 if ledger.slot_penalty[t] else 0,
            ]
        )
    write_csv(path, TRAJECTORY_SCHEMA, TRAJECTORY_HEADER, rows)


def write_archive_json(path, archive, reference_point, checkpoint_paths: list[str]) -> None:
    payload = {
        "schema": ARCHIVE_SCHEMA,
        "reference_point": {"f1": reference_point.f1, "f2": reference_point.f2},
        "entries": [
            {
                "f1": entry.point.f1,
                "f2": entry.point.f2,
                "weight": [float(w) for w in entry.weight],
                "checkpoint": checkpoint_paths[i],
            }
            for i, entry in enumerate(archive)
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_archive_json(path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("schema") != ARCHIVE_SCHEMA:
        raise ValueError(f"{path}: expected schema {ARCHIVE_SCHEMA}")
    return payload


def write_pareto_json(path, clusters, hv: float, spars, reference_point) -> None:
    payload = {
        "schema": PARETO_SCHEMA,
        "hypervolume": hv,
        "sparsity": spars,
        "reference_point": {"f1": reference_point.f1, "f2": reference_point.f2},
        "clusters": [
            {"members": cluster.member_indices, "vertices": [[v[0], v[1]] for v in cluster.vertices]}
            for cluster in clusters
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_manifest(run_dir, config_hash: str, seed: int, command: str, files: list[str]) -> None:
    """Declare every output file of the run; writes <run_dir>/manifest.json."""
    run_dir = Path(run_dir)
    inventory = []
    for rel in sorted(files):
        p = run_dir / rel
        inventory.append({"path": rel, "sha256": _sha256(p), "bytes": p.stat().st_size})
    payload = {
        "schema": MANIFEST_SCHEMA,
        "code_version": __version__,
        "config_hash": config_hash,
        "seed": seed,
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "files": inventory,
    }
    (run_dir / "manifest.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest.json").read_text(encoding="utf-8"))


def resolve_output_dir(out_flag: str | None, config_output_dir: str) -> Path:
    """--out beats the config path; relative paths nest under $UAVMEC_OUT_ROOT."""
    chosen = Path(out_flag) if out_flag else Path(config_output_dir)
    root = os.environ.get("UAVMEC_OUT_ROOT")
    if root and not chosen.is_absolute():
        chosen = Path(root) / chosen
    return chosen
