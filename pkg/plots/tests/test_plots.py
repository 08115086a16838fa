"""Figure-script tests against a real desk-scale run produced via the CLI."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from mecplots import FigureSpec, SchemaError, plot
from mecplots.convergence import main as convergence_main, moving_average
from mecplots.figspec import parse_labeled
from mecplots.objectives import main as objectives_main
from mecplots.pareto import main as pareto_main
from mecplots.trajectory import main as trajectory_main

REPO_ROOT = Path(__file__).resolve().parents[2]
DESK_CONFIG = REPO_ROOT / "configs" / "desk.yaml"
DESK_HORIZON = 60


def run_cli(*args):
    result = subprocess.run(
        [sys.executable, "-m", "uavmec.cli", *args],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, f"uavmec {' '.join(args)} failed:\n{result.stderr}"
    return result


@pytest.fixture(scope="session")
def desk_outputs(tmp_path_factory):
    """Desk-scale train + pareto + one checkpoint evaluation + two baselines."""
    base = tmp_path_factory.mktemp("deskrun")
    run_dir = base / "run"
    run_cli("train", "--config", str(DESK_CONFIG), "--out", str(run_dir))
    run_cli("pareto", "--run", str(run_dir))

    archive = json.loads((run_dir / "archive.json").read_text())
    ckpt = run_dir / archive["entries"][0]["checkpoint"]
    eval_dir = base / "eval"
    run_cli(
        "evaluate", "--checkpoint", str(ckpt), "--config", str(DESK_CONFIG),
        "--seeds", "11,12", "--out", str(eval_dir),
    )
    walk_dir = base / "walk"
    run_cli("baseline", "--kind", "random_walk", "--config", str(DESK_CONFIG),
            "--seeds", "11,12", "--out", str(walk_dir))
    spiral_dir = base / "spiral"
    run_cli("baseline", "--kind", "spiral", "--config", str(DESK_CONFIG),
            "--seeds", "11,12", "--out", str(spiral_dir))
    return {"run": run_dir, "eval": eval_dir, "walk": walk_dir, "spiral": spiral_dir}


def dir_fingerprint(root: Path) -> dict:
    return {str(p): p.stat().st_mtime_ns for p in sorted(root.rglob("*")) if p.is_file()}


class TestSecondaryAcceptance:
    def test_criterion_all_four_figures_on_desk_outputs(self, desk_outputs, tmp_path):
        run_dir, eval_dir = desk_outputs["run"], desk_outputs["eval"]
        before = {name: dir_fingerprint(d) for name, d in desk_outputs.items()}

        conv = tmp_path / "convergence.png"
        assert convergence_main([str(run_dir), "--out", str(conv)]) == 0
        assert conv.stat().st_size > 0

        par = tmp_path / "pareto.png"
        assert pareto_main(["--run", str(run_dir), "--out", str(par)]) == 0
        assert par.stat().st_size > 0
        archive = json.loads((run_dir / "archive.json").read_text())
        stats = plot(FigureSpec(kind="pareto", inputs=(("run", str(run_dir)),), output=str(par)))
        assert stats["points"] == len(archive["entries"])

        bars = tmp_path / "objectives.png"
        code = objectives_main([
            f"policy={eval_dir}", f"random walk={desk_outputs['walk']}",
            f"spiral={desk_outputs['spiral']}", "--out", str(bars),
        ])
        assert code == 0
        assert bars.stat().st_size > 0

        traj = tmp_path / "trajectory.png"
        assert trajectory_main(["--run", str(eval_dir), "--seed", "11", "--out", str(traj)]) == 0
        assert traj.stat().st_size > 0

        after = {name: dir_fingerprint(d) for name, d in desk_outputs.items()}
        assert before == after, "plot scripts must never write into run directories"
        print("\nACCEPTANCE plot-scripts (4 figures on desk-scale outputs): PASS")

    def test_trajectory_draws_horizon_plus_one_markers(self, desk_outputs, tmp_path):
        out = tmp_path / "traj.png"
        spec = FigureSpec(
            kind="trajectory",
            inputs=(("run", str(desk_outputs["eval"])),),
            output=str(out),
            options={"seed": "11"},
        )
        stats = plot(spec)
        assert stats["pose_markers"] == DESK_HORIZON + 1

    def test_convergence_overlays_two_labeled_series(self, desk_outputs, tmp_path):
        run_dir = desk_outputs["run"]
        out = tmp_path / "overlay.png"
        spec = FigureSpec(
            kind="convergence",
            inputs=(("first", str(run_dir)), ("second", str(run_dir))),
            output=str(out),
        )
        stats = plot(spec)
        assert stats["series"] == 2


class TestSchemaErrors:
    def test_missing_column_is_named(self, desk_outputs, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(desk_outputs["run"], broken)
        training = broken / "training.csv"
        lines = training.read_text().splitlines()
        header = lines[1].split(",")
        drop = header.index("weighted_return")
        fixed = [lines[0]] + [
            ",".join(v for i, v in enumerate(line.split(",")) if i != drop) for line in lines[1:]
        ]
        training.write_text("\n".join(fixed) + "\n")
        spec = FigureSpec(kind="convergence", inputs=(("x", str(broken)),), output=str(tmp_path / "x.png"))
        with pytest.raises(SchemaError, match="weighted_return"):
            plot(spec)

    def test_schema_version_mismatch_rejected(self, desk_outputs, tmp_path):
        broken = tmp_path / "versioned"
        shutil.copytree(desk_outputs["run"], broken)
        training = broken / "training.csv"
        text = training.read_text().replace("#schema:training.v1", "#schema:training.v999")
        training.write_text(text)
        code = convergence_main([str(broken), "--out", str(tmp_path / "x.png")])
        assert code == 2

    def test_missing_archive_file(self, tmp_path):
        assert pareto_main(["--run", str(tmp_path), "--out", str(tmp_path / "x.png")]) == 2

    def test_missing_devices_file(self, desk_outputs, tmp_path):
        partial = tmp_path / "partial"
        partial.mkdir()
        shutil.copy(desk_outputs["eval"] / "trajectory_11.csv", partial / "trajectory_11.csv")
        assert trajectory_main(["--run", str(partial), "--out", str(tmp_path / "x.png")]) == 2


class TestHelpers:
    def test_parse_labeled(self):
        pairs = parse_labeled(["a=/x/y", "/plain/dir"])
        assert pairs == (("a", "/x/y"), ("dir", "/plain/dir"))

    def test_moving_average_preserves_length(self):
        import numpy as np

        values = np.arange(10.0)
        assert len(moving_average(values, 4)) == 10
        assert moving_average(values, 1) is values

    def test_unknown_kind_rejected(self):
        with pytest.raises(SchemaError):
            FigureSpec(kind="waterfall", inputs=(("a", "b"),), output="x.png")
