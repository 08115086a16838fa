"""Non-learning comparator policies: random-walk, circular, and spiral flight
with greedy acceptance of any pending in-coverage task.

Baseline evaluation reuses the exact rollout and ledger machinery of learned
policies; the queue runs first-come-first-served with the within-slot
enqueue order set to nearest-device-first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import physics
from .env import EnvConfig, EnvState
from .evolve import ObjectivePoint, evaluate_policy

BASELINE_VARIANTS = ("random_walk", "circular", "spiral")


@dataclass(frozen=True)
class BaselineKind:
    variant: str
    step_frac: float = 1.0          # random-walk step as a fraction of d_max
    radius_frac: float = 1.0 / 3.0  # circle radius as a fraction of min(x_max, y_max)
    spiral_radius_frac: float = 0.45  # final spiral radius as a fraction of min extent

    def __post_init__(self):
        if self.variant not in BASELINE_VARIANTS:
            raise ValueError(f"variant must be one of {BASELINE_VARIANTS}")
        if not 0.0 <= self.step_frac <= 1.0:
            raise ValueError("step_frac must lie in [0, 1]")


def spiral_target_radius(kind: BaselineKind, clock: int, env_cfg: EnvConfig) -> float:
    """Target path radius for the given slot; non-decreasing in the clock."""
    x_max, y_max = env_cfg.limits.area
    r_max = kind.spiral_radius_frac * min(x_max, y_max)
    return r_max * min(1.0, (clock + 1) / env_cfg.horizon)


def _accept_flag(state: EnvState, gds, limits) -> float:
    for i, (arrival, bits) in enumerate(state.gd_status):
        if bits > 0 and physics.in_coverage(state.uav_pose, gds[i].position, limits):
            return 1.0
    return 0.0


def _move_toward(pose, target_x, target_y, d_max):
    dx, dy = target_x - pose.x, target_y - pose.y
    dist = math.hypot(dx, dy)
    theta = math.atan2(dy, dx) % (2.0 * math.pi)
    return theta, min(dist, d_max)


def baseline_action(kind: BaselineKind, state: EnvState, env_cfg: EnvConfig, gds, rng) -> np.ndarray:
    """Raw action triple for one slot; already inside the action box."""
    limits = env_cfg.limits
    d_max = limits.d_max
    pose = state.uav_pose
    x_max, y_max = limits.area
    cx, cy = x_max / 2.0, y_max / 2.0

    if kind.variant == "random_walk":
        theta = rng.uniform(0.0, 2.0 * math.pi)
        dist = kind.step_frac * d_max
    elif kind.variant == "circular":
        radius = kind.radius_frac * min(x_max, y_max)
        dx, dy = pose.x - cx, pose.y - cy
        off_circle = abs(math.hypot(dx, dy) - radius)
        if off_circle > d_max:
            # Approach phase: head for the nearest point of the circle.
            angle = math.atan2(dy, dx)
            theta, dist = _move_toward(pose, cx + radius * math.cos(angle), cy + radius * math.sin(angle), d_max)
        else:
            angle = math.atan2(dy, dx)
            step = 2.0 * math.asin(min(1.0, d_max / (2.0 * radius)))
            target = angle + step
            theta, dist = _move_toward(pose, cx + radius * math.cos(target), cy + radius * math.sin(target), d_max)
    else:  # spiral
        radius = spiral_target_radius(kind, state.clock, env_cfg)
        dx, dy = pose.x - cx, pose.y - cy
        angle = math.atan2(dy, dx)
        step = d_max / max(radius, d_max)
        target = angle + step
        theta, dist = _move_toward(pose, cx + radius * math.cos(target), cy + radius * math.sin(target), d_max)

    accept = _accept_flag(state, gds, limits)
    return np.array([theta, dist, accept])


def baseline_policy(kind: BaselineKind, env_cfg: EnvConfig, gds):
    """Rollout callable for a baseline variant."""

    def act(obs, state, rng):
        return baseline_action(kind, state, env_cfg, gds, rng), None

    return act


def baseline_env_config(env_cfg: EnvConfig) -> EnvConfig:
    """Baselines schedule FCFS with nearest-device enqueue priority."""
    return replace(env_cfg, scheduler_kind="fcfs", enqueue_order="nearest")


def evaluate_baseline(kind: BaselineKind, env_cfg: EnvConfig, seeds) -> ObjectivePoint:
    """Mean (f1, f2) over the given seeds via the shared evaluation path."""
    from .env import UavMecEnv

    cfg = baseline_env_config(env_cfg)
    gds = UavMecEnv(cfg).gds
    return evaluate_policy(baseline_policy(kind, cfg, gds), cfg, seeds)
