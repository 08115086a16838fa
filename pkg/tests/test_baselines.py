import math

import numpy as np
import pytest

from uavmec import physics
from uavmec.baselines import (
    BaselineKind,
    baseline_action,
    baseline_env_config,
    baseline_policy,
    evaluate_baseline,
    spiral_target_radius,
)
from uavmec.env import UavMecEnv, decode_action, episode_objectives, rollout
from uavmec.evolve import evaluate_policy

from tests.test_env import make_cfg


class TestActionBoxes:
    @pytest.mark.parametrize("variant", ["random_walk", "circular", "spiral"])
    def test_actions_already_inside_boxes(self, variant):
        cfg = baseline_env_config(make_cfg(n_gds=3, horizon=20, period=2))
        env = UavMecEnv(cfg)
        state = env.reset(4)
        rng = np.random.default_rng(0)
        kind = BaselineKind(variant=variant)
        for _ in range(20):
            raw = baseline_action(kind, state, cfg, env.gds, rng)
            decoded = decode_action(raw, cfg.limits)
            assert decoded.theta == pytest.approx(raw[0])
            assert decoded.dist == pytest.approx(raw[1])
            assert decoded.accept == raw[2]
            state, _, done = env.step(decoded)
            if done:
                break


class TestGreedyAcceptance:
    def test_accepts_only_with_pending_in_range(self):
        cfg = baseline_env_config(make_cfg(n_gds=2, horizon=6))
        env = UavMecEnv(cfg)
        state = env.reset(1)
        env._timelines = [dict() for _ in range(cfg.n_gds)]
        env._pending = [None, None]
        state = env._snapshot(state.uav_pose, invalid=False)
        rng = np.random.default_rng(1)
        raw = baseline_action(BaselineKind("random_walk"), state, cfg, env.gds, rng)
        assert raw[2] == 0.0


class TestCircular:
    def test_consecutive_poses_stay_on_circle(self):
        cfg = baseline_env_config(make_cfg(n_gds=2, horizon=30, area=(1000.0, 1000.0)))
        env = UavMecEnv(cfg)
        env.reset(3)
        radius = min(cfg.limits.area) / 3.0
        cx, cy = cfg.limits.area[0] / 2, cfg.limits.area[1] / 2
        from dataclasses import replace

        env._state = replace(env._state, uav_pose=physics.Position3(cx + radius, cy, cfg.limits.altitude_m))
        rng = np.random.default_rng(2)
        kind = BaselineKind("circular")
        for _ in range(30):
            raw = baseline_action(kind, env._state, cfg, env.gds, rng)
            state, _, done = env.step(decode_action(raw, cfg.limits))
            dist_from_center = math.hypot(state.uav_pose.x - cx, state.uav_pose.y - cy)
            assert abs(dist_from_center - radius) <= cfg.limits.d_max
            if done:
                break

    def test_never_triggers_boundary_penalty(self):
        cfg = baseline_env_config(make_cfg(n_gds=2, horizon=40, area=(1000.0, 1000.0)))
        env = UavMecEnv(cfg)
        ledger, _ = rollout(baseline_policy(BaselineKind("circular"), cfg, UavMecEnv(cfg).gds), cfg, seed=5)
        assert not any(ledger.slot_penalty)


class TestSpiral:
    def test_target_radius_non_decreasing(self):
        cfg = baseline_env_config(make_cfg(horizon=50))
        kind = BaselineKind("spiral")
        radii = [spiral_target_radius(kind, t, cfg) for t in range(50)]
        assert all(b >= a for a, b in zip(radii, radii[1:]))

    def test_never_triggers_boundary_penalty(self):
        cfg = baseline_env_config(make_cfg(n_gds=2, horizon=50, area=(1000.0, 1000.0)))
        ledger, _ = rollout(baseline_policy(BaselineKind("spiral"), cfg, UavMecEnv(cfg).gds), cfg, seed=6)
        assert not any(ledger.slot_penalty)


class TestEvaluateBaseline:
    def test_deterministic_per_seed_set(self):
        cfg = make_cfg(n_gds=3, horizon=10, period=2)
        kind = BaselineKind("random_walk")
        p1 = evaluate_baseline(kind, cfg, [1, 2, 3])
        p2 = evaluate_baseline(kind, cfg, [1, 2, 3])
        assert p1 == p2

    def test_stationary_variant_hover_identity(self):
        cfg = make_cfg(n_gds=3, horizon=12, period=2)
        kind = BaselineKind("random_walk", step_frac=0.0)
        env_cfg = baseline_env_config(cfg)
        gds = UavMecEnv(env_cfg).gds
        ledger, _ = rollout(baseline_policy(kind, env_cfg, gds), env_cfg, seed=7)
        f1, f2 = episode_objectives(ledger)
        hover = cfg.propulsion.p1_w + cfg.propulsion.p2_w
        expected_flight = cfg.horizon * cfg.limits.slot_seconds * hover
        assert sum(ledger.slot_flight_energy) == pytest.approx(expected_flight, rel=1e-9)
        assert f2 == pytest.approx(expected_flight + sum(ledger.slot_task_energy), rel=1e-12)

    def test_shares_evaluation_path_with_learned_policies(self):
        cfg = make_cfg(n_gds=2, horizon=8)
        kind = BaselineKind("circular")
        env_cfg = baseline_env_config(cfg)
        gds = UavMecEnv(env_cfg).gds
        direct = evaluate_policy(baseline_policy(kind, env_cfg, gds), env_cfg, [4, 5])
        assert evaluate_baseline(kind, cfg, [4, 5]) == direct

    def test_uses_fcfs_with_nearest_enqueue(self):
        cfg = make_cfg(scheduler="sa")
        env_cfg = baseline_env_config(cfg)
        assert env_cfg.scheduler_kind == "fcfs"
        assert env_cfg.enqueue_order == "nearest"
